/** Live session dashboard: polls the telemetry stream at one second or
 * faster, keeps the highest tick seen per robot (no client-side
 * extrapolation), and accumulates pose trails for rendering over the field
 * raster. A SessionEnded answer freezes the view. */

import {
  ApiClient,
  ApiError,
  SessionView,
  TelemetryRecord,
} from "./api.js";

export type ConnectionStatus = "connecting" | "live" | "reconnecting" | "ended";

export interface TrailPoint {
  tick: number;
  x: number;
  y: number;
  theta: number;
}

export class DashboardModel {
  view: SessionView | null = null;
  latest = new Map<string, TelemetryRecord>();
  trails = new Map<string, TrailPoint[]>();
  status: ConnectionStatus = "connecting";
  banner: string | null = null;
  pollsCompleted = 0;

  readonly intervalMs: number;
  private timer: ReturnType<typeof setInterval> | null = null;
  private highestTick = 0;

  constructor(
    private readonly api: ApiClient,
    readonly sessionId: string,
    intervalMs = 500,
  ) {
    // the dashboard promises at least 1 Hz; a slower caller is clamped
    this.intervalMs = Math.min(intervalMs, 1000);
  }

  async start(): Promise<void> {
    this.view = await this.api.session(this.sessionId);
    await this.poll();
    this.timer = setInterval(() => void this.poll(), this.intervalMs);
  }

  stop(): void {
    if (this.timer !== null) clearInterval(this.timer);
    this.timer = null;
  }

  /** One pull of everything past the highest tick already shown. On stream
   * loss the view degrades to "reconnecting" and the next pull resubscribes
   * from the current tick; SessionEnded freezes the dashboard instead. */
  async poll(): Promise<void> {
    if (this.status === "ended") return;
    let records: TelemetryRecord[];
    try {
      records = await this.api.telemetry(this.sessionId, this.highestTick + 1);
    } catch (e) {
      if (e instanceof ApiError && (e.status === 410 || e.status === 404)) {
        this.freeze("session completed");
      } else {
        this.status = "reconnecting";
      }
      return;
    }
    for (const rec of records) {
      this.highestTick = Math.max(this.highestTick, rec.tick);
      const best = this.latest.get(rec.robot_id);
      if (!best || rec.tick > best.tick) this.latest.set(rec.robot_id, rec);
      let trail = this.trails.get(rec.robot_id);
      if (!trail) {
        trail = [];
        this.trails.set(rec.robot_id, trail);
      }
      trail.push({ tick: rec.tick, x: rec.x, y: rec.y, theta: rec.theta });
    }
    this.status = "live";
    this.pollsCompleted += 1;
  }

  private freeze(reason: string): void {
    this.status = "ended";
    this.banner = reason;
    this.stop();
  }

  battery(robotId: string): number | null {
    return this.latest.get(robotId)?.battery ?? null;
  }

  async deployBundle(name: string, payload: Uint8Array): Promise<string> {
    try {
      const rec = await this.api.deploy(this.sessionId, name, payload);
      return `deployed ${rec.name} (${rec.size_bytes} bytes)`;
    } catch (e) {
      if (e instanceof ApiError) return `deploy failed: ${e.error}`;
      throw e;
    }
  }
}

/** Total unsigned heading change along a trail — zero for a straight drive,
 * visibly positive for a biased robot. */
export function totalCurvature(trail: TrailPoint[]): number {
  let sum = 0;
  for (let i = 1; i < trail.length; i++) {
    sum += Math.abs(trail[i].theta - trail[i - 1].theta);
  }
  return sum;
}

/** Greatest perpendicular distance of the trail from the straight chord
 * between its endpoints — the "does the line look bent" number. */
export function maxChordDeviation(trail: TrailPoint[]): number {
  if (trail.length < 3) return 0;
  const a = trail[0];
  const b = trail[trail.length - 1];
  const dx = b.x - a.x;
  const dy = b.y - a.y;
  const len = Math.hypot(dx, dy);
  if (len === 0) return 0;
  let worst = 0;
  for (const p of trail) {
    const d = Math.abs(dx * (a.y - p.y) - (a.x - p.x) * dy) / len;
    worst = Math.max(worst, d);
  }
  return worst;
}
