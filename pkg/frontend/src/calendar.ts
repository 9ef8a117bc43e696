/** Reservation calendar: a 15-minute grid per robot, derived purely from
 * the robot listing and the student's own reservations. The grid is a
 * drafting surface only — the server is the sole arbiter of conflicts, and
 * a lost race surfaces the 409 verbatim and refreshes the grid. */

import { ApiClient, ApiError, Reservation } from "./api.js";

export const SLOT_S = 900;
export const MAX_DURATION_MIN = 120;

export type CellStatus = "free" | "mine" | "taken" | "past";

export interface CalendarCell {
  robotId: string;
  slotStart: number;
  status: CellStatus;
  reservationId?: string;
}

export interface Toast {
  kind: "error" | "info";
  text: string;
}

export function slotAlign(ts: number): number {
  return ts - (ts % SLOT_S);
}

/** Pure derivation of one robot-row of cells for [from, to). `busy` holds
 * slot starts known to be taken by somebody else (from availability probes
 * and lost races); own reservations always win the label. */
export function deriveCells(
  robotId: string,
  from: number,
  to: number,
  now: number,
  mine: Reservation[],
  busy: Set<number>,
): CalendarCell[] {
  const mineBydSlot = new Map<number, Reservation>();
  for (const r of mine) {
    if (r.state !== "Confirmed" && r.state !== "Active") continue;
    if (!r.robot_ids.includes(robotId)) continue;
    for (let s = r.start; s < r.start + r.duration_min * 60; s += SLOT_S) {
      mineBydSlot.set(s, r);
    }
  }
  const cells: CalendarCell[] = [];
  for (let s = slotAlign(from); s < to; s += SLOT_S) {
    const own = mineBydSlot.get(s);
    let status: CellStatus;
    if (s + SLOT_S <= now) status = "past";
    else if (own) status = "mine";
    else if (busy.has(s)) status = "taken";
    else status = "free";
    cells.push({
      robotId,
      slotStart: s,
      status,
      ...(own ? { reservationId: own.id } : {}),
    });
  }
  return cells;
}

export class CalendarModel {
  robots: string[] = [];
  mine: Reservation[] = [];
  toast: Toast | null = null;
  /** robotId -> slot starts observed busy (not ours). */
  private busy = new Map<string, Set<number>>();
  private refreshes = 0;

  constructor(
    private readonly api: ApiClient,
    readonly fieldLayoutId: string,
  ) {}

  get refreshCount(): number {
    return this.refreshes;
  }

  busySlots(robotId: string): Set<number> {
    let set = this.busy.get(robotId);
    if (!set) {
      set = new Set();
      this.busy.set(robotId, set);
    }
    return set;
  }

  /** Re-pull reservations, the robot roster, and availability for each
   * displayed hour of [from, to). */
  async refresh(from: number, to: number): Promise<void> {
    this.mine = await this.api.myReservations();
    const roster = await this.api.robots();
    this.robots = roster.map((r) => r.id).sort();
    this.busy = new Map();
    for (let s = slotAlign(from); s < to; s += 4 * SLOT_S) {
      const probe = await this.api.robots(s, 60);
      for (const r of probe) {
        if (r.available === false && !this.ownsSlot(r.id, s)) {
          for (let c = s; c < s + 4 * SLOT_S; c += SLOT_S) {
            this.busySlots(r.id).add(c);
          }
        }
      }
    }
    this.refreshes += 1;
  }

  private ownsSlot(robotId: string, slotStart: number): boolean {
    return this.mine.some(
      (r) =>
        (r.state === "Confirmed" || r.state === "Active") &&
        r.robot_ids.includes(robotId) &&
        r.start <= slotStart &&
        slotStart < r.start + r.duration_min * 60,
    );
  }

  cells(robotId: string, from: number, to: number, now: number): CalendarCell[] {
    return deriveCells(
      robotId,
      from,
      to,
      now,
      this.mine,
      this.busySlots(robotId),
    );
  }

  /** Draft-and-confirm: optimistic only up to the POST; a 409 marks the
   * range busy, raises a toast quoting the server, and refreshes. */
  async book(
    robotId: string,
    start: number,
    durationMin: number,
  ): Promise<Reservation | null> {
    try {
      const res = await this.api.reserve(
        [robotId],
        start,
        durationMin,
        this.fieldLayoutId,
      );
      this.mine.push(res);
      this.toast = { kind: "info", text: `booked ${res.id}` };
      return res;
    } catch (e) {
      if (!(e instanceof ApiError)) throw e;
      if (e.status === 409) {
        const clashing = typeof e.body.robot_id === "string"
          ? (e.body.robot_id as string)
          : robotId;
        for (let s = start; s < start + durationMin * 60; s += SLOT_S) {
          this.busySlots(clashing).add(s);
        }
        this.toast = {
          kind: "error",
          text: `${e.error}: ${clashing} is already booked for that slot`,
        };
        await this.refresh(start, start + durationMin * 60);
      } else {
        this.toast = { kind: "error", text: describe(e) };
      }
      return null;
    }
  }

  async cancel(reservationId: string): Promise<void> {
    await this.api.cancel(reservationId);
    this.mine = this.mine.filter((r) => r.id !== reservationId);
  }
}

function describe(e: ApiError): string {
  switch (e.error) {
    case "QuotaExceeded":
      return `QuotaExceeded: ${e.body.remaining_min ?? 0} minutes left this week`;
    case "PastSlot":
      return "PastSlot: that slot has already started";
    case "BadSlot":
      return "BadSlot: slots sit on a 15-minute grid, at most 120 minutes";
    default:
      return `${e.error}`;
  }
}
