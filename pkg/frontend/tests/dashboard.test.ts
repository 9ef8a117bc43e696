import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient, FetchLike } from "../src/api.js";
import {
  DashboardModel,
  maxChordDeviation,
  totalCurvature,
} from "../src/dashboard.js";
import { renderStatusBar, renderTrailSvg } from "../src/render.js";

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

const SESSION_VIEW = {
  reservation: {
    id: "res-000001",
    student_id: "s01",
    robot_ids: ["r01"],
    start: 0,
    duration_min: 60,
    field_layout_id: "open",
    state: "Active",
  },
  robots: { r01: { id: "r01", model: "labbot", state: "Active", battery_pct: 100 } },
  field: { id: "open", rows: [".....", ".....", ".....", ".....", "....."] },
  cameras: [{ id: "cam1", fov: [0, 0, 2, 2] as [number, number, number, number] }],
};

/** Serves the recorded gateway telemetry stream, `ticksVisible` lines at a
 * time, honouring from_tick exactly as the server does. */
function streamingFetch(fixture: string, ticksVisible: () => number): FetchLike {
  const lines = readFileSync(join(FIXTURES, fixture), "utf-8")
    .trim()
    .split("\n");
  return async (url) => {
    const u = new URL(url);
    if (u.pathname.endsWith("/telemetry")) {
      const from = Number(u.searchParams.get("from_tick") ?? 0);
      const visible = lines
        .slice(0, ticksVisible())
        .filter((l) => (JSON.parse(l).tick as number) >= from);
      return new Response(visible.join("\n") + "\n", { status: 200 });
    }
    if (/\/sessions\/[^/]+$/.test(u.pathname)) {
      return new Response(JSON.stringify(SESSION_VIEW), { status: 200 });
    }
    throw new Error(`unrouted ${u.pathname}`);
  };
}

describe("telemetry polling", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("polls at one hertz or faster and keeps the highest tick", async () => {
    let released = 10;
    const api = new ApiClient(
      "http://lab",
      "tok",
      streamingFetch("straight.ndjson", () => released),
    );
    const dash = new DashboardModel(api, "res-000001");
    expect(dash.intervalMs).toBeLessThanOrEqual(1000);
    await dash.start();
    expect(dash.latest.get("r01")?.tick).toBe(10);

    released = 40;
    for (let i = 0; i < 5; i++) {
      await vi.advanceTimersByTimeAsync(dash.intervalMs);
    }
    // five seconds of wall time must have produced at least five pulls
    expect(dash.pollsCompleted).toBeGreaterThanOrEqual(5);
    expect(dash.latest.get("r01")?.tick).toBe(40);
    // the trail holds each tick exactly once despite overlapping pulls
    expect(dash.trails.get("r01")?.map((p) => p.tick)).toEqual(
      Array.from({ length: 40 }, (_, i) => i + 1),
    );
    dash.stop();
  });

  it("a slower caller is clamped to the one-second floor", () => {
    const api = new ApiClient("http://lab", "tok", async () => {
      throw new Error("unused");
    });
    const dash = new DashboardModel(api, "res-000001", 5000);
    expect(dash.intervalMs).toBe(1000);
  });

  it("stream loss degrades to reconnecting, then recovers", async () => {
    let failing = false;
    const inner = streamingFetch("straight.ndjson", () => 20);
    const api = new ApiClient("http://lab", "tok", async (url, init) => {
      if (failing && String(url).includes("/telemetry")) {
        throw new TypeError("network down");
      }
      return inner(url, init);
    });
    const dash = new DashboardModel(api, "res-000001");
    await dash.start();
    expect(dash.status).toBe("live");
    failing = true;
    await dash.poll();
    expect(dash.status).toBe("reconnecting");
    failing = false;
    await dash.poll();
    expect(dash.status).toBe("live");
    dash.stop();
  });

  it("a 410 freezes the dashboard with a completed banner", async () => {
    const inner = streamingFetch("straight.ndjson", () => 20);
    let gone = false;
    const api = new ApiClient("http://lab", "tok", async (url, init) => {
      if (gone && String(url).includes("/telemetry")) {
        return new Response(JSON.stringify({ error: "SessionEnded" }), {
          status: 410,
        });
      }
      return inner(url, init);
    });
    const dash = new DashboardModel(api, "res-000001");
    await dash.start();
    gone = true;
    await dash.poll();
    expect(dash.status).toBe("ended");
    expect(dash.banner).toBe("session completed");
    const bar = renderStatusBar(dash);
    expect(bar).toContain('class="banner ended"');
    expect(bar).toContain("session completed");
    // frozen: further polls are no-ops
    const before = dash.pollsCompleted;
    await dash.poll();
    expect(dash.pollsCompleted).toBe(before);
  });
});

describe("trail geometry", () => {
  async function trailFrom(fixture: string) {
    const api = new ApiClient(
      "http://lab",
      "tok",
      streamingFetch(fixture, () => 60),
    );
    const dash = new DashboardModel(api, "res-000001");
    dash.view = SESSION_VIEW;
    await dash.poll();
    return dash;
  }

  it("a straight drive renders a straight trail", async () => {
    const dash = await trailFrom("straight.ndjson");
    const trail = dash.trails.get("r01")!;
    expect(trail).toHaveLength(60);
    expect(totalCurvature(trail)).toBe(0);
    expect(maxChordDeviation(trail)).toBe(0);
    expect(trail.every((p) => p.y === 0)).toBe(true);
  });

  it("a biased robot's trail visibly curves", async () => {
    const dash = await trailFrom("biased.ndjson");
    const trail = dash.trails.get("r01")!;
    // recorded from the fleet simulator with wheel bias 0.5 rad/m: heading
    // winds up by bias * distance and the path bows well off its chord
    expect(trail[trail.length - 1].theta).toBeCloseTo(1.5, 3);
    expect(totalCurvature(trail)).toBeGreaterThan(1.4);
    expect(maxChordDeviation(trail)).toBeGreaterThan(0.1);
  });

  it("the svg draws obstacles, fov overlays and one polyline per robot", async () => {
    const dash = await trailFrom("biased.ndjson");
    const svg = renderTrailSvg(
      { id: "maze", rows: ["..#", "...", "#.."] },
      dash.trails,
      SESSION_VIEW.cameras,
    );
    expect(svg.match(/class="obstacle"/g)).toHaveLength(2);
    expect(svg).toContain('class="fov" data-camera="cam1"');
    expect(svg.match(/class="trail"/g)).toHaveLength(1);
    expect(svg).toContain('circle class="robot" data-robot="r01"');
  });

  it("rendered pose equals the latest telemetry record exactly", async () => {
    const dash = await trailFrom("biased.ndjson");
    const last = dash.latest.get("r01")!;
    const svg = renderTrailSvg(SESSION_VIEW.field, dash.trails);
    expect(svg).toContain(`cx="${(last.x * 100).toFixed(1)}"`);
    expect(svg).toContain(`cy="${(last.y * 100).toFixed(1)}"`);
    expect(renderStatusBar(dash)).toContain(
      `r01: ${last.battery.toFixed(1)}% (Active)`,
    );
  });
});
