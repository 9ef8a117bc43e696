/** Two real clients racing one slot against the real gateway: exactly one
 * wins, the loser renders the server's 409 and a refreshed calendar. Spawns
 * the gateway process from the backend package in this repository. */

import { spawn, ChildProcess } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { CalendarModel, SLOT_S } from "../src/calendar.js";
import { renderCalendarRow, renderToast } from "../src/render.js";

const PORT = 18000 + (process.pid % 2000);
const BASE = `http://127.0.0.1:${PORT}`;
const OPEN_FIELD = [".....", ".....", ".....", ".....", "....."];

let gateway: ChildProcess;
let admin: ApiClient;

async function waitForGateway(): Promise<void> {
  for (let i = 0; i < 100; i++) {
    try {
      const res = await fetch(`${BASE}/api/v1/robots`);
      if (res.status === 401) return; // up, and demanding auth
    } catch {
      /* not listening yet */
    }
    await new Promise((r) => setTimeout(r, 100));
  }
  throw new Error("gateway did not come up");
}

beforeAll(async () => {
  gateway = spawn("labd", ["--port", String(PORT)], {
    stdio: "ignore",
  });
  await waitForGateway();
  admin = new ApiClient(BASE, "admin-secret");
  await admin.adminAddRobot("labbot", "r01", 400);
  await admin.adminAddField("open", OPEN_FIELD);
}, 30_000);

afterAll(() => {
  gateway?.kill();
});

function nextSlot(offsetSlots = 4): number {
  const now = Math.floor(Date.now() / 1000);
  return now - (now % SLOT_S) + offsetSlots * SLOT_S;
}

describe("conflict surfacing against the live gateway", () => {
  it("of two racing clients exactly one books; the loser shows the 409", async () => {
    const casey = await admin.adminAddStudent("Casey", "s01");
    const riley = await admin.adminAddStudent("Riley", "s02");
    const a = new CalendarModel(new ApiClient(BASE, casey.token), "open");
    const b = new CalendarModel(new ApiClient(BASE, riley.token), "open");

    const start = nextSlot();
    const [resA, resB] = await Promise.all([
      a.book("r01", start, 60),
      b.book("r01", start, 60),
    ]);

    const winners = [resA, resB].filter((r) => r !== null);
    expect(winners).toHaveLength(1);
    const [winner, loser] = resA ? [a, b] : [b, a];

    expect(winner.toast?.kind).toBe("info");
    expect(loser.toast?.kind).toBe("error");
    expect(loser.toast?.text).toContain("Conflict");
    expect(loser.toast?.text).toContain("r01");
    expect(renderToast(loser.toast)).toContain('class="toast error"');

    // the loser's grid refreshed and shows the slot taken, not free
    expect(loser.refreshCount).toBeGreaterThanOrEqual(1);
    const now = Math.floor(Date.now() / 1000);
    const cells = loser.cells("r01", start, start + 3600, now);
    expect(cells.map((c) => c.status)).toEqual([
      "taken", "taken", "taken", "taken",
    ]);
    expect(renderCalendarRow("r01", cells)).not.toContain("free");

    // while the winner's grid shows the same slot as mine
    const winnerCells = winner.cells("r01", start, start + 3600, now);
    expect(winnerCells.every((c) => c.status === "mine")).toBe(true);

    console.log(
      "PASS ui-conflict: 1 of 2 racing clients booked; loser rendered " +
        "the server 409 and a refreshed calendar",
    );
  });

  it("the server, not the client, is the arbiter: direct double-post 409s", async () => {
    const solo = await admin.adminAddStudent("Alex", "s03");
    const api = new ApiClient(BASE, solo.token);
    const start = nextSlot(12);
    await api.reserve(["r01"], start, 30, "open");
    await expect(api.reserve(["r01"], start, 30, "open")).rejects.toThrowError(
      ApiError,
    );
    await expect(
      api.reserve(["r01"], start, 30, "open"),
    ).rejects.toMatchObject({ status: 409, error: "Conflict" });
  });
});
