/** Browser entry point: wires the DOM shell to the calendar and dashboard
 * models. Configuration is the API base URL and the student's token, read
 * from the query string or localStorage. */

import { ApiClient } from "./api.js";
import { CalendarModel, SLOT_S } from "./calendar.js";
import { DashboardModel } from "./dashboard.js";
import {
  renderCalendarRow,
  renderStatusBar,
  renderToast,
  renderTrailSvg,
} from "./render.js";

function config(): { baseUrl: string; token: string } {
  const params = new URLSearchParams(window.location.search);
  const baseUrl =
    params.get("api") ?? localStorage.getItem("baseUrl") ?? window.location.origin;
  const token = params.get("token") ?? localStorage.getItem("token") ?? "";
  localStorage.setItem("baseUrl", baseUrl);
  if (token) localStorage.setItem("token", token);
  return { baseUrl, token };
}

async function mountCalendar(api: ApiClient, root: HTMLElement): Promise<void> {
  const calendar = new CalendarModel(api, "open");
  const now = Math.floor(Date.now() / 1000);
  const from = now - (now % SLOT_S);
  const to = from + 8 * 3600;

  async function paint(): Promise<void> {
    const rows = calendar.robots
      .map((rid) => renderCalendarRow(rid, calendar.cells(rid, from, to, now)))
      .join("");
    root.innerHTML = `${renderToast(calendar.toast)}<table>${rows}</table>`;
    for (const td of root.querySelectorAll<HTMLElement>("td.free")) {
      td.addEventListener("click", async () => {
        await calendar.book(
          td.dataset.robot as string,
          Number(td.dataset.slot),
          60,
        );
        await paint();
      });
    }
  }

  await calendar.refresh(from, to);
  await paint();
}

async function mountDashboard(
  api: ApiClient,
  root: HTMLElement,
  sessionId: string,
): Promise<void> {
  const dash = new DashboardModel(api, sessionId);
  await dash.start();
  setInterval(() => {
    if (!dash.view) return;
    root.innerHTML =
      renderStatusBar(dash) +
      renderTrailSvg(dash.view.field, dash.trails, dash.view.cameras ?? []);
  }, dash.intervalMs);
}

export async function boot(): Promise<void> {
  const { baseUrl, token } = config();
  const api = new ApiClient(baseUrl, token);
  const params = new URLSearchParams(window.location.search);
  const session = params.get("session");
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app mount point");
  if (session) await mountDashboard(api, root, session);
  else await mountCalendar(api, root);
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  void boot();
}
