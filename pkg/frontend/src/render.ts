/** String renderers: the models above are DOM-free, so the views are pure
 * functions from model to markup and the tests assert on the markup. */

import { CalendarCell, Toast } from "./calendar.js";
import { DashboardModel, TrailPoint } from "./dashboard.js";
import { CameraView, FieldView } from "./api.js";

export function renderCalendarRow(robotId: string, cells: CalendarCell[]): string {
  const tds = cells
    .map(
      (c) =>
        `<td class="cell ${c.status}" data-robot="${c.robotId}" ` +
        `data-slot="${c.slotStart}"></td>`,
    )
    .join("");
  return `<tr><th>${robotId}</th>${tds}</tr>`;
}

export function renderToast(toast: Toast | null): string {
  if (!toast) return "";
  return `<div class="toast ${toast.kind}">${escapeHtml(toast.text)}</div>`;
}

const SCALE = 100; // svg units per metre

export function renderTrailSvg(
  field: FieldView,
  trails: Map<string, TrailPoint[]>,
  cameras: CameraView[] = [],
): string {
  const cell = field.cell_m ?? 1.0;
  const w = field.rows[0].length * cell * SCALE;
  const h = field.rows.length * cell * SCALE;
  const parts: string[] = [
    `<svg viewBox="0 0 ${w} ${h}" class="field">`,
  ];
  field.rows.forEach((row, r) => {
    for (let c = 0; c < row.length; c++) {
      if (row[c] === "#") {
        parts.push(
          `<rect class="obstacle" x="${c * cell * SCALE}" ` +
            `y="${r * cell * SCALE}" width="${cell * SCALE}" ` +
            `height="${cell * SCALE}"/>`,
        );
      }
    }
  });
  for (const cam of cameras) {
    const [x0, y0, x1, y1] = cam.fov;
    parts.push(
      `<rect class="fov" data-camera="${cam.id}" x="${x0 * SCALE}" ` +
        `y="${y0 * SCALE}" width="${(x1 - x0) * SCALE}" ` +
        `height="${(y1 - y0) * SCALE}"/>`,
    );
  }
  for (const [robotId, trail] of trails) {
    const points = trail
      .map((p) => `${(p.x * SCALE).toFixed(1)},${(p.y * SCALE).toFixed(1)}`)
      .join(" ");
    parts.push(
      `<polyline class="trail" data-robot="${robotId}" points="${points}"/>`,
    );
    const last = trail[trail.length - 1];
    if (last) {
      parts.push(
        `<circle class="robot" data-robot="${robotId}" ` +
          `cx="${(last.x * SCALE).toFixed(1)}" ` +
          `cy="${(last.y * SCALE).toFixed(1)}" r="8"/>`,
      );
    }
  }
  parts.push("</svg>");
  return parts.join("");
}

export function renderStatusBar(model: DashboardModel): string {
  const batteries = [...model.latest.entries()]
    .map(
      ([rid, t]) =>
        `<span class="battery" data-robot="${rid}">` +
        `${rid}: ${t.battery.toFixed(1)}% (${t.state})</span>`,
    )
    .join("");
  const banner =
    model.status === "ended"
      ? `<div class="banner ended">${escapeHtml(model.banner ?? "ended")}</div>`
      : "";
  return `<div class="status ${model.status}">${batteries}</div>${banner}`;
}

function escapeHtml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;");
}
