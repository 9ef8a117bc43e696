/** Typed client for the lab gateway. Every mutation the UI performs goes
 * through here; the client holds no state beyond its credentials. */

export interface Reservation {
  id: string;
  student_id: string;
  robot_ids: string[];
  start: number;
  duration_min: number;
  field_layout_id: string;
  state: string;
}

export interface RobotInfo {
  id: string;
  model: string;
  state: string;
  battery_pct: number;
  available?: boolean;
}

export interface FieldView {
  id: string;
  rows: string[];
  cell_m?: number;
}

export interface SessionView {
  reservation: Reservation;
  robots: Record<string, RobotInfo>;
  field: FieldView;
  cameras?: CameraView[];
  deploys?: DeployRecord[];
}

export interface CameraView {
  id: string;
  fov: [number, number, number, number];
}

export interface DeployRecord {
  name: string;
  checksum: string;
  size_bytes: number;
}

export interface TelemetryRecord {
  robot_id: string;
  tick: number;
  x: number;
  y: number;
  theta: number;
  battery: number;
  state: string;
}

/** Non-2xx responses carry the server's error body; `error` is the server's
 * own name for what went wrong and is surfaced verbatim in the UI. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly error: string,
    readonly body: Record<string, unknown>,
  ) {
    super(`${status} ${error}`);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private token: string,
    private readonly fetchFn: FetchLike = (u, i) => fetch(u, i),
  ) {}

  private async request(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<Response> {
    const res = await this.fetchFn(`${this.baseUrl}/api/v1${path}`, {
      method,
      headers: {
        Authorization: `Bearer ${this.token}`,
        ...(body !== undefined ? { "Content-Type": "application/json" } : {}),
      },
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    if (!res.ok) {
      let parsed: Record<string, unknown> = {};
      try {
        parsed = (await res.json()) as Record<string, unknown>;
      } catch {
        /* non-JSON error body; status alone will have to do */
      }
      throw new ApiError(
        res.status,
        typeof parsed.error === "string" ? parsed.error : res.statusText,
        parsed,
      );
    }
    return res;
  }

  private async json<T>(method: string, path: string, body?: unknown): Promise<T> {
    return (await this.request(method, path, body)).json() as Promise<T>;
  }

  async reserve(
    robotIds: string[],
    start: number,
    durationMin: number,
    fieldLayoutId: string,
  ): Promise<Reservation> {
    return this.json("POST", "/reservations", {
      robot_ids: robotIds,
      start,
      duration_min: durationMin,
      field_layout_id: fieldLayoutId,
    });
  }

  async cancel(reservationId: string): Promise<void> {
    await this.request("DELETE", `/reservations/${reservationId}`);
  }

  async myReservations(): Promise<Reservation[]> {
    const body = await this.json<{ reservations: Reservation[] }>(
      "GET",
      "/reservations",
    );
    return body.reservations;
  }

  async robots(start?: number, durationMin?: number): Promise<RobotInfo[]> {
    const q =
      start !== undefined && durationMin !== undefined
        ? `?start=${start}&duration=${durationMin}`
        : "";
    const body = await this.json<{ robots: RobotInfo[] }>("GET", `/robots${q}`);
    return body.robots;
  }

  async session(sessionId: string): Promise<SessionView> {
    return this.json("GET", `/sessions/${sessionId}`);
  }

  /** One NDJSON fetch of everything past `fromTick`; the poller calls this
   * at least once a second. */
  async telemetry(
    sessionId: string,
    fromTick = 0,
  ): Promise<TelemetryRecord[]> {
    const res = await this.request(
      "GET",
      `/sessions/${sessionId}/telemetry?from_tick=${fromTick}`,
    );
    const text = await res.text();
    const records: TelemetryRecord[] = [];
    for (const line of text.split("\n")) {
      if (!line.trim()) continue;
      const parsed = JSON.parse(line) as Record<string, unknown>;
      if (parsed.event === "SessionEnded") continue;
      records.push(parsed as unknown as TelemetryRecord);
    }
    return records;
  }

  async deploy(
    sessionId: string,
    name: string,
    payload: Uint8Array,
  ): Promise<DeployRecord> {
    const digest = await crypto.subtle.digest("SHA-256", payload.slice().buffer);
    const checksum = Array.from(new Uint8Array(digest))
      .map((b) => b.toString(16).padStart(2, "0"))
      .join("");
    let binary = "";
    for (const b of payload) binary += String.fromCharCode(b);
    return this.json("POST", `/sessions/${sessionId}/deploy`, {
      name,
      payload_b64: btoa(binary),
      checksum,
    });
  }

  async sendCommand(
    sessionId: string,
    robotId: string,
    v: number,
    omega: number,
    durationTicks: number,
  ): Promise<void> {
    await this.request("POST", `/sessions/${sessionId}/commands`, {
      robot_id: robotId,
      v,
      omega,
      duration_ticks: durationTicks,
    });
  }

  // --- admin surface, used only by operator tooling and test fixtures ---

  async adminAddStudent(name: string, id?: string): Promise<{ id: string; token: string }> {
    return this.json("POST", "/admin/students", { name, ...(id ? { id } : {}) });
  }

  async adminAddRobot(model: string, id: string, firmwareMb: number): Promise<void> {
    await this.request("POST", "/admin/robots", {
      model,
      id,
      firmware_mb: firmwareMb,
    });
  }

  async adminAddField(id: string, rows: string[]): Promise<void> {
    await this.request("POST", "/admin/fields", { id, rows });
  }
}
