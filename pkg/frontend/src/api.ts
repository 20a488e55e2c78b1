// Typed client for the gateway HTTP API and the telemetry feed endpoint.

export type Mode = "AUTO" | "MANUAL";
export type SwitchState = "ON" | "OFF";

export interface ApplianceView {
  id: number;
  kind: "LIGHT" | "FAN";
  state: SwitchState;
  watts: number;
}

export interface StatusSnapshot {
  mode: Mode;
  count: number;
  appliances: ApplianceView[];
  lights_on: number;
  fans_on: number;
  last_event_at: number | null;
  telemetry_entries: number;
}

export interface FeedEntry {
  created_at: string;
  entry_id: number;
  field1: string;
}

export interface FeedPage {
  channel: { id: number; [field: string]: unknown };
  feeds: FeedEntry[];
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class GatewayClient {
  // token lives in memory only; a reload means logging in again
  private token: string | null = null;

  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  get loggedIn(): boolean {
    return this.token !== null;
  }

  clearSession(): void {
    this.token = null;
  }

  async login(user: string, password: string): Promise<void> {
    const body = (await this.request("POST", "/login", { user, password }, false)) as {
      token: string;
    };
    this.token = body.token;
  }

  async status(): Promise<StatusSnapshot> {
    return (await this.request("GET", "/status")) as StatusSnapshot;
  }

  async setMode(mode: Mode): Promise<StatusSnapshot> {
    return (await this.request("POST", "/mode", { mode })) as StatusSnapshot;
  }

  async setAppliance(id: number, state: SwitchState): Promise<StatusSnapshot> {
    return (await this.request("POST", `/appliance/${id}`, { state })) as StatusSnapshot;
  }

  async feeds(channelId: number, results: number): Promise<FeedPage> {
    return (await this.request(
      "GET",
      `/channels/${channelId}/feeds.json?results=${results}`,
      undefined,
      false,
    )) as FeedPage;
  }

  private async request(
    method: string,
    path: string,
    body?: unknown,
    auth = true,
  ): Promise<unknown> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (auth && this.token !== null) headers["Authorization"] = `Bearer ${this.token}`;
    const resp = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!resp.ok) {
      let code = "http_error";
      let message = `${resp.status}`;
      try {
        const payload = (await resp.json()) as { error?: string; message?: string };
        if (payload.error) code = payload.error;
        if (payload.message) message = payload.message;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(resp.status, code, message);
    }
    return resp.json();
  }
}
