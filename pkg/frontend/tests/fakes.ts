// In-memory fake of the gateway HTTP contract, driven through fetch.

import type { ApplianceView, FeedEntry, FetchLike, StatusSnapshot } from "../src/api.js";

function defaultAppliances(): ApplianceView[] {
  const appliances: ApplianceView[] = [];
  for (let id = 1; id <= 4; id++)
    appliances.push({ id, kind: "LIGHT", state: "OFF", watts: 40 });
  for (let id = 5; id <= 8; id++)
    appliances.push({ id, kind: "FAN", state: "OFF", watts: 60 });
  return appliances;
}

export class FakeGateway {
  token = "tok-0123456789abcdef";
  snapshot: StatusSnapshot = {
    mode: "AUTO",
    count: 0,
    appliances: defaultAppliances(),
    lights_on: 0,
    fans_on: 0,
    last_event_at: null,
    telemetry_entries: 0,
  };
  feedEntries: FeedEntry[] = [];
  requests: string[] = [];
  networkDown = false;
  sessionExpired = false;
  private statusGate: Promise<void> | null = null;
  private releaseGate: (() => void) | null = null;

  holdStatus(): void {
    this.statusGate = new Promise((resolve) => (this.releaseGate = resolve));
  }

  releaseStatus(): void {
    this.releaseGate?.();
    this.statusGate = null;
    this.releaseGate = null;
  }

  setCount(count: number): void {
    const on = count > 0;
    this.snapshot = {
      ...this.snapshot,
      count,
      appliances: this.snapshot.appliances.map((a) => ({
        ...a,
        state: this.snapshot.mode === "AUTO" ? (on ? "ON" : "OFF") : a.state,
      })),
    };
    this.retally();
    this.feedEntries.push({
      created_at: "1970-01-01T00:00:00Z",
      entry_id: this.feedEntries.length + 1,
      field1: String(count),
    });
  }

  private retally(): void {
    this.snapshot.lights_on = this.snapshot.appliances.filter(
      (a) => a.kind === "LIGHT" && a.state === "ON",
    ).length;
    this.snapshot.fans_on = this.snapshot.appliances.filter(
      (a) => a.kind === "FAN" && a.state === "ON",
    ).length;
    this.snapshot.telemetry_entries = this.feedEntries.length;
  }

  fetch: FetchLike = async (input, init) => {
    const method = init?.method ?? "GET";
    const url = new URL(input, "http://fake");
    const path = url.pathname;
    this.requests.push(`${method} ${path}`);

    if (this.networkDown) throw new TypeError("fetch failed");

    const json = (status: number, body: unknown) =>
      new Response(JSON.stringify(body), {
        status,
        headers: { "Content-Type": "application/json" },
      });
    const deny = (code: string) => json(401, { error: code, message: code });

    if (path === "/login" && method === "POST") {
      const body = JSON.parse(String(init?.body ?? "{}"));
      if (body.user === "admin" && body.password === "secret") {
        return json(200, { token: this.token, expires_at: "2099-01-01T00:00:00Z" });
      }
      return deny("invalid_credentials");
    }

    const authed = init?.headers
      ? (init.headers as Record<string, string>)["Authorization"] === `Bearer ${this.token}`
      : false;

    if (path === "/status" && method === "GET") {
      if (this.statusGate) await this.statusGate;
      if (!authed || this.sessionExpired) return deny("unauthorized");
      return json(200, this.snapshot);
    }
    if (path === "/mode" && method === "POST") {
      if (!authed || this.sessionExpired) return deny("unauthorized");
      const { mode } = JSON.parse(String(init?.body));
      this.snapshot = { ...this.snapshot, mode };
      if (mode === "AUTO") this.setModeAutoReconcile();
      return json(200, this.snapshot);
    }
    const appliance = path.match(/^\/appliance\/(\d+)$/);
    if (appliance && method === "POST") {
      if (!authed || this.sessionExpired) return deny("unauthorized");
      if (this.snapshot.mode === "AUTO") {
        return json(409, { error: "wrong_mode", message: "bank is in AUTO" });
      }
      const id = Number(appliance[1]);
      if (!this.snapshot.appliances.some((a) => a.id === id)) {
        return json(404, { error: "unknown_appliance", message: `no appliance ${id}` });
      }
      const { state } = JSON.parse(String(init?.body));
      this.snapshot = {
        ...this.snapshot,
        appliances: this.snapshot.appliances.map((a) =>
          a.id === id ? { ...a, state } : a,
        ),
      };
      this.retally();
      return json(200, this.snapshot);
    }
    if (path === "/channels/1/feeds.json" && method === "GET") {
      const results = Number(url.searchParams.get("results") ?? "0");
      const feeds = results > 0 ? this.feedEntries.slice(-results) : this.feedEntries;
      return json(200, { channel: { id: 1, field1: "count" }, feeds });
    }
    return json(404, { error: "not_found", message: path });
  };

  private setModeAutoReconcile(): void {
    const on = this.snapshot.count > 0;
    this.snapshot = {
      ...this.snapshot,
      appliances: this.snapshot.appliances.map((a) => ({
        ...a,
        state: on ? "ON" : "OFF",
      })),
    };
    this.retally();
  }
}
