// Dashboard state machine. Holds the session, the last confirmed snapshot,
// the feed history and pending-command flags. Toggle positions always come
// from the last confirmed snapshot; nothing here is applied optimistically.

import {
  ApiError,
  FeedEntry,
  GatewayClient,
  Mode,
  StatusSnapshot,
  SwitchState,
} from "./api.js";

export type ConnectionState = "idle" | "ok" | "stale" | "unauthorized";

export interface WrongModePrompt {
  applianceId: number;
  desired: SwitchState;
}

export interface ViewModelOptions {
  pollIntervalMs?: number;
  channelId?: number;
  feedResults?: number;
}

type Listener = () => void;

export class DashboardViewModel {
  readonly pollIntervalMs: number;
  readonly channelId: number;
  readonly feedResults: number;

  snapshot: StatusSnapshot | null = null;
  feed: FeedEntry[] = [];
  connection: ConnectionState = "idle";
  prompt: WrongModePrompt | null = null;
  lastError: string | null = null;

  private client: GatewayClient;
  private listeners: Listener[] = [];
  private pending = new Set<string>();
  private pollHandle: ReturnType<typeof setInterval> | null = null;
  private inFlight = false;

  constructor(client: GatewayClient, options: ViewModelOptions = {}) {
    this.client = client;
    this.pollIntervalMs = options.pollIntervalMs ?? 2000;
    this.channelId = options.channelId ?? 1;
    this.feedResults = options.feedResults ?? 60;
  }

  get loggedIn(): boolean {
    return this.client.loggedIn;
  }

  isPending(key: string): boolean {
    return this.pending.has(key);
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  async login(user: string, password: string): Promise<boolean> {
    try {
      await this.client.login(user, password);
      this.lastError = null;
      this.connection = "idle";
      this.notify();
      return true;
    } catch (err) {
      this.lastError = err instanceof ApiError ? err.message : "login failed";
      this.notify();
      return false;
    }
  }

  logout(): void {
    this.stopPolling();
    this.client.clearSession();
    this.snapshot = null;
    this.feed = [];
    this.connection = "idle";
    this.prompt = null;
    this.notify();
  }

  startPolling(): void {
    if (this.pollHandle !== null) return;
    void this.refresh();
    this.pollHandle = setInterval(() => void this.refresh(), this.pollIntervalMs);
  }

  stopPolling(): void {
    if (this.pollHandle !== null) {
      clearInterval(this.pollHandle);
      this.pollHandle = null;
    }
  }

  /** One poll tick. Skips itself if the previous tick is still in flight. */
  async refresh(): Promise<"ok" | "skipped" | "failed"> {
    if (this.inFlight) return "skipped";
    if (!this.client.loggedIn) return "failed";
    this.inFlight = true;
    try {
      this.snapshot = await this.client.status();
      const page = await this.client.feeds(this.channelId, this.feedResults);
      this.feed = page.feeds;
      this.connection = "ok";
      return "ok";
    } catch (err) {
      this.handleFailure(err);
      return "failed";
    } finally {
      this.inFlight = false;
      this.notify();
    }
  }

  /** Flip one appliance relative to its last confirmed state. */
  async toggleAppliance(id: number): Promise<void> {
    const confirmed = this.snapshot?.appliances.find((a) => a.id === id);
    if (!confirmed || this.pending.has(`appliance:${id}`)) return;
    const desired: SwitchState = confirmed.state === "ON" ? "OFF" : "ON";
    this.pending.add(`appliance:${id}`);
    this.notify();
    try {
      this.snapshot = await this.client.setAppliance(id, desired);
      this.connection = "ok";
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // AUTO mode: offer the switch to MANUAL instead of mutating anything
        this.prompt = { applianceId: id, desired };
      } else {
        this.handleFailure(err);
      }
    } finally {
      this.pending.delete(`appliance:${id}`);
      this.notify();
    }
  }

  async setMode(mode: Mode): Promise<void> {
    if (this.pending.has("mode")) return;
    this.pending.add("mode");
    this.notify();
    try {
      this.snapshot = await this.client.setMode(mode);
      this.connection = "ok";
      this.prompt = null;
    } catch (err) {
      this.handleFailure(err);
    } finally {
      this.pending.delete("mode");
      this.notify();
    }
  }

  /** Accept the WrongMode prompt: switch to MANUAL, then apply the toggle. */
  async acceptPrompt(): Promise<void> {
    const prompt = this.prompt;
    if (!prompt) return;
    this.prompt = null;
    try {
      await this.client.setMode("MANUAL");
      this.snapshot = await this.client.setAppliance(prompt.applianceId, prompt.desired);
      this.connection = "ok";
    } catch (err) {
      this.handleFailure(err);
    } finally {
      this.notify();
    }
  }

  dismissPrompt(): void {
    this.prompt = null;
    this.notify();
  }

  private handleFailure(err: unknown): void {
    if (err instanceof ApiError && err.status === 401) {
      // session gone: drop to the login screen
      this.stopPolling();
      this.client.clearSession();
      this.connection = "unauthorized";
      this.snapshot = null;
    } else if (err instanceof ApiError) {
      this.lastError = `${err.code}: ${err.message}`;
    } else {
      // network failure: keep showing the last data, flag it as stale
      this.connection = "stale";
    }
  }
}
