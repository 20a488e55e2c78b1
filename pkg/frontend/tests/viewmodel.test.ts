import { beforeEach, describe, expect, it } from "vitest";

import { GatewayClient } from "../src/api.js";
import { DashboardViewModel } from "../src/viewmodel.js";
import { FakeGateway } from "./fakes.js";

let fake: FakeGateway;
let vm: DashboardViewModel;

beforeEach(() => {
  fake = new FakeGateway();
  vm = new DashboardViewModel(new GatewayClient("http://fake", fake.fetch), {
    pollIntervalMs: 50,
  });
});

async function loggedIn() {
  expect(await vm.login("admin", "secret")).toBe(true);
}

describe("login", () => {
  it("stores the session in memory only", async () => {
    await loggedIn();
    expect(vm.loggedIn).toBe(true);
  });

  it("reports bad credentials without logging in", async () => {
    expect(await vm.login("admin", "wrong")).toBe(false);
    expect(vm.loggedIn).toBe(false);
    expect(vm.lastError).toBeTruthy();
  });
});

describe("polling", () => {
  it("refresh pulls the snapshot and the feed history", async () => {
    await loggedIn();
    fake.setCount(1);
    fake.setCount(2);
    expect(await vm.refresh()).toBe("ok");
    expect(vm.snapshot?.count).toBe(2);
    expect(vm.snapshot?.lights_on).toBe(4);
    expect(vm.feed.map((e) => e.field1)).toEqual(["1", "2"]);
    expect(vm.connection).toBe("ok");
  });

  it("skips a tick while the previous one is in flight", async () => {
    await loggedIn();
    fake.holdStatus();
    const first = vm.refresh();
    const second = await vm.refresh();
    expect(second).toBe("skipped");
    fake.releaseStatus();
    expect(await first).toBe("ok");
    const statusCalls = fake.requests.filter((r) => r === "GET /status");
    expect(statusCalls).toHaveLength(1);
  });

  it("drops to the login screen on a 401 mid-session", async () => {
    await loggedIn();
    await vm.refresh();
    fake.sessionExpired = true;
    expect(await vm.refresh()).toBe("failed");
    expect(vm.connection).toBe("unauthorized");
    expect(vm.loggedIn).toBe(false);
    expect(vm.snapshot).toBeNull();
  });

  it("flags stale data on a network failure but keeps the last snapshot", async () => {
    await loggedIn();
    fake.setCount(3);
    await vm.refresh();
    fake.networkDown = true;
    expect(await vm.refresh()).toBe("failed");
    expect(vm.connection).toBe("stale");
    expect(vm.snapshot?.count).toBe(3);
  });
});

describe("manual control", () => {
  it("toggle in MANUAL flips exactly one appliance after confirmation", async () => {
    await loggedIn();
    await vm.refresh();
    await vm.setMode("MANUAL");
    const before = vm.snapshot!.appliances.map((a) => a.state);
    await vm.toggleAppliance(3);
    const after = vm.snapshot!.appliances.map((a) => a.state);
    const changed = before
      .map((s, i) => (s !== after[i] ? vm.snapshot!.appliances[i].id : null))
      .filter((id) => id !== null);
    expect(changed).toEqual([3]);
    expect(vm.snapshot!.appliances.find((a) => a.id === 3)?.state).toBe("ON");
  });

  it("never applies a toggle optimistically", async () => {
    await loggedIn();
    await vm.refresh();
    await vm.setMode("MANUAL");
    let sawPendingWithOldState = false;
    const unsubscribe = vm.subscribe(() => {
      if (vm.isPending("appliance:2")) {
        sawPendingWithOldState =
          vm.snapshot!.appliances.find((a) => a.id === 2)?.state === "OFF";
      }
    });
    await vm.toggleAppliance(2);
    unsubscribe();
    expect(sawPendingWithOldState).toBe(true); // old state shown while pending
    expect(vm.snapshot!.appliances.find((a) => a.id === 2)?.state).toBe("ON");
  });

  it("toggle in AUTO surfaces the wrong-mode prompt without changing state", async () => {
    await loggedIn();
    fake.setCount(1);
    await vm.refresh();
    const before = vm.snapshot!;
    await vm.toggleAppliance(5);
    expect(vm.prompt).toEqual({ applianceId: 5, desired: "OFF" });
    expect(vm.snapshot).toEqual(before);
    vm.dismissPrompt();
    expect(vm.prompt).toBeNull();
  });

  it("accepting the prompt switches to MANUAL and applies the toggle", async () => {
    await loggedIn();
    fake.setCount(1);
    await vm.refresh();
    await vm.toggleAppliance(5);
    expect(vm.prompt).not.toBeNull();
    await vm.acceptPrompt();
    expect(vm.prompt).toBeNull();
    expect(vm.snapshot!.mode).toBe("MANUAL");
    expect(vm.snapshot!.appliances.find((a) => a.id === 5)?.state).toBe("OFF");
    expect(vm.snapshot!.fans_on).toBe(3);
  });

  it("switching back to AUTO with an empty room turns every toggle off", async () => {
    await loggedIn();
    await vm.refresh();
    await vm.setMode("MANUAL");
    await vm.toggleAppliance(1);
    expect(vm.snapshot!.lights_on).toBe(1);
    await vm.setMode("AUTO");
    expect(vm.snapshot!.appliances.every((a) => a.state === "OFF")).toBe(true);
  });
});
