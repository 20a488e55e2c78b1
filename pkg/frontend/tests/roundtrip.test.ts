// Live round trip against the real gateway replaying a fixture trace at 60x.
// Requires the Python package to be installed (pip install -e .).

import { ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { GatewayClient } from "../src/api.js";
import { DashboardViewModel } from "../src/viewmodel.js";

const POLL_MS = 500;
const SPEED = 60;

// count changes due at 4 s, 8 s, 12 s, 16 s of wall time at 60x
const TRACE = [
  { t_ms: 240_000, sensor: "IR1" },
  { t_ms: 241_200, sensor: "IR2" }, // IN  -> 1
  { t_ms: 480_000, sensor: "IR1" },
  { t_ms: 481_200, sensor: "IR2" }, // IN  -> 2
  { t_ms: 720_000, sensor: "IR2" },
  { t_ms: 721_200, sensor: "IR1" }, // OUT -> 1
  { t_ms: 960_000, sensor: "IR2" },
  { t_ms: 961_200, sensor: "IR1" }, // OUT -> 0
];

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const server = createServer();
    server.listen(0, "127.0.0.1", () => {
      const address = server.address();
      if (address && typeof address === "object") {
        const port = address.port;
        server.close(() => resolve(port));
      } else {
        reject(new Error("no port"));
      }
    });
  });
}

async function waitFor(pred: () => Promise<boolean> | boolean, timeoutMs: number) {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (await pred()) return;
    await new Promise((r) => setTimeout(r, 100));
  }
  throw new Error("condition not met in time");
}

let proc: ChildProcess;
let base: string;

beforeAll(async () => {
  const dir = mkdtempSync(join(tmpdir(), "apcs-dash-"));
  const tracePath = join(dir, "trace.jsonl");
  writeFileSync(tracePath, TRACE.map((e) => JSON.stringify(e)).join("\n") + "\n");

  const port = await freePort();
  base = `http://127.0.0.1:${port}`;
  proc = spawn(
    "python3",
    [
      "-m", "apcs.cli", "serve",
      "--port", String(port),
      "--feed", tracePath,
      "--speed", String(SPEED),
      "--interval", "0",
    ],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  await waitFor(async () => {
    try {
      const resp = await fetch(`${base}/login`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ user: "admin", password: "secret" }),
      });
      return resp.status === 200;
    } catch {
      return false;
    }
  }, 20_000);
}, 30_000);

afterAll(() => {
  proc?.kill("SIGTERM");
});

describe("dashboard against a live gateway at 60x", () => {
  it(
    "reflects every count change within two polling intervals, toggles one appliance in MANUAL, and prompts on AUTO",
    async () => {
      const vm = new DashboardViewModel(new GatewayClient(base), {
        pollIntervalMs: POLL_MS,
      });
      expect(await vm.login("admin", "secret")).toBe(true);

      const observed: { count: number; at: number }[] = [];
      vm.subscribe(() => {
        const count = vm.snapshot?.count;
        if (count !== undefined && count !== observed[observed.length - 1]?.count) {
          observed.push({ count, at: Date.now() });
        }
      });
      vm.startPolling();

      // trace drives 0 -> 1 -> 2 -> 1 -> 0; every step must be seen
      await waitFor(
        () => observed.map((o) => o.count).join(",").endsWith("1,2,1,0"),
        30_000,
      );
      vm.stopPolling();

      const counts = observed.map((o) => o.count);
      expect(counts.slice(-4)).toEqual([1, 2, 1, 0]);

      // consecutive changes are 4 s of wall time apart at 60x; each must be
      // picked up within two polling intervals of cadence jitter
      const changes = observed.slice(-4);
      for (let i = 1; i < changes.length; i++) {
        const gap = changes[i].at - changes[i - 1].at;
        expect(Math.abs(gap - 4000)).toBeLessThanOrEqual(2 * POLL_MS + 500);
      }

      // room is empty now: AUTO keeps everything off; a toggle must prompt
      await vm.refresh();
      expect(vm.snapshot!.mode).toBe("AUTO");
      const before = JSON.stringify(vm.snapshot!.appliances);
      await vm.toggleAppliance(2);
      expect(vm.prompt).toEqual({ applianceId: 2, desired: "ON" });
      await vm.refresh();
      expect(JSON.stringify(vm.snapshot!.appliances)).toBe(before);
      vm.dismissPrompt();

      // switching to MANUAL and toggling flips exactly that appliance
      await vm.setMode("MANUAL");
      await vm.toggleAppliance(2);
      const states = vm.snapshot!.appliances.map((a) => a.state);
      expect(states.filter((s) => s === "ON")).toHaveLength(1);
      expect(vm.snapshot!.appliances.find((a) => a.id === 2)?.state).toBe("ON");
      expect(vm.snapshot!.lights_on).toBe(1);
      expect(vm.snapshot!.fans_on).toBe(0);
    },
    60_000,
  );
});
