// DOM wiring: renders the view model and forwards clicks to it.

import { GatewayClient } from "./api.js";
import { renderCountChart } from "./chart.js";
import { DashboardViewModel } from "./viewmodel.js";

const client = new GatewayClient("");
const vm = new DashboardViewModel(client);

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const loginView = el<HTMLDivElement>("login-view");
const dashView = el<HTMLDivElement>("dashboard-view");
const loginError = el<HTMLDivElement>("login-error");
const banner = el<HTMLDivElement>("banner");
const countEl = el<HTMLDivElement>("count");
const modeEl = el<HTMLSpanElement>("mode");
const tallyEl = el<HTMLSpanElement>("tally");
const grid = el<HTMLDivElement>("appliance-grid");
const chartEl = el<HTMLDivElement>("chart");
const promptEl = el<HTMLDivElement>("prompt");

el<HTMLFormElement>("login-form").addEventListener("submit", async (ev) => {
  ev.preventDefault();
  const user = el<HTMLInputElement>("user").value;
  const password = el<HTMLInputElement>("password").value;
  if (await vm.login(user, password)) {
    vm.startPolling();
  }
});

el<HTMLButtonElement>("mode-auto").addEventListener("click", () => void vm.setMode("AUTO"));
el<HTMLButtonElement>("mode-manual").addEventListener("click", () => void vm.setMode("MANUAL"));
el<HTMLButtonElement>("logout").addEventListener("click", () => vm.logout());
el<HTMLButtonElement>("prompt-accept").addEventListener("click", () => void vm.acceptPrompt());
el<HTMLButtonElement>("prompt-dismiss").addEventListener("click", () => vm.dismissPrompt());

grid.addEventListener("click", (ev) => {
  const button = (ev.target as HTMLElement).closest<HTMLButtonElement>("button[data-id]");
  if (button) void vm.toggleAppliance(Number(button.dataset.id));
});

function render(): void {
  const snap = vm.snapshot;
  const showDashboard = vm.loggedIn || snap !== null;
  loginView.hidden = showDashboard;
  dashView.hidden = !showDashboard;
  loginError.textContent = vm.lastError ?? "";

  if (vm.connection === "unauthorized") {
    loginView.hidden = false;
    dashView.hidden = true;
    loginError.textContent = "session expired, please log in again";
    return;
  }

  banner.hidden = vm.connection !== "stale";
  if (!snap) return;

  countEl.textContent = String(snap.count);
  modeEl.textContent = snap.mode;
  tallyEl.textContent = `${snap.lights_on} lights, ${snap.fans_on} fans on`;

  grid.innerHTML = snap.appliances
    .map((a) => {
      const pending = vm.isPending(`appliance:${a.id}`) ? " pending" : "";
      const on = a.state === "ON" ? " on" : "";
      return (
        `<button data-id="${a.id}" class="appliance${on}${pending}">` +
        `<span class="kind">${a.kind === "LIGHT" ? "Light" : "Fan"} ${a.id}</span>` +
        `<span class="state">${a.state}</span></button>`
      );
    })
    .join("");

  chartEl.innerHTML = renderCountChart(vm.feed);

  promptEl.hidden = vm.prompt === null;
  if (vm.prompt) {
    el<HTMLSpanElement>("prompt-text").textContent =
      `The system is in AUTO mode; switch to MANUAL to set appliance ` +
      `${vm.prompt.applianceId} ${vm.prompt.desired}?`;
  }
}

vm.subscribe(render);
render();
