import { Api, HttpError } from "./api";
import { buildScene, renderScene, worldTransform } from "./map";
import { PanelState } from "./state";

const state = new PanelState();
const api = new Api("");

const canvas = document.getElementById("map") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const modeEl = document.getElementById("mode")!;
const synthEl = document.getElementById("synth")!;
const diagEl = document.getElementById("diagnostics")!;
const toastEl = document.getElementById("toast")!;
const bannerEl = document.getElementById("banner")!;
const boundEl = document.getElementById("bound")!;
const updateText = document.getElementById("update-text") as HTMLTextAreaElement;
const submitBtn = document.getElementById("submit-update") as HTMLButtonElement;
const hotswapBtn = document.getElementById("hotswap") as HTMLButtonElement;

function render(): void {
  if (!state.snapshot) {
    return;
  }
  const s = state.snapshot;
  modeEl.textContent = `${s.mode} · tick ${s.tick} · battery ${s.telemetry.battery}%`;
  synthEl.textContent = `update: ${state.synth.state}`;
  diagEl.textContent = state.synth.diagnostic ?? "";
  diagEl.classList.toggle("error", state.synth.state === "unrealizable");
  boundEl.textContent = "modules: " + s.bound.join(", ");
  hotswapBtn.disabled = !state.hotswapEnabled();
  toastEl.textContent = state.busyToast ?? "";
  toastEl.classList.toggle("visible", state.busyToast !== null);
  bannerEl.classList.toggle("visible", state.connectionLost);
  const tx = worldTransform(s.grid, canvas.width, canvas.height);
  renderScene(ctx, buildScene(s, state.trail), tx);
}

async function boot(): Promise<void> {
  state.applySnapshot(await api.getState());
  render();
  api.connect(
    (frame) => {
      state.applyFrame(frame);
      render();
    },
    () => {
      state.markDisconnected();
      render();
    },
  );
}

submitBtn.addEventListener("click", async () => {
  state.clearBusy();
  try {
    await api.submitUpdate(updateText.value, [], false);
    state.synth = { state: "queued" };
  } catch (e) {
    if (e instanceof HttpError && e.status === 409) {
      state.markBusy("Busy: an update is already in progress");
    } else if (e instanceof HttpError) {
      const body = e.body as { detail?: { message?: string } };
      state.synth = { state: "rejected", diagnostic: body.detail?.message };
    }
  }
  render();
});

hotswapBtn.addEventListener("click", async () => {
  try {
    await api.hotswap();
  } catch (e) {
    if (e instanceof HttpError && e.status === 409) {
      state.markBusy("Busy: no update is ready");
    }
  }
  render();
});

boot().catch(() => {
  state.markDisconnected();
  render();
});
