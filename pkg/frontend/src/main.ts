/** Page wiring: pad events -> session transitions -> rendered view. */

import { RecognizerClient } from "./client.js";
import { makeIdleTrigger } from "./idle.js";
import { attachPad } from "./pad.js";
import {
  addStroke,
  applyFailure,
  applyResponse,
  beginRecognition,
  clearSession,
  emptySession,
  undoStroke,
  viewState,
} from "./session.js";
import type { PadSession } from "./session.js";
import type { Stroke } from "./wire.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) {
    throw new Error(`missing element #${id}`);
  }
  return el as T;
}

const canvas = byId<HTMLCanvasElement>("pad");
const bestEl = byId<HTMLElement>("best");
const candidatesEl = byId<HTMLOListElement>("candidates");
const segmentsEl = byId<HTMLElement>("segments");
const bannerEl = byId<HTMLElement>("banner");
const statusEl = byId<HTMLElement>("status");
const recognizeBtn = byId<HTMLButtonElement>("recognize");
const undoBtn = byId<HTMLButtonElement>("undo");
const clearBtn = byId<HTMLButtonElement>("clear");

const client = new RecognizerClient("");
let session: PadSession = emptySession();

function render(): void {
  const view = viewState(session);
  bannerEl.textContent = view.banner ?? "";
  bannerEl.hidden = view.banner === null;
  bestEl.textContent = view.latex;
  statusEl.textContent = view.busy
    ? "recognizing…"
    : view.timingMs !== null
      ? `${view.strokeCount} strokes · ${view.timingMs.toFixed(0)} ms`
      : `${view.strokeCount} strokes`;

  candidatesEl.replaceChildren(
    ...view.candidates.map((c) => {
      const li = document.createElement("li");
      const code = document.createElement("code");
      code.textContent = c.latex;
      const prob = document.createElement("span");
      prob.className = "prob";
      prob.textContent = c.probability.toExponential(2);
      li.append(code, prob);
      return li;
    }),
  );

  if (view.fallbackSegments.length > 0) {
    segmentsEl.hidden = false;
    segmentsEl.textContent =
      "no parse; symbols seen: " + view.fallbackSegments.map((s) => s.label).join(" ");
  } else {
    segmentsEl.hidden = true;
    segmentsEl.textContent = "";
  }

  undoBtn.disabled = view.strokeCount === 0;
  clearBtn.disabled = view.strokeCount === 0;
  recognizeBtn.disabled = view.strokeCount === 0 || view.busy;
}

async function recognizeNow(): Promise<void> {
  if (session.strokes.length === 0) {
    return;
  }
  const begun = beginRecognition(session);
  session = begun.session;
  render();
  try {
    const response = await client.recognize(session.strokes, session.settings.topk);
    session = applyResponse(session, begun.seq, response);
  } catch (err) {
    session = applyFailure(session, begun.seq, err instanceof Error ? err.message : String(err));
  }
  render();
}

const idle = makeIdleTrigger(session.settings.autoDelayMs, () => {
  void recognizeNow();
});

const pad = attachPad(
  canvas,
  (stroke: Stroke) => {
    session = addStroke(session, stroke);
    render();
    idle.poke();
  },
  () => idle.poke(),
);

recognizeBtn.addEventListener("click", () => {
  idle.cancel();
  void recognizeNow();
});

undoBtn.addEventListener("click", () => {
  idle.cancel();
  session = undoStroke(session);
  pad.redraw(session.strokes);
  render();
  if (session.strokes.length > 0) {
    void recognizeNow();
  }
});

clearBtn.addEventListener("click", () => {
  idle.cancel();
  session = clearSession(session);
  pad.redraw(session.strokes);
  render();
});

render();

void client
  .health()
  .then((h) => {
    statusEl.textContent = `model ${h.model_version}`;
  })
  .catch(() => {
    bannerEl.hidden = false;
    bannerEl.textContent = "service unreachable; strokes will be kept until it returns";
  });
