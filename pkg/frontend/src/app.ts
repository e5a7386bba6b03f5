/**
 * DOM glue: login, side-by-side pair display, single-keystroke judging.
 *
 * Keys: y = equivalent, n = not equivalent, s = skip.  Failed submissions
 * keep the current pair on screen and show a retry prompt; nothing
 * advances until the server acknowledges.
 */

import { ApiClient } from "./api.js";
import { AnnotationSession } from "./session.js";

const api = new ApiClient("");
let session: AnnotationSession | null = null;
let busy = false;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setStatus(text: string, isError = false): void {
  const status = el<HTMLElement>("status");
  status.textContent = text;
  status.className = isError ? "status error" : "status";
}

function renderProgress(): void {
  if (!session) return;
  const view = session.view;
  el<HTMLElement>("progress-text").textContent = `${view.judgedCount} / ${view.total} judged`;
  const percent = view.total === 0 ? 0 : (100 * view.judgedCount) / view.total;
  el<HTMLElement>("progress-fill").style.width = `${percent}%`;
}

function renderCurrent(): void {
  if (!session) return;
  const current = session.current();
  const pairPanel = el<HTMLElement>("pair-panel");
  const donePanel = el<HTMLElement>("done-panel");
  if (current === null) {
    pairPanel.hidden = true;
    donePanel.hidden = false;
    return;
  }
  pairPanel.hidden = false;
  donePanel.hidden = true;
  // Verbatim text: annotators must judge true surface forms.
  el<HTMLElement>("original-text").textContent = current.h;
  el<HTMLElement>("variant-text").textContent = current.h_prime;
  el<HTMLElement>("task-label").textContent = current.task_id;
}

async function refreshAgreement(): Promise<void> {
  try {
    const agreement = await api.fetchAgreement();
    const panel = el<HTMLElement>("agreement-panel");
    if (agreement.kappa === null || agreement.percent_agreement === null) {
      panel.hidden = true;
      return;
    }
    panel.hidden = false;
    el<HTMLElement>("agreement-text").textContent =
      `${agreement.percent_agreement.toFixed(1)}% raw agreement, ` +
      `kappa ${agreement.kappa.toFixed(4)} over ${agreement.n} shared tasks`;
  } catch {
    // Agreement is informational; never block judging on it.
  }
}

async function judge(equivalent: boolean): Promise<void> {
  if (!session || busy) return;
  const current = session.current();
  if (!current) return;
  busy = true;
  setStatus("saving…");
  try {
    await api.submitJudgment({
      task_id: current.task_id,
      annotator: session.annotator,
      equivalent,
    });
    session.markJudged(current.task_id);
    setStatus("");
    renderProgress();
    renderCurrent();
    void refreshAgreement();
  } catch (error) {
    setStatus(`could not save (${String(error)}) — press y/n to retry`, true);
  } finally {
    busy = false;
  }
}

function skip(): void {
  if (!session || busy) return;
  session.skip();
  renderCurrent();
}

async function start(): Promise<void> {
  const annotator = el<HTMLInputElement>("annotator-input").value.trim();
  if (!annotator) {
    setStatus("enter an annotator id first", true);
    return;
  }
  try {
    const tasks = await api.fetchTasks(annotator);
    session = new AnnotationSession(annotator, tasks);
  } catch (error) {
    setStatus(`cannot load tasks: ${String(error)}`, true);
    return;
  }
  el<HTMLElement>("login-panel").hidden = true;
  el<HTMLElement>("work-panel").hidden = false;
  el<HTMLElement>("annotator-label").textContent = session.annotator;
  setStatus("");
  renderProgress();
  renderCurrent();
  void refreshAgreement();
}

function onKey(event: KeyboardEvent): void {
  if (!session) return;
  if (event.key === "y") void judge(true);
  else if (event.key === "n") void judge(false);
  else if (event.key === "s") skip();
}

export function wireUp(): void {
  el<HTMLButtonElement>("start-button").addEventListener("click", () => void start());
  el<HTMLInputElement>("annotator-input").addEventListener("keydown", (event) => {
    if (event.key === "Enter") void start();
  });
  el<HTMLButtonElement>("yes-button").addEventListener("click", () => void judge(true));
  el<HTMLButtonElement>("no-button").addEventListener("click", () => void judge(false));
  el<HTMLButtonElement>("skip-button").addEventListener("click", () => skip());
  document.addEventListener("keydown", onKey);
}

if (typeof document !== "undefined" && document.getElementById("start-button")) {
  wireUp();
}
