// Phase 1: ask questions from the catalog, watch the bubble reveal, then
// answer with confidence and satisfaction. Response time per question is
// measured from bubble render to attempt submit and sent with the attempt.

import { ApiError, GameClient } from "./api";
import { renderBlurAndBubbles, SceneSource } from "./blur";
import { CF_SF_SCALE, banner, makeSlider, sliderValue } from "./forms";
import type { BubbleWire, Catalog, SessionView } from "./types";

export interface Phase1Elements {
  canvas: HTMLCanvasElement;
  questionSelect: HTMLSelectElement;
  askButton: HTMLButtonElement;
  bubbleLog: HTMLElement;
  attemptForm: HTMLElement;
  status: HTMLElement;
}

export interface Phase1Result {
  transitioned: boolean;
  lastResponse: { ss: number; reward: number };
}

export function describeBubble(b: BubbleWire): string {
  return (
    `${b.attention} via ${b.act} ` +
    `(space ${b.sigma1}, scale ${b.sigma2}, ${b.discourse}, ` +
    `content ${b.content.toFixed(3)} nats)`
  );
}

export class Phase1Flow {
  private bubbles: BubbleWire[] = [];
  private lastBubbleShownAt = 0;
  private now: () => number;

  constructor(
    private client: GameClient,
    private session: SessionView,
    private catalog: Catalog,
    private scene: SceneSource,
    private el: Phase1Elements,
    now?: () => number,
  ) {
    this.bubbles = [...session.bubbles];
    this.now = now ?? (() => performance.now());
  }

  mount(doc: Document) {
    this.el.questionSelect.innerHTML = "";
    for (const q of this.catalog.questions) {
      const opt = doc.createElement("option");
      opt.value = q.id;
      opt.textContent = q.critical ? `${q.text} *` : q.text;
      this.el.questionSelect.append(opt);
    }
    this.buildAttemptForm(doc);
    this.redraw();
    this.updateStatus(this.session.phase, this.session.turn);
  }

  private buildAttemptForm(doc: Document) {
    const form = this.el.attemptForm;
    form.innerHTML = "";
    const label = doc.createElement("label");
    label.textContent = "your answer:";
    const select = doc.createElement("select");
    select.id = "answer-select";
    for (const answer of this.session.task_labels) {
      const opt = doc.createElement("option");
      opt.value = answer;
      opt.textContent = answer;
      select.append(opt);
    }
    form.append(label, select);
    form.append(makeSlider(doc, "cf-slider", "confidence (1-5)", CF_SF_SCALE, 3));
    form.append(makeSlider(doc, "sf-slider", "satisfaction (1-5)", CF_SF_SCALE, 3));
    const submit = doc.createElement("button");
    submit.id = "attempt-submit";
    submit.textContent = "solve the task";
    form.append(submit);
  }

  redraw() {
    renderBlurAndBubbles(this.el.canvas, this.scene, this.bubbles);
  }

  private updateStatus(phase: string, turn: number) {
    this.el.status.textContent = `phase: ${phase} | turn: ${turn}`;
    const done = phase !== "phase1";
    this.el.askButton.disabled = done;
    const submit = this.el.attemptForm.querySelector<HTMLButtonElement>("#attempt-submit");
    if (submit) submit.disabled = done;
  }

  async ask(doc: Document): Promise<BubbleWire | null> {
    const questionId = this.el.questionSelect.value;
    if (!questionId) return null;
    try {
      const res = await this.client.ask(this.session.session, questionId);
      this.bubbles.push(res.bubble);
      this.redraw();
      const row = doc.createElement("li");
      row.className = "bubble-row";
      row.textContent = `turn ${res.turn}: ${describeBubble(res.bubble)}`;
      this.el.bubbleLog.append(row);
      this.lastBubbleShownAt = this.now();
      this.updateStatus(res.phase, res.turn);
      return res.bubble;
    } catch (err) {
      this.handleError(doc, err);
      return null;
    }
  }

  async attempt(doc: Document): Promise<Phase1Result | null> {
    const answer = (this.el.attemptForm.querySelector<HTMLSelectElement>("#answer-select") || {
      value: "",
    }).value;
    const cf = sliderValue(this.el.attemptForm, "cf-slider", CF_SF_SCALE);
    const sf = sliderValue(this.el.attemptForm, "sf-slider", CF_SF_SCALE);
    const elapsed = this.lastBubbleShownAt ? this.now() - this.lastBubbleShownAt : 0;
    try {
      const res = await this.client.attempt(this.session.session, answer, cf, sf, elapsed);
      this.updateStatus(res.phase, res.turn);
      const note = doc.createElement("li");
      note.className = "attempt-row";
      note.textContent =
        res.ss === 1
          ? `correct! reward ${res.reward.toFixed(4)}`
          : `not yet (reward ${res.reward.toFixed(4)}), keep asking`;
      this.el.bubbleLog.append(note);
      return { transitioned: res.transitioned, lastResponse: { ss: res.ss, reward: res.reward } };
    } catch (err) {
      this.handleError(doc, err);
      return null;
    }
  }

  private handleError(doc: Document, err: unknown) {
    if (err instanceof ApiError) {
      banner(doc, this.el.status, `${err.code}: ${err.message}`);
      if (err.code === "WRONG_PHASE") {
        this.el.askButton.disabled = true;
      }
    } else {
      banner(doc, this.el.status, String(err));
    }
  }
}
