// Phase 2: predict what the machine detects (yes/no per part, influence
// choices per composite), then read the trust report and rate satisfaction
// on the 0-9 survey. All displayed numbers come from the server response.

import { ApiError, GameClient } from "./api";
import { LIKERT_SCALE, banner, makeSlider, sliderValue } from "./forms";
import { SURVEY_DIMENSIONS, type EvalQuestionWire, type TrustReportWire } from "./types";

export interface Phase2Elements {
  questionsRoot: HTMLElement;
  submitButton: HTMLButtonElement;
  reportRoot: HTMLElement;
  surveyRoot: HTMLElement;
  status: HTMLElement;
}

const REPORT_BARS: { key: keyof TrustReportWire & string; label: string }[] = [
  { key: "jpt", label: "Justified positive trust" },
  { key: "jnt", label: "Justified negative trust" },
  { key: "reliance", label: "Reliance" },
];

export class Phase2Flow {
  private questions: EvalQuestionWire[] = [];

  constructor(
    private client: GameClient,
    private sessionId: string,
    private el: Phase2Elements,
  ) {}

  async mount(doc: Document) {
    const res = await this.client.phase2Questions(this.sessionId);
    this.questions = res.questions;
    this.el.questionsRoot.innerHTML = "";
    for (const q of this.questions) {
      this.el.questionsRoot.append(this.renderQuestion(doc, q));
    }
  }

  private renderQuestion(doc: Document, q: EvalQuestionWire): HTMLElement {
    const row = doc.createElement("fieldset");
    row.className = `eval-question eval-${q.kind}`;
    row.dataset.questionId = q.id;
    const legend = doc.createElement("legend");
    legend.textContent = q.text || q.id;
    row.append(legend);
    for (const choice of q.choices) {
      const label = doc.createElement("label");
      const input = doc.createElement("input");
      input.type = "radio";
      input.name = q.id;
      input.value = choice;
      label.append(input, doc.createTextNode(` ${choice}`));
      row.append(label);
    }
    return row;
  }

  collectAnswers(): [string, string][] {
    const answers: [string, string][] = [];
    for (const q of this.questions) {
      const checked = this.el.questionsRoot.querySelector<HTMLInputElement>(
        `input[name="${q.id}"]:checked`,
      );
      if (checked) {
        answers.push([q.id, checked.value]);
      }
    }
    return answers;
  }

  async submit(doc: Document): Promise<TrustReportWire | null> {
    try {
      const res = await this.client.phase2Answers(this.sessionId, this.collectAnswers());
      this.renderReport(doc, res.report);
      this.renderSurvey(doc);
      return res.report;
    } catch (err) {
      if (err instanceof ApiError && err.code === "CONFLICTING_ANSWER") {
        banner(doc, this.el.status, `conflicting answers: ${err.message}`);
      } else if (err instanceof ApiError) {
        banner(doc, this.el.status, `${err.code}: ${err.message}`);
      } else {
        banner(doc, this.el.status, String(err));
      }
      return null;
    }
  }

  renderReport(doc: Document, report: TrustReportWire) {
    const root = this.el.reportRoot;
    root.innerHTML = "";
    const heading = doc.createElement("h3");
    heading.textContent = `your model of the machine (${report.n_games} game)`;
    root.append(heading);
    // bars in the fixed order: JPT, JNT, Reliance; each metric tops out at 3
    for (const { key, label } of REPORT_BARS) {
      const value = report[key] as number;
      const row = doc.createElement("div");
      row.className = "report-bar-row";
      row.dataset.metric = key;
      const name = doc.createElement("span");
      name.className = "report-label";
      name.textContent = label;
      const bar = doc.createElement("div");
      bar.className = "report-bar";
      const fill = doc.createElement("div");
      fill.className = "report-bar-fill";
      fill.style.width = `${Math.min(100, (value / 3) * 100).toFixed(1)}%`;
      bar.append(fill);
      const num = doc.createElement("span");
      num.className = "report-value";
      num.textContent = value.toFixed(4);
      row.append(name, bar, num);
      root.append(row);
    }
  }

  renderSurvey(doc: Document) {
    const root = this.el.surveyRoot;
    root.innerHTML = "";
    const heading = doc.createElement("h3");
    heading.textContent = "how satisfying were the explanations? (0-9)";
    root.append(heading);
    for (const dim of SURVEY_DIMENSIONS) {
      root.append(makeSlider(doc, `survey-${dim}`, dim, LIKERT_SCALE, 5));
    }
    const submit = doc.createElement("button");
    submit.id = "survey-submit";
    submit.textContent = "submit survey";
    submit.addEventListener("click", () => void this.submitSurvey(doc));
    root.append(submit);
  }

  async submitSurvey(doc: Document): Promise<Record<string, number> | null> {
    const ratings: Record<string, number> = {};
    for (const dim of SURVEY_DIMENSIONS) {
      ratings[dim] = sliderValue(this.el.surveyRoot, `survey-${dim}`, LIKERT_SCALE);
    }
    try {
      await this.client.satisfaction(this.sessionId, ratings);
      banner(doc, this.el.status, "thanks, survey recorded", "ok");
      return ratings;
    } catch (err) {
      banner(doc, this.el.status, String(err));
      return null;
    }
  }
}
