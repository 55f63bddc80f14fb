// Wire types, mirroring the server's JSON exactly. The client never derives
// game values itself: everything rendered comes from these payloads.

export interface RegionWire {
  cx: number;
  cy: number;
  r: number;
}

export interface BubbleWire {
  attention: string;
  act: "alpha" | "beta" | "gamma";
  sigma1: number;
  sigma2: number;
  discourse: string;
  content: number;
  region: RegionWire;
}

export interface SessionView {
  session: string;
  phase: "phase1" | "phase2" | "done";
  turn: number;
  scene: string;
  task: string;
  mode: string;
  task_labels: string[];
  bubbles: BubbleWire[];
  questions_asked: string[];
  succeeded: boolean;
  report?: TrustReportWire;
}

export interface AskResponse {
  phase: string;
  turn: number;
  bubble: BubbleWire;
}

export interface AttemptResponse {
  phase: string;
  turn: number;
  ss: 1 | -1;
  reward: number;
  transitioned: boolean;
}

export interface CatalogQuestion {
  id: string;
  text: string;
  subject: string;
  critical: boolean;
}

export interface Catalog {
  task: string;
  labels: string[];
  questions: CatalogQuestion[];
}

export interface EvalQuestionWire {
  id: string;
  kind: "detect_success" | "influence";
  subject: string;
  process: string;
  choices: string[];
  text: string;
}

export interface TrustReportWire {
  jpt: number;
  jnt: number;
  reliance: number;
  per_process: Record<string, { jpt: number; jnt: number; reliance: number }>;
  n_games: number;
  satisfaction: Record<string, unknown>[];
}

export interface SceneLayout {
  scene: string;
  parts: Record<string, RegionWire>;
}

export interface ApiErrorBody {
  code: string;
  message: string;
}

export const SURVEY_DIMENSIONS = [
  "usefulness",
  "sufficiency",
  "detail",
  "confidence",
  "understandability",
  "accuracy",
  "consistency",
] as const;

export type SurveyDimension = (typeof SURVEY_DIMENSIONS)[number];
