// Thin fetch client for the game API. One request at a time per session:
// calls are chained on a promise queue so the UI can't race the server.

import type {
  AskResponse,
  AttemptResponse,
  ApiErrorBody,
  Catalog,
  EvalQuestionWire,
  SceneLayout,
  SessionView,
  TrustReportWire,
} from "./types";

export class ApiError extends Error {
  code: string;
  status: number;

  constructor(status: number, body: ApiErrorBody) {
    super(body.message || body.code);
    this.code = body.code;
    this.status = status;
  }
}

export class GameClient {
  private base: string;
  private queue: Promise<unknown> = Promise.resolve();

  constructor(base = "") {
    this.base = base.replace(/\/$/, "");
  }

  private request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const run = async (): Promise<T> => {
      const res = await fetch(`${this.base}${path}`, {
        method,
        headers: body !== undefined ? { "Content-Type": "application/json" } : undefined,
        body: body !== undefined ? JSON.stringify(body) : undefined,
      });
      const payload = await res.json();
      if (!res.ok) {
        throw new ApiError(res.status, payload as ApiErrorBody);
      }
      return payload as T;
    };
    const next = this.queue.then(run, run);
    this.queue = next.catch(() => undefined); // keep the chain alive after errors
    return next;
  }

  createSession(scene: string, task: string, seed = 0): Promise<SessionView> {
    return this.request("POST", "/sessions", { scene, task, seed, mode: "human" });
  }

  getSession(id: string): Promise<SessionView> {
    return this.request("GET", `/sessions/${id}`);
  }

  catalog(task: string): Promise<Catalog> {
    return this.request("GET", `/catalog/${task}`);
  }

  sceneLayout(sceneId: string): Promise<SceneLayout> {
    return this.request("GET", `/scenes/${sceneId}/layout`);
  }

  ask(sessionId: string, questionId: string): Promise<AskResponse> {
    return this.request("POST", `/sessions/${sessionId}/ask`, { question_id: questionId });
  }

  attempt(
    sessionId: string,
    answer: string,
    cf: number,
    sf: number,
    responseTimeMs: number,
  ): Promise<AttemptResponse> {
    return this.request("POST", `/sessions/${sessionId}/attempt`, {
      answer,
      cf,
      sf,
      response_time_ms: Math.round(responseTimeMs),
    });
  }

  phase2Questions(sessionId: string): Promise<{ questions: EvalQuestionWire[] }> {
    return this.request("GET", `/sessions/${sessionId}/phase2/questions`);
  }

  phase2Answers(
    sessionId: string,
    answers: [string, string][],
  ): Promise<{ report: TrustReportWire }> {
    return this.request("POST", `/sessions/${sessionId}/phase2/answers`, { answers });
  }

  satisfaction(sessionId: string, ratings: Record<string, number>): Promise<unknown> {
    return this.request("POST", `/sessions/${sessionId}/satisfaction`, ratings);
  }
}
