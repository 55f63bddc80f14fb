// Entry point: wire the session picker, run phase 1 until the server says
// the task is solved (or the budget runs out), then hand over to phase 2.

import { GameClient } from "./api";
import type { SceneSource } from "./blur";
import { banner } from "./forms";
import { Phase1Flow, Phase1Elements } from "./phase1";
import { Phase2Flow, Phase2Elements } from "./phase2";

const CANVAS_SIZE = 512;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

async function sceneSource(client: GameClient, sceneId: string): Promise<SceneSource> {
  // prefer the raster; scenes without one render synthetically from layout
  try {
    const img = new Image();
    img.src = `/scenes/${sceneId}/image`;
    await img.decode();
    return { kind: "image", image: img };
  } catch {
    const layout = await client.sceneLayout(sceneId);
    return { kind: "layout", layout };
  }
}

async function start() {
  const client = new GameClient("");
  const sceneInput = el<HTMLInputElement>("scene-input");
  const taskInput = el<HTMLInputElement>("task-input");
  const startButton = el<HTMLButtonElement>("start-button");
  const status = el<HTMLElement>("status");

  startButton.addEventListener("click", async () => {
    try {
      const session = await client.createSession(sceneInput.value, taskInput.value);
      const catalog = await client.catalog(session.task);
      const scene = await sceneSource(client, session.scene);
      el<HTMLElement>("setup").hidden = true;
      el<HTMLElement>("phase1").hidden = false;

      const canvas = el<HTMLCanvasElement>("scene-canvas");
      canvas.width = CANVAS_SIZE;
      canvas.height = CANVAS_SIZE;
      const p1els: Phase1Elements = {
        canvas,
        questionSelect: el<HTMLSelectElement>("question-select"),
        askButton: el<HTMLButtonElement>("ask-button"),
        bubbleLog: el<HTMLElement>("bubble-log"),
        attemptForm: el<HTMLElement>("attempt-form"),
        status,
      };
      const phase1 = new Phase1Flow(client, session, catalog, scene, p1els);
      phase1.mount(document);

      p1els.askButton.addEventListener("click", () => void phase1.ask(document));
      p1els.attemptForm.addEventListener("click", async (event) => {
        const target = event.target as HTMLElement;
        if (target.id !== "attempt-submit") return;
        event.preventDefault();
        const result = await phase1.attempt(document);
        if (result?.transitioned) {
          el<HTMLElement>("phase2").hidden = false;
          const p2els: Phase2Elements = {
            questionsRoot: el<HTMLElement>("eval-questions"),
            submitButton: el<HTMLButtonElement>("phase2-submit"),
            reportRoot: el<HTMLElement>("trust-report"),
            surveyRoot: el<HTMLElement>("survey"),
            status,
          };
          const phase2 = new Phase2Flow(client, session.session, p2els);
          await phase2.mount(document);
          p2els.submitButton.addEventListener("click", () => void phase2.submit(document));
        }
      });
    } catch (err) {
      banner(document, status, String(err));
    }
  });
}

void start();
