// Canvas compositing: the scene drawn blurred, with each bubble re-drawn
// sharper inside its clipped circle. The server never ships pre-blurred
// rasters; all softening happens here from one base image.

import { BASE_BLUR_PX, blurFilter, regionToPixels, revealBlurPx } from "./geometry";
import type { BubbleWire, SceneLayout } from "./types";

export type SceneSource =
  | { kind: "image"; image: CanvasImageSource }
  | { kind: "layout"; layout: SceneLayout };

const PART_FILL = "#7a9e7e";
const PART_STROKE = "#33502f";

function drawScene(ctx: CanvasRenderingContext2D, source: SceneSource, size: number) {
  if (source.kind === "image") {
    ctx.drawImage(source.image, 0, 0, size, size);
    return;
  }
  // synthetic scene: the annotated parts as soft discs
  ctx.fillStyle = "#e8e3d6";
  ctx.fillRect(0, 0, size, size);
  for (const [name, region] of Object.entries(source.layout.parts)) {
    const c = regionToPixels(region, size);
    ctx.beginPath();
    ctx.arc(c.x, c.y, c.radius, 0, Math.PI * 2);
    ctx.fillStyle = PART_FILL;
    ctx.fill();
    ctx.strokeStyle = PART_STROKE;
    ctx.lineWidth = Math.max(1, size / 256);
    ctx.stroke();
    ctx.fillStyle = "#1c2a1a";
    ctx.font = `${Math.max(9, size / 48)}px sans-serif`;
    ctx.textAlign = "center";
    ctx.fillText(name, c.x, c.y + 3);
  }
}

export function renderBlurAndBubbles(
  canvas: HTMLCanvasElement,
  source: SceneSource,
  bubbles: BubbleWire[],
): void {
  const size = canvas.width;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;

  ctx.save();
  ctx.clearRect(0, 0, size, size);
  ctx.filter = blurFilter((BASE_BLUR_PX * size) / 512);
  drawScene(ctx, source, size);
  ctx.restore();

  for (const bubble of bubbles) {
    const circle = regionToPixels(bubble.region, size);
    ctx.save();
    ctx.beginPath();
    ctx.arc(circle.x, circle.y, circle.radius, 0, Math.PI * 2);
    ctx.clip();
    ctx.filter = blurFilter(revealBlurPx(bubble.sigma2, size));
    drawScene(ctx, source, size);
    ctx.restore();

    ctx.save();
    ctx.beginPath();
    ctx.arc(circle.x, circle.y, circle.radius, 0, Math.PI * 2);
    ctx.strokeStyle = "rgba(214, 168, 32, 0.9)";
    ctx.lineWidth = Math.max(1.5, size / 256);
    ctx.stroke();
    ctx.restore();
  }
}
