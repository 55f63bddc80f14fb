// Pure geometry: normalized server regions to canvas pixels, and the
// unblur-level mapping. Kept free of canvas so the contract tests can pin
// the math headlessly.

import type { RegionWire } from "./types";

export interface PixelCircle {
  x: number;
  y: number;
  radius: number;
}

export function regionToPixels(region: RegionWire, canvasSize: number): PixelCircle {
  return {
    x: region.cx * canvasSize,
    y: region.cy * canvasSize,
    radius: region.r * canvasSize,
  };
}

// Display blur of the base image, in px at 512; scaled linearly with size.
export const BASE_BLUR_PX = 14;

// sigma2 drives how sharp the reveal inside a bubble is: 1 barely lifts the
// blur, 9 mostly clears it, 15 shows the original pixels.
export function revealBlurPx(sigma2: number, canvasSize: number): number {
  const base = BASE_BLUR_PX * (canvasSize / 512);
  if (sigma2 >= 15) return 0;
  if (sigma2 >= 9) return base * 0.2;
  return base * 0.65;
}

export function blurFilter(px: number): string {
  return px > 0 ? `blur(${px.toFixed(2)}px)` : "none";
}
