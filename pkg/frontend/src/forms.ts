// Small DOM form helpers. Range enforcement lives here: cf/sf are 1..5,
// survey sliders 0..9, and out-of-range values are clamped on input so the
// client can never post an invalid rating.

export interface Scale {
  min: number;
  max: number;
}

export const CF_SF_SCALE: Scale = { min: 1, max: 5 };
export const LIKERT_SCALE: Scale = { min: 0, max: 9 };

export function clampRating(value: number, scale: Scale): number {
  if (Number.isNaN(value)) return scale.min;
  return Math.min(scale.max, Math.max(scale.min, Math.round(value)));
}

export function makeSlider(
  doc: Document,
  id: string,
  label: string,
  scale: Scale,
  initial?: number,
): HTMLDivElement {
  const wrap = doc.createElement("div");
  wrap.className = "slider-row";
  const text = doc.createElement("label");
  text.htmlFor = id;
  text.textContent = label;
  const input = doc.createElement("input");
  input.type = "range";
  input.id = id;
  input.min = String(scale.min);
  input.max = String(scale.max);
  input.step = "1";
  input.value = String(initial ?? scale.min);
  const value = doc.createElement("span");
  value.className = "slider-value";
  value.textContent = input.value;
  input.addEventListener("input", () => {
    const clamped = clampRating(Number(input.value), scale);
    input.value = String(clamped);
    value.textContent = String(clamped);
  });
  wrap.append(text, input, value);
  return wrap;
}

export function sliderValue(root: ParentNode, id: string, scale: Scale): number {
  const input = root.querySelector<HTMLInputElement>(`#${id}`);
  if (!input) return scale.min;
  return clampRating(Number(input.value), scale);
}

export function banner(doc: Document, target: HTMLElement, message: string, kind = "error") {
  const div = doc.createElement("div");
  div.className = `banner banner-${kind}`;
  div.textContent = message;
  target.prepend(div);
  setTimeout(() => div.remove(), 6000);
}
