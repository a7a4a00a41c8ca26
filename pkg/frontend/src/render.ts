// Pure rendering helpers: frames to cell descriptions and policy bars.
// The DOM layer in app.ts is a thin wrapper over these.

import { ACTION_NAMES, KIND_BITS, type LiveFrame } from "./types.js";

export interface CellView {
  glyph: string;
  cssClass: string;
}

const GLYPHS: Array<[number, string, string]> = [
  // priority order: the first matching kind decides the cell's look
  [KIND_BITS.avatar, "@", "avatar"],
  [KIND_BITS.chaser, "z", "chaser"],
  [KIND_BITS.lethal, "x", "lethal"],
  [KIND_BITS.goal, "G", "goal"],
  [KIND_BITS.door, "D", "door"],
  [KIND_BITS.key, "k", "key"],
  [KIND_BITS.collectible, "o", "collectible"],
  [KIND_BITS.solid, "#", "solid"],
];

export function cellView(mask: number): CellView {
  for (const [bit, glyph, cssClass] of GLYPHS) {
    if (mask & (1 << bit)) return { glyph, cssClass };
  }
  return { glyph: "·", cssClass: "floor" };
}

export function renderGrid(frame: LiveFrame): CellView[][] {
  return frame.grid.map((row) => row.map(cellView));
}

/** Plain-text board, one character per cell (used headless and in tests). */
export function renderGridText(frame: LiveFrame): string {
  return frame.grid
    .map((row) => row.map((mask) => cellView(mask).glyph).join(""))
    .join("\n");
}

export interface PolicyBar {
  action: string;
  weight: number; // 0..1
  percent: string;
  chosen: boolean;
}

export function policyBars(frame: LiveFrame): PolicyBar[] {
  return frame.policy.map((weight, index) => ({
    action: ACTION_NAMES[index] ?? `a${index}`,
    weight,
    percent: `${Math.round(weight * 100)}%`,
    chosen: index === frame.action,
  }));
}

export function frameCaption(frame: LiveFrame): string {
  const action = ACTION_NAMES[frame.action] ?? String(frame.action);
  return `${frame.game} · episode ${frame.episode} · tick ${frame.tick} · score ${frame.score} · ${action}`;
}
