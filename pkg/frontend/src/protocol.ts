// Wire protocol for the dl4sim control server: one JSON object per
// WebSocket text frame, parameters named in the score vocabulary.

export const SCORE_KEYS = [
  "DS",
  "DF",
  "RG",
  "MX",
  "SP",
  "WD",
  "SHAPE",
  "HP",
  "LP",
  "FBPHASE",
  "OUTPHASE",
] as const;

export type ScoreKey = (typeof SCORE_KEYS)[number];
export type ScoreParams = Record<ScoreKey, number>;

// Continuous knobs; the rest are detented or two-position.
export const KNOB_KEYS: ScoreKey[] = ["DF", "RG", "MX", "SP", "WD", "SHAPE"];

export const DS_POSITIONS = [1, 2, 4, 8, 16, 32, 64, 128, 256, 512];
export const HP_POSITIONS = [16, 150];
export const LP_POSITIONS = [15000, 3300];

export interface StateFrame {
  type: "state";
  params: ScoreParams;
  mapping: string;
  step_index: number;
  step_count: number;
  step_label: string;
  sample_rate: number;
  in_db: number;
  out_db: number;
}

export interface MetersFrame {
  type: "meters";
  in_db: number;
  out_db: number;
}

export interface ErrorFrame {
  type: "error";
  reason: string;
}

export type ServerFrame = StateFrame | MetersFrame | ErrorFrame;

export type ClientFrame =
  | { type: "set"; param: ScoreKey; value: number }
  | { type: "step" }
  | { type: "get_state" }
  | { type: "load_steps"; text: string };

// Force a value into its control's domain.  DF stops at 0.25, the low
// end of the hardware knob; discrete controls snap to the nearest
// legal position.
export function clampScore(key: ScoreKey, value: number): number {
  if (!Number.isFinite(value)) value = 0;
  if (key === "DS") return nearest(DS_POSITIONS, value);
  if (key === "DF") return Math.min(1, Math.max(0.25, value));
  if (key === "HP") return nearest(HP_POSITIONS, value);
  if (key === "LP") return nearest(LP_POSITIONS, value);
  if (key === "FBPHASE" || key === "OUTPHASE") return value >= 0.5 ? 1 : 0;
  return Math.min(1, Math.max(0, value));
}

function nearest(positions: number[], value: number): number {
  let best = positions[0];
  for (const p of positions) {
    if (Math.abs(p - value) < Math.abs(best - value)) best = p;
  }
  return best;
}

// Anything that is not a known server frame comes back null; the
// transport drops those instead of crashing the UI.
export function parseServerFrame(raw: string): ServerFrame | null {
  let frame: unknown;
  try {
    frame = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof frame !== "object" || frame === null) return null;
  const type = (frame as { type?: unknown }).type;
  if (type === "state" || type === "meters" || type === "error") {
    return frame as ServerFrame;
  }
  return null;
}
