// Faceplate-side picture of the server.  Edits echo locally right away
// and are flagged pending; every state snapshot replaces the whole
// picture and clears the flags, so after any burst of edits the display
// converges to whatever the server settled on.

import {
  ClientFrame,
  SCORE_KEYS,
  ScoreKey,
  ScoreParams,
  ServerFrame,
  clampScore,
} from "./protocol.js";

export type ConnectionStatus = "connecting" | "open" | "closed";

export class UiModel {
  status: ConnectionStatus = "closed";
  params: ScoreParams | null = null; // unknown until the first snapshot
  pending = new Set<ScoreKey>();
  advancePending = false;
  mapping = "";
  stepIndex = 0;
  stepCount = 0;
  stepLabel = "";
  sampleRate = 0;
  inDb = -120;
  outDb = -120;
  lastError: string | null = null;
  onChange: () => void = () => {};

  constructor(private send: (frame: ClientFrame) => boolean) {}

  setStatus(status: ConnectionStatus): void {
    this.status = status;
    if (status !== "open") {
      // Edits in flight died with the socket; the next hello snapshot
      // is the only truth left.
      this.pending.clear();
      this.advancePending = false;
    }
    this.onChange();
  }

  applyFrame(frame: ServerFrame): void {
    if (frame.type === "state") {
      const params = {} as ScoreParams;
      for (const key of SCORE_KEYS) {
        params[key] = clampScore(key, Number(frame.params[key]));
      }
      this.params = params;
      this.mapping = frame.mapping;
      this.stepIndex = frame.step_index;
      this.stepCount = frame.step_count;
      this.stepLabel = frame.step_label;
      this.sampleRate = frame.sample_rate;
      this.inDb = frame.in_db;
      this.outDb = frame.out_db;
      this.pending.clear();
      this.advancePending = false;
      this.lastError = null;
    } else if (frame.type === "meters") {
      this.inDb = frame.in_db;
      this.outDb = frame.out_db;
    } else {
      this.lastError = frame.reason;
      // A rejected command never produces a snapshot, so re-arm the
      // advance button here.
      this.advancePending = false;
    }
    this.onChange();
  }

  edit(key: ScoreKey, value: number): boolean {
    if (this.status !== "open" || this.params === null) return false;
    const clamped = clampScore(key, value);
    this.params[key] = clamped;
    this.pending.add(key);
    this.send({ type: "set", param: key, value: clamped });
    this.onChange();
    return true;
  }

  advance(): boolean {
    // Double-click guard: one step per round trip.
    if (this.status !== "open" || this.advancePending) return false;
    this.advancePending = true;
    this.send({ type: "step" });
    this.onChange();
    return true;
  }

  requestState(): boolean {
    if (this.status !== "open") return false;
    return this.send({ type: "get_state" });
  }
}
