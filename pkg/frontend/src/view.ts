// DOM construction for the faceplate.  buildFaceplate wires controls to
// the model and returns a render function that repaints from model
// state.  The math helpers live at the top so they can be tested
// without a DOM.

import { UiModel } from "./model.js";
import {
  DS_POSITIONS,
  HP_POSITIONS,
  KNOB_KEYS,
  LP_POSITIONS,
  ScoreKey,
} from "./protocol.js";

export const ARC_DEGREES = 270;

// Knob travel is the score value itself: DF=0.6 sits at 0.6 of the
// arc.  The DF pointer never reaches the bottom quarter; its end stop
// is at 0.25.
export function knobAngle(value: number): number {
  return -ARC_DEGREES / 2 + ARC_DEGREES * value;
}

export const METER_MIN_DB = -60;
export const METER_MAX_DB = 6;

export function meterFraction(db: number): number {
  const span = (db - METER_MIN_DB) / (METER_MAX_DB - METER_MIN_DB);
  return Math.min(1, Math.max(0, span));
}

export function formatDb(db: number): string {
  if (db <= -119.9) return "--"; // meter floor, nothing to show
  return `${db.toFixed(1)} dB`;
}

export function stepText(index: number, count: number, label: string): string {
  return `step ${index}/${count}: ${label}`;
}

// Vertical drag over this many pixels covers the full arc.
const DRAG_TRAVEL_PX = 150;

interface KnobRefs {
  key: ScoreKey;
  cell: HTMLElement;
  pointer: HTMLElement;
  readout: HTMLElement;
}

export function buildFaceplate(root: HTMLElement, model: UiModel): () => void {
  root.innerHTML = "";

  const banner = el("div", "banner");
  root.appendChild(banner);

  const header = el("div", "header");
  const title = el("span", "title");
  title.textContent = "DL-4";
  const mappingBadge = el("span", "mapping");
  header.appendChild(title);
  header.appendChild(mappingBadge);
  root.appendChild(header);

  // Delay-range selector, ten powers of two.
  const dsRow = el("div", "row");
  const dsLabel = el("span", "switch-label");
  dsLabel.textContent = "DS";
  const dsSelect = document.createElement("select");
  dsSelect.className = "ds";
  for (const ms of DS_POSITIONS) {
    const option = document.createElement("option");
    option.value = String(ms);
    option.textContent = `${ms} ms`;
    dsSelect.appendChild(option);
  }
  dsSelect.onchange = () => model.edit("DS", parseFloat(dsSelect.value));
  dsRow.appendChild(dsLabel);
  dsRow.appendChild(dsSelect);
  root.appendChild(dsRow);

  const knobRow = el("div", "row knobs");
  const knobs: KnobRefs[] = [];
  for (const key of KNOB_KEYS) {
    const cell = el("div", "knob-cell");
    const face = el("div", "knob");
    const pointer = el("div", "knob-pointer");
    face.appendChild(pointer);
    const name = el("div", "knob-name");
    name.textContent = key;
    const readout = el("div", "knob-readout");
    cell.appendChild(face);
    cell.appendChild(name);
    cell.appendChild(readout);
    knobRow.appendChild(cell);
    knobs.push({ key, cell, pointer, readout });
    bindKnobDrag(face, model, key);
  }
  root.appendChild(knobRow);

  const switchRow = el("div", "row switches");
  const hpButton = toggleButton(switchRow, () => {
    if (model.params === null) return;
    model.edit("HP", other(HP_POSITIONS, model.params.HP));
  });
  const lpButton = toggleButton(switchRow, () => {
    if (model.params === null) return;
    model.edit("LP", other(LP_POSITIONS, model.params.LP));
  });
  const fbPhaseButton = toggleButton(switchRow, () => {
    if (model.params === null) return;
    model.edit("FBPHASE", model.params.FBPHASE === 0 ? 1 : 0);
  });
  const outPhaseButton = toggleButton(switchRow, () => {
    if (model.params === null) return;
    model.edit("OUTPHASE", model.params.OUTPHASE === 0 ? 1 : 0);
  });
  root.appendChild(switchRow);

  const stepRow = el("div", "row step");
  const stepLabel = el("span", "step-label");
  const advanceButton = document.createElement("button");
  advanceButton.textContent = "Advance";
  advanceButton.onclick = () => model.advance();
  stepRow.appendChild(stepLabel);
  stepRow.appendChild(advanceButton);
  root.appendChild(stepRow);

  const meterRow = el("div", "row meters");
  const inMeter = meter(meterRow, "in");
  const outMeter = meter(meterRow, "out");
  root.appendChild(meterRow);

  const errorStrip = el("div", "error-strip");
  root.appendChild(errorStrip);

  const controls: (HTMLSelectElement | HTMLButtonElement)[] = [
    dsSelect,
    hpButton,
    lpButton,
    fbPhaseButton,
    outPhaseButton,
    advanceButton,
  ];

  return function render(): void {
    const connected = model.status === "open";
    if (connected) {
      banner.style.display = "none";
    } else {
      banner.style.display = "block";
      banner.textContent =
        model.status === "connecting"
          ? "connecting..."
          : "connection lost, retrying...";
    }
    mappingBadge.textContent = model.mapping ? `mapping: ${model.mapping}` : "";
    root.classList.toggle("offline", !connected);
    for (const control of controls) control.disabled = !connected;

    const params = model.params;
    if (params !== null) {
      dsSelect.value = String(params.DS);
      for (const knob of knobs) {
        const value = params[knob.key];
        knob.pointer.style.transform = `rotate(${knobAngle(value)}deg)`;
        knob.readout.textContent = value.toFixed(2);
        knob.cell.classList.toggle("pending", model.pending.has(knob.key));
      }
      hpButton.textContent = `HP ${params.HP} Hz`;
      lpButton.textContent = `LP ${params.LP} Hz`;
      fbPhaseButton.textContent = params.FBPHASE === 0 ? "FB +" : "FB -";
      outPhaseButton.textContent = params.OUTPHASE === 0 ? "OUT +" : "OUT -";
      stepLabel.textContent = stepText(
        model.stepIndex,
        model.stepCount,
        model.stepLabel,
      );
    }
    advanceButton.disabled = !connected || model.advancePending;

    inMeter.bar.style.width = `${100 * meterFraction(model.inDb)}%`;
    inMeter.text.textContent = formatDb(model.inDb);
    outMeter.bar.style.width = `${100 * meterFraction(model.outDb)}%`;
    outMeter.text.textContent = formatDb(model.outDb);

    errorStrip.textContent = model.lastError ?? "";
  };
}

function el(tag: string, className: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  return node;
}

function toggleButton(parent: HTMLElement, onClick: () => void): HTMLButtonElement {
  const button = document.createElement("button");
  button.onclick = onClick;
  parent.appendChild(button);
  return button;
}

function meter(parent: HTMLElement, name: string) {
  const wrap = el("div", "meter");
  const label = el("span", "meter-name");
  label.textContent = name;
  const track = el("div", "meter-track");
  const bar = el("div", "meter-bar");
  track.appendChild(bar);
  const text = el("span", "meter-db");
  wrap.appendChild(label);
  wrap.appendChild(track);
  wrap.appendChild(text);
  parent.appendChild(wrap);
  return { bar, text };
}

function other(positions: number[], current: number): number {
  return positions[0] === current ? positions[1] : positions[0];
}

function bindKnobDrag(face: HTMLElement, model: UiModel, key: ScoreKey): void {
  let startY = 0;
  let startValue = 0;
  face.onpointerdown = (event: PointerEvent) => {
    if (model.status !== "open" || model.params === null) return;
    startY = event.clientY;
    startValue = model.params[key];
    face.setPointerCapture(event.pointerId);
    face.onpointermove = (move: PointerEvent) => {
      const delta = (startY - move.clientY) / DRAG_TRAVEL_PX;
      model.edit(key, startValue + delta); // the model clamps
    };
    face.onpointerup = () => {
      face.onpointermove = null;
      face.onpointerup = null;
    };
  };
}
