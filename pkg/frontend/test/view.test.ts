import { describe, expect, it } from "vitest";

import {
  formatDb,
  knobAngle,
  meterFraction,
  stepText,
} from "../src/view.js";
import { clampScore, parseServerFrame } from "../src/protocol.js";

describe("knob geometry", () => {
  it("value is the arc fraction: DF=0.6 sits at 0.6 of the arc", () => {
    expect(knobAngle(0.6)).toBeCloseTo(-135 + 270 * 0.6, 12);
  });

  it("end stops", () => {
    expect(knobAngle(0)).toBe(-135);
    expect(knobAngle(1)).toBe(135);
  });

  it("the DF end stop keeps the pointer in its domain", () => {
    expect(knobAngle(clampScore("DF", 0))).toBeCloseTo(-135 + 270 * 0.25, 12);
  });
});

describe("meter scaling", () => {
  it("clamps to the visible span", () => {
    expect(meterFraction(-120)).toBe(0);
    expect(meterFraction(-60)).toBe(0);
    expect(meterFraction(6)).toBe(1);
    expect(meterFraction(-27)).toBeCloseTo(0.5, 12);
  });

  it("formats dB, hiding the floor", () => {
    expect(formatDb(-6.02)).toBe("-6.0 dB");
    expect(formatDb(0)).toBe("0.0 dB");
    expect(formatDb(-120)).toBe("--");
  });
});

describe("step text", () => {
  it("index, count, label", () => {
    expect(stepText(2, 3, "chorus")).toBe("step 2/3: chorus");
  });
});

describe("frame parsing", () => {
  it("accepts the three server frame types", () => {
    expect(parseServerFrame('{"type":"error","reason":"x"}')).toEqual({
      type: "error",
      reason: "x",
    });
  });

  it("rejects everything else", () => {
    expect(parseServerFrame("")).toBeNull();
    expect(parseServerFrame("null")).toBeNull();
    expect(parseServerFrame('{"kind":"state"}')).toBeNull();
    expect(parseServerFrame('{"type":"set"}')).toBeNull();
  });
});
