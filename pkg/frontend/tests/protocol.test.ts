import { describe, expect, it } from "vitest";
import { ProtocolError, encodeCommand, isEventFrame, isStateFrame, parseFrame } from "../src/protocol.js";

describe("parseFrame", () => {
  it("parses a state frame", () => {
    const frame = parseFrame(
      JSON.stringify({ kind: "state", sequence: 3, sim_time: 0.1, payload: { tip_mm: [0, 0, 30] } }),
    );
    expect(frame.kind).toBe("state");
    expect(isStateFrame(frame)).toBe(true);
    expect(isEventFrame(frame)).toBe(false);
  });

  it("parses an event frame", () => {
    const frame = parseFrame(
      JSON.stringify({ kind: "event", sequence: 4, sim_time: 0.2, payload: { event: "goal-reached" } }),
    );
    expect(isEventFrame(frame)).toBe(true);
  });

  it("rejects non-JSON", () => {
    expect(() => parseFrame("not json")).toThrow(ProtocolError);
  });

  it("rejects unknown kinds and missing fields", () => {
    expect(() => parseFrame(JSON.stringify({ kind: "telemetry", sequence: 1 }))).toThrow(ProtocolError);
    expect(() => parseFrame(JSON.stringify({ kind: "state", payload: {} }))).toThrow(ProtocolError);
  });

  it("encodes exactly one well-formed command frame", () => {
    const text = encodeCommand({ kind: "command", action: "jog", sequence: 9, chamber: 1, dp_kpa: 2 });
    const doc = JSON.parse(text);
    expect(doc).toEqual({ kind: "command", action: "jog", sequence: 9, chamber: 1, dp_kpa: 2 });
    expect(text.includes("\n")).toBe(false);
  });
});
