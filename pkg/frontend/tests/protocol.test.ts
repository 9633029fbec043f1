import { describe, expect, it } from "vitest";

import {
  PROTOCOL_VERSION,
  ProtocolError,
  detectFrame,
  helloFrame,
  inputFrame,
  parseServerFrame,
  startTrialFrame,
} from "../src/protocol.js";

describe("client frame encoding", () => {
  it("stamps the protocol version on every frame", () => {
    for (const raw of [
      helloFrame({ profile: "nv", seed: 1 }),
      inputFrame(3, { steer_rate: 0, speed_target: 1, head_yaw_target: 0, head_pitch_target: 0 }),
      detectFrame("left"),
      startTrialFrame(),
    ]) {
      expect(JSON.parse(raw).v).toBe(PROTOCOL_VERSION);
    }
  });

  it("encodes input fields flat, matching the server schema", () => {
    const msg = JSON.parse(
      inputFrame(7, { steer_rate: 1, speed_target: 0.9, head_yaw_target: -5, head_pitch_target: 2 }),
    );
    expect(msg).toEqual({
      v: PROTOCOL_VERSION,
      type: "input",
      tick: 7,
      steer_rate: 1,
      speed_target: 0.9,
      head_yaw_target: -5,
      head_pitch_target: 2,
    });
  });
});

describe("server frame parsing", () => {
  it("accepts a state frame", () => {
    const frame = parseServerFrame(
      JSON.stringify({
        v: 1,
        type: "state",
        tick: 2,
        t: 0.027,
        phase: "pre_trigger",
        subject: { x: 0, y: 0, heading: 0, speed: 0, head_yaw: 0, head_pitch: 0, head_roll: 0 },
        pedestrians: [],
        trial_index: 0,
        trial_count: 32,
      }),
    );
    expect(frame.type).toBe("state");
  });

  it("rejects version drift", () => {
    expect(() => parseServerFrame(JSON.stringify({ v: 2, type: "state" }))).toThrow(
      ProtocolError,
    );
  });

  it("rejects unknown frame types", () => {
    expect(() => parseServerFrame(JSON.stringify({ v: 1, type: "mystery" }))).toThrow(
      ProtocolError,
    );
  });

  it("rejects non-JSON", () => {
    expect(() => parseServerFrame("{oops")).toThrow(ProtocolError);
  });
});
