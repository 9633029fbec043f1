// Keyboard capture and the input pump.
//
// Movement keys are sampled on a fixed interval (40 Hz by default, above
// the 30 Hz floor) and sent as input frames; the two detect keys bypass
// the sampler and send their frame synchronously on keydown, so the
// keypress-to-frame latency is bounded by the event handler itself.

import { Side, InputValues } from "./protocol.js";

export interface KeyBindings {
  steerLeft: string;
  steerRight: string;
  speedUp: string;
  speedDown: string;
  headLeft: string;
  headRight: string;
  detectLeft: string;
  detectRight: string;
}

export const DEFAULT_BINDINGS: KeyBindings = {
  steerLeft: "ArrowLeft",
  steerRight: "ArrowRight",
  speedUp: "ArrowUp",
  speedDown: "ArrowDown",
  headLeft: "KeyQ",
  headRight: "KeyE",
  detectLeft: "KeyZ",
  detectRight: "KeyM",
};

export interface InputTuning {
  steerRate: number; // deg/s while a steer key is held
  speedStep: number; // m/s per sampling tick while held
  maxSpeed: number;
  headYawStep: number; // deg per sampling tick while held
  maxHeadYaw: number;
}

export const DEFAULT_TUNING: InputTuning = {
  steerRate: 90.0,
  speedStep: 0.05,
  maxSpeed: 2.5,
  headYawStep: 4.0,
  maxHeadYaw: 80.0,
};

interface EventTargetLike {
  addEventListener(type: string, handler: (ev: any) => void): void;
  removeEventListener(type: string, handler: (ev: any) => void): void;
}

export class KeyboardInput {
  private held = new Set<string>();
  private values: InputValues = {
    steer_rate: 0,
    speed_target: 0,
    head_yaw_target: 0,
    head_pitch_target: 0,
  };
  private keydownHandler = (ev: { code: string; repeat?: boolean }) => this.keydown(ev);
  private keyupHandler = (ev: { code: string }) => this.held.delete(ev.code);

  constructor(
    private readonly bindings: KeyBindings = DEFAULT_BINDINGS,
    private readonly tuning: InputTuning = DEFAULT_TUNING,
    public onDetect: ((side: Side) => void) | null = null,
  ) {}

  attach(target: EventTargetLike): () => void {
    target.addEventListener("keydown", this.keydownHandler);
    target.addEventListener("keyup", this.keyupHandler);
    return () => {
      target.removeEventListener("keydown", this.keydownHandler);
      target.removeEventListener("keyup", this.keyupHandler);
    };
  }

  private keydown(ev: { code: string; repeat?: boolean }): void {
    if (ev.repeat) {
      return;
    }
    // Detect presses are edges and leave immediately, not on the sampler.
    if (ev.code === this.bindings.detectLeft) {
      this.onDetect?.("left");
      return;
    }
    if (ev.code === this.bindings.detectRight) {
      this.onDetect?.("right");
      return;
    }
    this.held.add(ev.code);
  }

  setPointerYaw(yawDeg: number): void {
    const limit = this.tuning.maxHeadYaw;
    this.values.head_yaw_target = Math.max(-limit, Math.min(limit, yawDeg));
  }

  // One sampling tick: integrates held keys into the latched values and
  // returns a snapshot for the wire.
  sample(): InputValues {
    const b = this.bindings;
    const t = this.tuning;
    const held = this.held;
    this.values.steer_rate =
      (held.has(b.steerRight) ? t.steerRate : 0) - (held.has(b.steerLeft) ? t.steerRate : 0);
    if (held.has(b.speedUp)) {
      this.values.speed_target = Math.min(t.maxSpeed, this.values.speed_target + t.speedStep);
    }
    if (held.has(b.speedDown)) {
      this.values.speed_target = Math.max(0, this.values.speed_target - t.speedStep);
    }
    if (held.has(b.headLeft)) {
      this.values.head_yaw_target = Math.max(
        -t.maxHeadYaw,
        this.values.head_yaw_target - t.headYawStep,
      );
    }
    if (held.has(b.headRight)) {
      this.values.head_yaw_target = Math.min(
        t.maxHeadYaw,
        this.values.head_yaw_target + t.headYawStep,
      );
    }
    return { ...this.values };
  }
}

export class InputPump {
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly keyboard: KeyboardInput,
    private readonly sendInput: (values: InputValues) => void,
    public readonly intervalMs: number = 25,
  ) {}

  start(): void {
    if (this.timer === null) {
      this.timer = setInterval(() => this.sendInput(this.keyboard.sample()), this.intervalMs);
    }
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
