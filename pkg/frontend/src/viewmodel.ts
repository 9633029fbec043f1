// Client-side session state: a two-frame interpolation buffer over the
// authoritative stream plus HUD bookkeeping. The UI never invents state;
// everything rendered comes from server frames (pedestrians in particular
// are exactly the set the subject stream carried).

import {
  EventFrame,
  PedestrianFrame,
  ServerFrame,
  SessionAck,
  SessionSummaryFrame,
  StateFrame,
  SubjectState,
  TrialConfigFrame,
  TrialSummaryFrame,
} from "./protocol.js";

export type SessionPhase =
  | "connecting"
  | "between_trials"
  | "running"
  | "paused"
  | "done"
  | "error";

interface BufferedState {
  frame: StateFrame;
  arrivedMs: number;
}

export interface RenderView {
  subject: SubjectState;
  pedestrians: PedestrianFrame[];
  tick: number;
  t: number;
  enginePhase: string;
  trialIndex: number;
  trialCount: number;
}

export class ViewModel {
  ack: SessionAck | null = null;
  trialConfig: TrialConfigFrame | null = null;
  trialSummaries: TrialSummaryFrame[] = [];
  sessionSummary: SessionSummaryFrame | null = null;
  lastError: string | null = null;
  recentEvents: EventFrame[] = [];
  phase: SessionPhase = "connecting";

  private buffer: BufferedState[] = [];

  constructor(private readonly now: () => number = () => Date.now()) {}

  handleFrame(frame: ServerFrame): void {
    switch (frame.type) {
      case "session_ack":
        this.ack = frame;
        this.phase = "between_trials";
        break;
      case "trial_config":
        this.trialConfig = frame;
        this.buffer = [];
        this.phase = "running";
        break;
      case "state":
        this.pushState(frame);
        break;
      case "event":
        this.recentEvents.push(frame);
        if (this.recentEvents.length > 50) {
          this.recentEvents.shift();
        }
        break;
      case "trial_summary":
        this.trialSummaries.push(frame);
        this.phase = "between_trials";
        break;
      case "session_summary":
        this.sessionSummary = frame;
        this.phase = "done";
        break;
      case "error":
        this.lastError = `${frame.code}: ${frame.message}`;
        break;
      case "spectate_ack":
        this.phase = "between_trials";
        break;
    }
  }

  markPaused(): void {
    if (this.phase !== "done") {
      this.phase = "paused";
    }
  }

  markResumed(): void {
    if (this.phase === "paused") {
      this.phase = this.trialConfig ? "running" : "between_trials";
    }
  }

  private pushState(frame: StateFrame): void {
    this.buffer.push({ frame, arrivedMs: this.now() });
    if (this.buffer.length > 2) {
      this.buffer.shift();
    }
  }

  get latest(): StateFrame | null {
    return this.buffer.length ? this.buffer[this.buffer.length - 1].frame : null;
  }

  // Linear interpolation between the two buffered frames, rendered one
  // frame interval behind the newest arrival (the usual snapshot delay).
  // Pedestrians interpolate only when both frames carry them; a pedestrian
  // present in just the newest frame snaps to it, and one absent from the
  // newest frame is not rendered at all (the mask wins).
  view(nowMs?: number): RenderView | null {
    if (this.buffer.length === 0) {
      return null;
    }
    const newest = this.buffer[this.buffer.length - 1];
    if (this.buffer.length === 1) {
      return this.asView(newest.frame);
    }
    const oldest = this.buffer[0];
    const span = newest.arrivedMs - oldest.arrivedMs;
    const at = nowMs ?? this.now();
    const alpha = span <= 0 ? 1 : Math.max(0, Math.min(1, (at - newest.arrivedMs) / span));
    const a = oldest.frame;
    const b = newest.frame;
    const lerp = (x: number, y: number) => x + (y - x) * alpha;
    const olderById = new Map(a.pedestrians.map((p) => [p.id, p]));
    const pedestrians = b.pedestrians.map((p) => {
      const prev = olderById.get(p.id);
      if (!prev) {
        return { ...p };
      }
      return { ...p, x: lerp(prev.x, p.x), y: lerp(prev.y, p.y) };
    });
    return {
      subject: {
        x: lerp(a.subject.x, b.subject.x),
        y: lerp(a.subject.y, b.subject.y),
        heading: lerp(a.subject.heading, b.subject.heading),
        speed: lerp(a.subject.speed, b.subject.speed),
        head_yaw: lerp(a.subject.head_yaw, b.subject.head_yaw),
        head_pitch: lerp(a.subject.head_pitch, b.subject.head_pitch),
        head_roll: lerp(a.subject.head_roll, b.subject.head_roll),
      },
      pedestrians,
      tick: b.tick,
      t: b.t,
      enginePhase: b.phase,
      trialIndex: b.trial_index,
      trialCount: b.trial_count,
    };
  }

  private asView(frame: StateFrame): RenderView {
    return {
      subject: { ...frame.subject },
      pedestrians: frame.pedestrians.map((p) => ({ ...p })),
      tick: frame.tick,
      t: frame.t,
      enginePhase: frame.phase,
      trialIndex: frame.trial_index,
      trialCount: frame.trial_count,
    };
  }

  hud(): string {
    if (this.phase === "done" && this.sessionSummary) {
      const s = this.sessionSummary;
      return `session complete: ${s.trials} trials, ${s.detected} detected, ${s.collided} collided`;
    }
    const total = this.ack?.trial_count ?? 0;
    const index = (this.trialConfig?.index ?? this.trialSummaries.length) + 1;
    const trialPart = total ? `trial ${Math.min(index, total)}/${total}` : "";
    return `${trialPart} [${this.phase}]`;
  }

  summaryCounts(): { trials: number; detected: number; collided: number } {
    return {
      trials: this.trialSummaries.length,
      detected: this.trialSummaries.filter((s) => s.detected).length,
      collided: this.trialSummaries.filter((s) => s.collided).length,
    };
  }
}
