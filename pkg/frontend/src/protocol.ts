// Wire protocol of the trial service: versioned JSON text frames.
// Mirrors the server frame-by-frame; parseServerFrame rejects unknown or
// stale-versioned frames so a protocol drift fails loudly.

export const PROTOCOL_VERSION = 1;

export type Side = "left" | "right";

export interface SubjectState {
  x: number;
  y: number;
  heading: number;
  speed: number;
  head_yaw: number;
  head_pitch: number;
  head_roll: number;
}

export interface PedestrianFrame {
  id: number;
  x: number;
  y: number;
  // spectator stream extras
  role?: string;
  visible?: boolean;
  colliding?: boolean;
}

export interface SessionAck {
  type: "session_ack";
  session_id: string;
  resumed: boolean;
  seed: number;
  profile: string;
  scenario: string;
  mode: string;
  dt: number;
  state_divisor: number;
  trial_count: number;
  trial_index: number;
  subject: {
    pws: number;
    shoulder_radius: number;
    fov_half_angle: number;
    field_loss: string;
  };
}

export interface SpectateAck {
  type: "spectate_ack";
  session_id: string;
}

export interface StateFrame {
  type: "state";
  tick: number;
  t: number;
  phase: string;
  subject: SubjectState;
  pedestrians: PedestrianFrame[];
  trial_index: number;
  trial_count: number;
  spectator?: boolean;
}

export interface EventFrame {
  type: "event";
  trial_id: number;
  t: number;
  tick: number;
  seq: number;
  kind: string;
  payload: Record<string, unknown>;
}

export interface TrialConfigFrame {
  type: "trial_config";
  index: number;
  total: number;
  trial_id: number;
  kind: string;
  start_trigger_distance: number;
  end_trigger_distance: number;
}

export interface TrialSummaryFrame {
  type: "trial_summary";
  trial_id: number;
  index: number;
  total: number;
  kind: string;
  beta_deg: number | null;
  detected: boolean;
  response_class: string;
  rt: number | null;
  collided: boolean;
  events: number;
}

export interface SessionSummaryFrame {
  type: "session_summary";
  session_id: string;
  trials: number;
  detected: number;
  collided: number;
  stored: boolean;
}

export interface ErrorFrame {
  type: "error";
  code: string;
  message: string;
}

export type ServerFrame =
  | SessionAck
  | SpectateAck
  | StateFrame
  | EventFrame
  | TrialConfigFrame
  | TrialSummaryFrame
  | SessionSummaryFrame
  | ErrorFrame;

const SERVER_FRAME_TYPES = new Set([
  "session_ack",
  "spectate_ack",
  "state",
  "event",
  "trial_config",
  "trial_summary",
  "session_summary",
  "error",
]);

export class ProtocolError extends Error {}

export function parseServerFrame(raw: string): ServerFrame {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    throw new ProtocolError(`frame is not JSON: ${raw.slice(0, 80)}`);
  }
  if (typeof data !== "object" || data === null) {
    throw new ProtocolError("frame is not an object");
  }
  const frame = data as Record<string, unknown>;
  if (frame.v !== PROTOCOL_VERSION) {
    throw new ProtocolError(`unsupported protocol version ${String(frame.v)}`);
  }
  if (typeof frame.type !== "string" || !SERVER_FRAME_TYPES.has(frame.type)) {
    throw new ProtocolError(`unknown frame type ${String(frame.type)}`);
  }
  return frame as unknown as ServerFrame;
}

export interface HelloConfig {
  profile?: string;
  seed?: number;
  scenario?: string;
  mode?: string;
  pws?: number;
  field_loss?: string;
  resume?: string;
}

export interface InputValues {
  steer_rate: number;
  speed_target: number;
  head_yaw_target: number;
  head_pitch_target: number;
}

function encode(type: string, fields: Record<string, unknown>): string {
  return JSON.stringify({ v: PROTOCOL_VERSION, type, ...fields });
}

export function helloFrame(config: HelloConfig): string {
  return encode("hello", { config });
}

export function inputFrame(tick: number, values: InputValues): string {
  return encode("input", { tick, ...values });
}

export function detectFrame(side: Side): string {
  return encode("detect", { side });
}

export function startTrialFrame(): string {
  return encode("start_trial", {});
}

export function abortFrame(): string {
  return encode("abort", {});
}
