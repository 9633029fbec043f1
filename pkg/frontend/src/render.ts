// Top-down schematic canvas rendering: the walking lane with its floor
// markers and triggers, the subject with gaze wedge, and the pedestrians
// present in the stream. The spectator variant is clearly labeled and
// additionally shows roles, visibility, and the colliding target.

import { RenderView } from "./viewmodel.js";

export interface RenderOptions {
  spectator: boolean;
  fovHalfAngle: number;
  fieldLoss: string;
  startTrigger: number;
  endTrigger: number;
}

export const DEFAULT_RENDER_OPTIONS: RenderOptions = {
  spectator: false,
  fovHalfAngle: 45,
  fieldLoss: "none",
  startTrigger: 3,
  endTrigger: 10,
};

const METERS_VISIBLE_Y = 16; // world meters mapped onto the canvas height

interface Ctx2D {
  canvas: { width: number; height: number };
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  globalAlpha: number;
  font: string;
  textAlign: CanvasTextAlign;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number, ccw?: boolean): void;
  closePath(): void;
  fill(): void;
  stroke(): void;
  fillText(text: string, x: number, y: number): void;
  setLineDash(segments: number[]): void;
}

export function worldToScreen(
  wx: number,
  wy: number,
  width: number,
  height: number,
): [number, number] {
  const scale = height / METERS_VISIBLE_Y;
  const originX = width / 2;
  const originY = height - scale * 2; // 2 m of world behind the start line
  return [originX + wx * scale, originY - wy * scale];
}

export function drawScene(ctx: Ctx2D, view: RenderView | null, opts: RenderOptions, hud: string): void {
  const { width, height } = ctx.canvas;
  const scale = height / METERS_VISIBLE_Y;

  ctx.fillStyle = "#14161a";
  ctx.fillRect(0, 0, width, height);

  // Walking lane with green floor markers.
  const laneHalf = 0.6 * scale;
  const [cx0, y0] = worldToScreen(0, -2, width, height);
  ctx.fillStyle = "#1d2430";
  ctx.fillRect(cx0 - laneHalf, 0, 2 * laneHalf, height);
  ctx.strokeStyle = "#3fae5a";
  ctx.lineWidth = 2;
  ctx.setLineDash([10, 12]);
  ctx.beginPath();
  ctx.moveTo(cx0, y0);
  ctx.lineTo(cx0, 0);
  ctx.stroke();
  ctx.setLineDash([]);

  // Trigger lines.
  for (const [dist, color, label] of [
    [opts.startTrigger, "#ccb44a", "start"],
    [opts.endTrigger, "#b0573f", "end"],
  ] as const) {
    const [, ty] = worldToScreen(0, dist, width, height);
    ctx.strokeStyle = color;
    ctx.lineWidth = 1;
    ctx.beginPath();
    ctx.moveTo(cx0 - laneHalf * 1.6, ty);
    ctx.lineTo(cx0 + laneHalf * 1.6, ty);
    ctx.stroke();
    ctx.fillStyle = color;
    ctx.font = "11px monospace";
    ctx.textAlign = "left";
    ctx.fillText(label, cx0 + laneHalf * 1.7, ty + 4);
  }

  if (view) {
    const s = view.subject;
    const [sx, sy] = worldToScreen(s.x, s.y, width, height);

    // Gaze wedge (heading + head yaw); hemifield loss shades the dead half.
    const gazeDeg = s.heading + s.head_yaw;
    const gazeRad = (gazeDeg * Math.PI) / 180;
    const wedge = (opts.fovHalfAngle * Math.PI) / 180;
    const r = 6 * scale;
    const screenAngle = (a: number) => a - Math.PI / 2; // world +Y is screen up
    let lo = -wedge;
    let hi = wedge;
    if (!opts.spectator) {
      if (opts.fieldLoss === "left_hemianopia") lo = 0;
      if (opts.fieldLoss === "right_hemianopia") hi = 0;
    }
    ctx.globalAlpha = 0.12;
    ctx.fillStyle = "#7fb4ff";
    ctx.beginPath();
    ctx.moveTo(sx, sy);
    ctx.arc(sx, sy, r, screenAngle(gazeRad + lo), screenAngle(gazeRad + hi));
    ctx.closePath();
    ctx.fill();
    ctx.globalAlpha = 1.0;

    // Pedestrians.
    for (const p of view.pedestrians) {
      const [px, py] = worldToScreen(p.x, p.y, width, height);
      const radius = 0.25 * scale;
      if (opts.spectator) {
        ctx.fillStyle = p.colliding ? "#e0643c" : "#8d9199";
        ctx.globalAlpha = p.visible === false ? 0.35 : 1.0;
      } else {
        ctx.fillStyle = "#c8ccd4";
      }
      ctx.beginPath();
      ctx.arc(px, py, radius, 0, 2 * Math.PI);
      ctx.fill();
      ctx.globalAlpha = 1.0;
      if (opts.spectator && p.visible === false) {
        ctx.strokeStyle = "#555";
        ctx.lineWidth = 1;
        ctx.beginPath();
        ctx.arc(px, py, radius + 2, 0, 2 * Math.PI);
        ctx.stroke();
      }
    }

    // Subject: disc plus heading tick.
    ctx.fillStyle = "#6f8dff";
    ctx.beginPath();
    ctx.arc(sx, sy, 0.25 * scale, 0, 2 * Math.PI);
    ctx.fill();
    const hx = sx + Math.sin((s.heading * Math.PI) / 180) * 0.6 * scale;
    const hy = sy - Math.cos((s.heading * Math.PI) / 180) * 0.6 * scale;
    ctx.strokeStyle = "#9fb4ff";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(sx, sy);
    ctx.lineTo(hx, hy);
    ctx.stroke();
  }

  // HUD.
  ctx.fillStyle = "#e8e8e8";
  ctx.font = "14px monospace";
  ctx.textAlign = "left";
  ctx.fillText(hud, 12, 20);
  if (opts.spectator) {
    ctx.fillStyle = "#e0643c";
    ctx.fillText("EXPERIMENTER VIEW (unmasked)", 12, 40);
  }
}
