// Browser entry point. Configuration comes from URL query parameters:
//   ws=ws://host:port     service address        (default ws://localhost:8765)
//   profile=nv|hh-left|hh-right|live             (default live)
//   field_loss=none|left_hemianopia|right_hemianopia   (live profile only)
//   seed=<int>            session seed           (default random)
//   pws=<m/s>             collision-point speed for live subjects
//   spectate=<session-id> attach the unmasked experimenter view instead

import { DEFAULT_BINDINGS, InputPump, KeyboardInput } from "./input.js";
import { SessionClient, connectSpectator } from "./net.js";
import { ServerFrame } from "./protocol.js";
import { DEFAULT_RENDER_OPTIONS, RenderOptions, drawScene } from "./render.js";
import { ViewModel } from "./viewmodel.js";

function params(): URLSearchParams {
  return new URLSearchParams(window.location.search);
}

function setupCanvas(): CanvasRenderingContext2D {
  const canvas = document.getElementById("scene") as HTMLCanvasElement;
  canvas.width = canvas.clientWidth * devicePixelRatio;
  canvas.height = canvas.clientHeight * devicePixelRatio;
  return canvas.getContext("2d")!;
}

function overlay(text: string | null): void {
  const el = document.getElementById("overlay")!;
  if (text === null) {
    el.style.display = "none";
  } else {
    el.style.display = "flex";
    el.textContent = text;
  }
}

function main(): void {
  const q = params();
  const url = q.get("ws") ?? "ws://localhost:8765";
  const spectateId = q.get("spectate");
  const vm = new ViewModel();
  const ctx = setupCanvas();
  const renderOptions: RenderOptions = {
    ...DEFAULT_RENDER_OPTIONS,
    spectator: spectateId !== null,
  };

  const makeSocket = (wsUrl: string) => new WebSocket(wsUrl) as any;

  if (spectateId) {
    connectSpectator(url, spectateId, {
      onFrame: (frame: ServerFrame) => vm.handleFrame(frame),
      onClosed: () => overlay("spectator stream closed"),
    }, makeSocket);
  } else {
    const profile = q.get("profile") ?? "live";
    const seed = Number(q.get("seed") ?? Math.floor(Math.random() * 2 ** 31));
    const config: Record<string, unknown> = { profile, seed, mode: "live" };
    if (q.get("pws")) config.pws = Number(q.get("pws"));
    if (q.get("field_loss")) config.field_loss = q.get("field_loss");

    const client = new SessionClient(url, config, {
      onFrame: (frame) => {
        vm.handleFrame(frame);
        if (frame.type === "session_ack") {
          renderOptions.fovHalfAngle = frame.subject.fov_half_angle;
          renderOptions.fieldLoss = frame.subject.field_loss;
          const spec = `${window.location.pathname}?ws=${encodeURIComponent(url)}&spectate=${frame.session_id}`;
          document.getElementById("spectate-link")!.innerHTML =
            `spectator: <a href="${spec}" target="_blank">${frame.session_id}</a>`;
          client.startTrial();
        }
        if (frame.type === "trial_config") {
          renderOptions.startTrigger = frame.start_trigger_distance;
          renderOptions.endTrigger = frame.end_trigger_distance;
          overlay(null);
        }
        if (frame.type === "trial_summary") {
          const c = vm.summaryCounts();
          overlay(
            `trial ${frame.index + 1}/${frame.total} done — ` +
              `${frame.response_class}${frame.collided ? ", collided" : ""}\n` +
              `so far: ${c.detected} detected, ${c.collided} collided\n` +
              `press N for the next trial`,
          );
        }
        if (frame.type === "session_summary") {
          overlay(
            `session complete\n${frame.trials} trials, ` +
              `${frame.detected} detected, ${frame.collided} collided`,
          );
        }
        if (frame.type === "error") {
          console.warn("server error frame:", frame.code, frame.message);
        }
      },
      onPaused: () => {
        vm.markPaused();
        overlay("connection lost — resuming…");
      },
      onResumed: () => {
        vm.markResumed();
        overlay(null);
      },
      onClosed: () => overlay("session closed"),
    }, makeSocket);

    const keyboard = new KeyboardInput(DEFAULT_BINDINGS);
    keyboard.onDetect = (side) => client.sendDetect(side);
    keyboard.attach(window as any);
    window.addEventListener("keydown", (ev) => {
      if (ev.code === "KeyN" && vm.phase === "between_trials") {
        client.startTrial();
      }
    });
    const pump = new InputPump(keyboard, (values) => {
      if (vm.phase === "running") {
        client.sendInput(values);
      }
    });
    pump.start();
    client.connect();
    overlay("connecting…");
  }

  const loop = () => {
    drawScene(ctx as any, vm.view(), renderOptions, vm.hud());
    requestAnimationFrame(loop);
  };
  requestAnimationFrame(loop);
}

main();
