// Session transport: one WebSocket, typed callbacks, and reconnection with
// the server-issued resume token. The client never simulates anything; it
// forwards inputs and renders whatever state frames arrive.

import {
  HelloConfig,
  ProtocolError,
  ServerFrame,
  Side,
  abortFrame,
  detectFrame,
  helloFrame,
  inputFrame,
  parseServerFrame,
  startTrialFrame,
  InputValues,
} from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface SessionCallbacks {
  onFrame?: (frame: ServerFrame) => void;
  onOpen?: () => void;
  onPaused?: () => void;
  onResumed?: () => void;
  onClosed?: () => void;
  onProtocolError?: (err: ProtocolError) => void;
}

const RECONNECT_DELAY_MS = 1000;
const MAX_RECONNECT_ATTEMPTS = 10;

export class SessionClient {
  private socket: SocketLike | null = null;
  private sessionId: string | null = null;
  private closedByUs = false;
  private reconnectAttempts = 0;
  private tick = 0;

  constructor(
    private readonly url: string,
    private readonly config: HelloConfig,
    private readonly callbacks: SessionCallbacks,
    private readonly makeSocket: SocketFactory,
    private readonly scheduler: (fn: () => void, ms: number) => void = (fn, ms) => {
      setTimeout(fn, ms);
    },
  ) {}

  connect(): void {
    this.openSocket({ ...this.config });
  }

  private openSocket(config: HelloConfig): void {
    const socket = this.makeSocket(this.url);
    this.socket = socket;
    socket.onopen = () => {
      socket.send(helloFrame(config));
      if (config.resume) {
        this.callbacks.onResumed?.();
      } else {
        this.callbacks.onOpen?.();
      }
      this.reconnectAttempts = 0;
    };
    socket.onmessage = (ev) => {
      let frame: ServerFrame;
      try {
        frame = parseServerFrame(String(ev.data));
      } catch (err) {
        this.callbacks.onProtocolError?.(err as ProtocolError);
        return;
      }
      if (frame.type === "session_ack") {
        this.sessionId = frame.session_id;
      }
      this.callbacks.onFrame?.(frame);
    };
    socket.onclose = () => {
      if (this.closedByUs) {
        this.callbacks.onClosed?.();
        return;
      }
      this.callbacks.onPaused?.();
      if (this.sessionId && this.reconnectAttempts < MAX_RECONNECT_ATTEMPTS) {
        this.reconnectAttempts += 1;
        const resume = this.sessionId;
        this.scheduler(() => {
          if (!this.closedByUs) {
            this.openSocket({ resume });
          }
        }, RECONNECT_DELAY_MS);
      } else {
        this.callbacks.onClosed?.();
      }
    };
    socket.onerror = () => {
      // onclose follows; nothing to do here
    };
  }

  get id(): string | null {
    return this.sessionId;
  }

  sendInput(values: InputValues): void {
    this.tick += 1;
    this.socket?.send(inputFrame(this.tick, values));
  }

  sendDetect(side: Side): void {
    this.socket?.send(detectFrame(side));
  }

  startTrial(): void {
    this.socket?.send(startTrialFrame());
  }

  abort(): void {
    this.socket?.send(abortFrame());
    this.close();
  }

  close(): void {
    this.closedByUs = true;
    this.socket?.close();
  }
}

export function connectSpectator(
  baseUrl: string,
  sessionId: string,
  callbacks: SessionCallbacks,
  makeSocket: SocketFactory,
): SocketLike {
  const socket = makeSocket(`${baseUrl.replace(/\/$/, "")}/spectate/${sessionId}`);
  socket.onmessage = (ev) => {
    try {
      callbacks.onFrame?.(parseServerFrame(String(ev.data)));
    } catch (err) {
      callbacks.onProtocolError?.(err as ProtocolError);
    }
  };
  socket.onclose = () => callbacks.onClosed?.();
  socket.onopen = () => callbacks.onOpen?.();
  socket.onerror = () => {};
  return socket;
}
