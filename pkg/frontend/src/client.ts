// Session client: owns the socket, feeds every frame through the view
// reducer, reconnects with a banner, and asks for a snapshot on reconnect
// so a rebuilt view catches up with the running session.

import { ClientMessage, choose, parseServerMessage, setVar } from "./protocol.js";
import { ViewModel, applyMessage, initialView } from "./viewmodel.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

const defaultFactory: SocketFactory = (url) =>
  new (globalThis as { WebSocket: new (u: string) => SocketLike }).WebSocket(url);

export class SessionClient {
  view: ViewModel = initialView();
  private socket: SocketLike | null = null;
  private listeners: ((vm: ViewModel) => void)[] = [];
  private reconnectDelayMs: number;
  private everConnected = false;
  private closedByUser = false;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(readonly url: string,
              private factory: SocketFactory = defaultFactory,
              reconnectDelayMs = 1000) {
    this.reconnectDelayMs = reconnectDelayMs;
  }

  onUpdate(cb: (vm: ViewModel) => void): void {
    this.listeners.push(cb);
  }

  private emit(): void {
    for (const cb of this.listeners) cb(this.view);
  }

  private update(vm: ViewModel): void {
    this.view = vm;
    this.emit();
  }

  connect(): void {
    this.closedByUser = false;
    const ws = this.factory(this.url);
    this.socket = ws;
    this.update({ ...this.view, connection: "connecting" });
    ws.onopen = () => {
      const reconnecting = this.everConnected;
      this.everConnected = true;
      this.update({ ...this.view, connection: "open", banner: null });
      if (reconnecting) {
        this.send({ type: "snapshot_request" });
      }
    };
    ws.onmessage = (ev) => {
      const msg = parseServerMessage(String(ev.data));
      this.update(applyMessage(this.view, msg));
    };
    ws.onclose = () => {
      if (this.closedByUser) return;
      this.update({
        ...this.view,
        connection: "closed",
        banner: "connection lost, reconnecting",
      });
      this.timer = setTimeout(() => this.connect(), this.reconnectDelayMs);
    };
    ws.onerror = () => { /* onclose follows and handles it */ };
  }

  close(): void {
    this.closedByUser = true;
    if (this.timer !== null) clearTimeout(this.timer);
    this.socket?.close();
  }

  send(msg: ClientMessage): void {
    this.socket?.send(JSON.stringify(msg));
  }

  start(): void {
    this.send({ type: "start" });
  }

  pause(): void {
    this.send({ type: "pause" });
  }

  resume(): void {
    this.send({ type: "resume" });
  }

  sendSetVar(to: string, name: string, value: boolean | number): void {
    this.send(setVar(to, name, value));
  }

  sendChoose(point: string, relation: string): void {
    this.send(choose(point, relation));
  }
}
