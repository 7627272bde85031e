// Wire messages, one JSON object per WebSocket text frame.
// Mirror of docs/wire-schema.json on the server side.

export interface TraceEvent {
  tick: number;
  kind: string;
  [field: string]: unknown;
}

export type ServerMessage =
  | { type: "tick"; t: number }
  | { type: "trace"; event: TraceEvent }
  | { type: "awaiting_choice"; point: string; options: string[] }
  | { type: "snapshot"; state: SnapshotState }
  | { type: "ended"; reason: string; t: number }
  | { type: "error"; code: string; message: string };

export interface SnapshotInstance {
  id: string;
  to: string;
  status: "running" | "ended" | "cancelled";
  start_tick: number;
  end_tick: number | null;
  parent: string | null;
  vars: Record<string, boolean | number | null>;
}

export interface SnapshotState {
  tick: number;
  instances: SnapshotInstance[];
  armed_jumps: unknown[];
  awaiting_choices: { point: string; options: string[] }[];
}

export type ClientMessage =
  | { type: "start" }
  | { type: "pause" }
  | { type: "resume" }
  | { type: "snapshot_request" }
  | { type: "set_var"; to: string; name: string; value: boolean | number }
  | { type: "choose"; point: string; relation: string };

const SERVER_TYPES = new Set([
  "tick", "trace", "awaiting_choice", "snapshot", "ended", "error",
]);

export function parseServerMessage(raw: string): ServerMessage {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    throw new Error(`frame is not JSON: ${raw.slice(0, 80)}`);
  }
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    throw new Error("frame is not an object");
  }
  const msg = doc as { type?: unknown };
  if (typeof msg.type !== "string" || !SERVER_TYPES.has(msg.type)) {
    throw new Error(`unknown server message type: ${String(msg.type)}`);
  }
  return doc as ServerMessage;
}

export function setVar(to: string, name: string, value: boolean | number): ClientMessage {
  return { type: "set_var", to, name, value };
}

export function choose(point: string, relation: string): ClientMessage {
  return { type: "choose", point, relation };
}
