// Trace replay: load a JSONL trace (the `run` CLI output) and scrub
// through it by tick, rebuilding the view at any position.

import type { ServerMessage, TraceEvent } from "./protocol.js";
import { ViewModel, applyAll, initialView } from "./viewmodel.js";

export interface ReplaySession {
  events: TraceEvent[];
  maxTick: number;
  at(tick: number): ViewModel;
}

export function parseTraceJsonl(text: string): TraceEvent[] {
  const events: TraceEvent[] = [];
  for (const [i, line] of text.split("\n").entries()) {
    const trimmed = line.trim();
    if (!trimmed || trimmed.startsWith("#")) continue;
    let doc: unknown;
    try {
      doc = JSON.parse(trimmed);
    } catch {
      throw new Error(`line ${i + 1} is not JSON`);
    }
    const event = doc as TraceEvent;
    if (typeof event.tick !== "number" || typeof event.kind !== "string") {
      throw new Error(`line ${i + 1} is not a trace event`);
    }
    events.push(event);
  }
  return events;
}

export function loadTrace(text: string): ReplaySession {
  const events = parseTraceJsonl(text);
  const maxTick = events.reduce((m, e) => Math.max(m, e.tick), 0);
  return {
    events,
    maxTick,
    at(tick: number): ViewModel {
      const msgs: ServerMessage[] = events
        .filter((e) => e.tick <= tick)
        .map((e) => ({ type: "trace", event: e }) as ServerMessage);
      const vm = applyAll({ ...initialView(), connection: "open" }, msgs);
      return { ...vm, tick: Math.min(tick, maxTick) };
    },
  };
}
