// Pure projection of received wire messages into what the screen shows.
// The view never computes score semantics: replaying the same message log
// always rebuilds the same view, which is also how reconnects recover.

import type { ServerMessage, SnapshotState, TraceEvent } from "./protocol.js";

export interface InstanceBar {
  id: string;
  to: string;
  parent: string | null;
  start: number;
  end: number | null;
  status: "running" | "ended" | "cancelled";
}

export interface ChoicePrompt {
  point: string;
  options: string[];
}

export interface ViewModel {
  connection: "connecting" | "open" | "closed";
  tick: number;
  lanes: Record<string, InstanceBar[]>; // TO id -> bars in start order
  prompts: ChoicePrompt[];
  vars: Record<string, boolean | number | null>; // "TO.name" -> value
  eventLog: TraceEvent[];
  ended: { reason: string; t: number } | null;
  banner: string | null;
}

export function initialView(): ViewModel {
  return {
    connection: "connecting",
    tick: 0,
    lanes: {},
    prompts: [],
    vars: {},
    eventLog: [],
    ended: null,
    banner: null,
  };
}

function upsertPrompt(prompts: ChoicePrompt[], point: string, options: string[]): ChoicePrompt[] {
  const rest = prompts.filter((p) => p.point !== point);
  return [...rest, { point, options: [...options] }];
}

function dropPrompt(prompts: ChoicePrompt[], point: string): ChoicePrompt[] {
  return prompts.filter((p) => p.point !== point);
}

function withBar(lanes: ViewModel["lanes"], to: string,
                 mutate: (bars: InstanceBar[]) => InstanceBar[]): ViewModel["lanes"] {
  return { ...lanes, [to]: mutate(lanes[to] ?? []) };
}

function applyTrace(vm: ViewModel, event: TraceEvent): ViewModel {
  const next: ViewModel = { ...vm, eventLog: [...vm.eventLog, event] };
  switch (event.kind) {
    case "InstanceStarted": {
      const to = event["to"] as string;
      const bar: InstanceBar = {
        id: event["instance"] as string,
        to,
        parent: (event["parent"] as string | null) ?? null,
        start: event.tick,
        end: null,
        status: "running",
      };
      next.lanes = withBar(next.lanes, to, (bars) => [...bars, bar]);
      break;
    }
    case "InstanceEnded":
    case "InstanceCancelled": {
      const to = event["to"] as string;
      const id = event["instance"] as string;
      const status = event.kind === "InstanceEnded" ? "ended" : "cancelled";
      next.lanes = withBar(next.lanes, to, (bars) =>
        bars.map((b) => (b.id === id ? { ...b, end: event.tick, status } : b)));
      break;
    }
    case "VarSet": {
      const key = `${event["to"]}.${event["name"]}`;
      next.vars = { ...next.vars, [key]: event["value"] as boolean | number | null };
      break;
    }
    case "AwaitingChoice":
      next.prompts = upsertPrompt(next.prompts, event["point"] as string,
                                  event["options"] as string[]);
      break;
    case "ChoiceResolved":
      next.prompts = dropPrompt(next.prompts, event["point"] as string);
      break;
    default:
      break; // other kinds only show up in the log
  }
  return next;
}

function applySnapshot(vm: ViewModel, state: SnapshotState): ViewModel {
  const lanes: ViewModel["lanes"] = {};
  const vars: ViewModel["vars"] = {};
  for (const inst of state.instances) {
    const bar: InstanceBar = {
      id: inst.id,
      to: inst.to,
      parent: inst.parent,
      start: inst.start_tick,
      end: inst.end_tick,
      status: inst.status,
    };
    (lanes[inst.to] ??= []).push(bar);
    for (const [name, value] of Object.entries(inst.vars)) {
      vars[`${inst.to}.${name}`] = value;
    }
  }
  for (const bars of Object.values(lanes)) {
    bars.sort((a, b) => a.start - b.start || a.id.localeCompare(b.id));
  }
  let prompts: ChoicePrompt[] = [];
  for (const awaiting of state.awaiting_choices) {
    prompts = upsertPrompt(prompts, awaiting.point, awaiting.options);
  }
  return { ...vm, tick: state.tick, lanes, vars, prompts };
}

export function applyMessage(vm: ViewModel, msg: ServerMessage): ViewModel {
  switch (msg.type) {
    case "tick":
      return { ...vm, tick: msg.t };
    case "trace":
      return applyTrace(vm, msg.event);
    case "awaiting_choice":
      // Redundant with the AwaitingChoice trace event; harmless to re-apply.
      return { ...vm, prompts: upsertPrompt(vm.prompts, msg.point, msg.options) };
    case "snapshot":
      return applySnapshot(vm, msg.state);
    case "ended":
      return { ...vm, ended: { reason: msg.reason, t: msg.t }, prompts: [] };
    case "error":
      return { ...vm, banner: `${msg.code}: ${msg.message}` };
  }
}

export function applyAll(vm: ViewModel, msgs: ServerMessage[]): ViewModel {
  return msgs.reduce(applyMessage, vm);
}
