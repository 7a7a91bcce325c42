// UI state and the event reducer. Every fact in the model traces to a
// received BridgeEvent; the UI never invents protocol state.

import type { BridgeEvent } from "./protocol.js";

export type ConnectionStatus = "disconnected" | "connecting" | "registered";

export interface TimelineEntry {
  kind: "message" | "notice" | "error";
  from?: string;
  text: string;
  ts: number;
}

export interface UiModel {
  status: ConnectionStatus;
  ownNick: string | null;
  activeTarget: string; // a channel name, or "server" for the status view
  timelines: Map<string, TimelineEntry[]>;
  members: Map<string, string[]>;
  unread: Map<string, number>;
  rawLog: string[];
}

export const SERVER_VIEW = "server";

export function newModel(): UiModel {
  return {
    status: "disconnected",
    ownNick: null,
    activeTarget: SERVER_VIEW,
    timelines: new Map([[SERVER_VIEW, []]]),
    members: new Map(),
    unread: new Map(),
    rawLog: [],
  };
}

function timeline(model: UiModel, target: string): TimelineEntry[] {
  let entries = model.timelines.get(target);
  if (!entries) {
    entries = [];
    model.timelines.set(target, entries);
  }
  return entries;
}

function append(model: UiModel, target: string, entry: TimelineEntry): void {
  timeline(model, target).push(entry);
  if (target !== model.activeTarget && entry.kind === "message") {
    model.unread.set(target, (model.unread.get(target) ?? 0) + 1);
  }
}

function notice(model: UiModel, target: string, text: string, ts = Date.now()): void {
  append(model, target, { kind: "notice", text, ts });
}

/** Apply one bridge event; returns the same (mutated) model. */
export function renderEvent(model: UiModel, event: BridgeEvent): UiModel {
  model.rawLog.push(JSON.stringify(event));
  switch (event.ev) {
    case "registered":
      model.status = "registered";
      notice(model, SERVER_VIEW, `Welcome: ${event.text}`);
      break;
    case "message":
      append(model, event.target, {
        kind: "message",
        from: event.from,
        text: event.text,
        ts: event.ts,
      });
      break;
    case "joined": {
      if (event.nick === model.ownNick && !model.timelines.has(event.channel)) {
        timeline(model, event.channel); // open the channel view
      }
      const roster = model.members.get(event.channel) ?? [];
      if (!roster.includes(event.nick)) {
        model.members.set(event.channel, [...roster, event.nick]);
      }
      notice(model, event.channel, `${event.nick} joined ${event.channel}`);
      break;
    }
    case "parted": {
      const roster = model.members.get(event.channel) ?? [];
      model.members.set(
        event.channel,
        roster.filter((nick) => nick !== event.nick),
      );
      if (event.nick === model.ownNick) {
        model.timelines.delete(event.channel);
        model.members.delete(event.channel);
        model.unread.delete(event.channel);
        if (model.activeTarget === event.channel) {
          model.activeTarget = SERVER_VIEW;
        }
        notice(model, SERVER_VIEW, `left ${event.channel}`);
      } else {
        notice(model, event.channel, `${event.nick} left ${event.channel}`);
      }
      break;
    }
    case "names":
      model.members.set(event.channel, [...event.members]);
      notice(model, event.channel, `members: ${event.members.join(" ")}`);
      break;
    case "nick_changed": {
      if (event.old === model.ownNick) {
        model.ownNick = event.new;
      }
      for (const [channel, roster] of model.members) {
        if (roster.includes(event.old)) {
          model.members.set(
            channel,
            roster.map((nick) => (nick === event.old ? event.new : nick)),
          );
          notice(model, channel, `${event.old} is now ${event.new}`);
        }
      }
      break;
    }
    case "server_error":
      append(model, model.activeTarget, {
        kind: "error",
        text: event.numeric ? `error ${event.numeric}: ${event.text}` : event.text,
        ts: Date.now(),
      });
      break;
    case "disconnected":
      model.status = "disconnected";
      notice(model, SERVER_VIEW, `disconnected: ${event.cause}`);
      break;
  }
  return model;
}

export function channelsOf(model: UiModel): string[] {
  return [...model.timelines.keys()].filter((target) => target !== SERVER_VIEW);
}

export function setActive(model: UiModel, target: string): void {
  model.activeTarget = target;
  model.unread.delete(target);
}
