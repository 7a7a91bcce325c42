// Input-box parsing: slash commands map to bridge commands, anything
// else is a message to the active channel.

import type { BridgeCommand } from "./protocol.js";

export type SlashResult =
  | { kind: "command"; command: BridgeCommand }
  | { kind: "error"; text: string };

export function slashParse(input: string, activeChannel: string | null): SlashResult {
  const text = input.trim();
  if (!text.startsWith("/")) {
    if (!activeChannel) {
      return { kind: "error", text: "no active channel; /join one first" };
    }
    return { kind: "command", command: { op: "privmsg", target: activeChannel, text } };
  }

  const [verb, ...rest] = text.slice(1).split(" ");
  const arg = rest.join(" ");
  switch (verb.toLowerCase()) {
    case "join":
      if (!rest[0]) return { kind: "error", text: "usage: /join #channel" };
      return { kind: "command", command: { op: "join", channel: rest[0] } };
    case "msg": {
      const [target, ...words] = rest;
      if (!target || words.length === 0) {
        return { kind: "error", text: "usage: /msg <target> <text>" };
      }
      return {
        kind: "command",
        command: { op: "privmsg", target, text: words.join(" ") },
      };
    }
    case "nick":
      if (!rest[0]) return { kind: "error", text: "usage: /nick <nick>" };
      return { kind: "command", command: { op: "nick", nick: rest[0] } };
    case "part": {
      const channel = rest[0]?.startsWith("#") ? rest[0] : activeChannel;
      if (!channel) return { kind: "error", text: "usage: /part [#channel] [reason]" };
      const reason = rest[0]?.startsWith("#") ? rest.slice(1).join(" ") : arg;
      return {
        kind: "command",
        command: reason ? { op: "part", channel, reason } : { op: "part", channel },
      };
    }
    case "quit":
      return {
        kind: "command",
        command: arg ? { op: "quit", reason: arg } : { op: "quit" },
      };
    case "raw":
      if (!arg) return { kind: "error", text: "usage: /raw <line>" };
      return { kind: "command", command: { op: "raw", line: arg } };
    default:
      return { kind: "error", text: `unknown command: /${verb}` };
  }
}
