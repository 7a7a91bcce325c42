// JSON contract spoken over the bridge WebSocket: one object per text
// frame. Field names are load-bearing; do not rename.

export type BridgeCommand =
  | { op: "connect"; host: string; port: number; nick: string; realname?: string }
  | { op: "join"; channel: string }
  | { op: "part"; channel: string; reason?: string }
  | { op: "privmsg"; target: string; text: string }
  | { op: "nick"; nick: string }
  | { op: "quit"; reason?: string }
  | { op: "raw"; line: string };

export type BridgeEvent =
  | { ev: "registered"; text: string }
  | { ev: "message"; from: string; target: string; text: string; ts: number }
  | { ev: "joined"; nick: string; channel: string }
  | { ev: "parted"; nick: string; channel: string }
  | { ev: "names"; channel: string; members: string[] }
  | { ev: "nick_changed"; old: string; new: string }
  | { ev: "server_error"; numeric: number; text: string }
  | { ev: "disconnected"; cause: string };

export function parseBridgeEvent(raw: string): BridgeEvent | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null || !("ev" in data)) {
    return null;
  }
  return data as BridgeEvent;
}
