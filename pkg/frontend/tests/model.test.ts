import { describe, expect, it } from "vitest";

import { channelsOf, newModel, renderEvent, setActive, SERVER_VIEW } from "../src/model.js";
import type { BridgeEvent } from "../src/protocol.js";

function connectedModel() {
  const model = newModel();
  model.ownNick = "me";
  renderEvent(model, { ev: "registered", text: "Welcome to srv" });
  return model;
}

describe("renderEvent", () => {
  it("registered flips status and logs to the server view", () => {
    const model = connectedModel();
    expect(model.status).toBe("registered");
    const entries = model.timelines.get(SERVER_VIEW)!;
    expect(entries[entries.length - 1].text).toBe("Welcome: Welcome to srv");
  });

  it("own join opens a channel view and tracks the roster", () => {
    const model = connectedModel();
    renderEvent(model, { ev: "joined", nick: "me", channel: "#demo" });
    expect(channelsOf(model)).toEqual(["#demo"]);
    renderEvent(model, { ev: "names", channel: "#demo", members: ["me", "ana"] });
    expect(model.members.get("#demo")).toEqual(["me", "ana"]);
  });

  it("messages land in their channel timeline in arrival order", () => {
    const model = connectedModel();
    renderEvent(model, { ev: "joined", nick: "me", channel: "#demo" });
    setActive(model, "#demo");
    const events: BridgeEvent[] = [
      { ev: "message", from: "ana", target: "#demo", text: "first", ts: 1 },
      { ev: "message", from: "bob", target: "#demo", text: "second", ts: 2 },
    ];
    events.forEach((event) => renderEvent(model, event));
    const texts = model.timelines.get("#demo")!.filter((e) => e.kind === "message");
    expect(texts.map((e) => e.text)).toEqual(["first", "second"]);
  });

  it("messages for an inactive channel bump the unread badge", () => {
    const model = connectedModel();
    renderEvent(model, { ev: "joined", nick: "me", channel: "#quiet" });
    expect(model.activeTarget).toBe(SERVER_VIEW);
    renderEvent(model, { ev: "message", from: "ana", target: "#quiet", text: "pst", ts: 1 });
    expect(model.unread.get("#quiet")).toBe(1);
    setActive(model, "#quiet");
    expect(model.unread.get("#quiet")).toBeUndefined();
  });

  it("members mirror joined, parted and nick_changed events", () => {
    const model = connectedModel();
    renderEvent(model, { ev: "joined", nick: "me", channel: "#c" });
    renderEvent(model, { ev: "joined", nick: "ana", channel: "#c" });
    renderEvent(model, { ev: "names", channel: "#c", members: ["me", "ana"] });
    renderEvent(model, { ev: "nick_changed", old: "ana", new: "anita" });
    expect(model.members.get("#c")).toEqual(["me", "anita"]);
    renderEvent(model, { ev: "parted", nick: "anita", channel: "#c" });
    expect(model.members.get("#c")).toEqual(["me"]);
  });

  it("own part closes the channel view", () => {
    const model = connectedModel();
    renderEvent(model, { ev: "joined", nick: "me", channel: "#gone" });
    setActive(model, "#gone");
    renderEvent(model, { ev: "parted", nick: "me", channel: "#gone" });
    expect(channelsOf(model)).toEqual([]);
    expect(model.activeTarget).toBe(SERVER_VIEW);
  });

  it("server_error renders inline in the active view", () => {
    const model = connectedModel();
    renderEvent(model, { ev: "joined", nick: "me", channel: "#err" });
    setActive(model, "#err");
    renderEvent(model, { ev: "server_error", numeric: 403, text: "No such channel" });
    const entries = model.timelines.get("#err")!;
    expect(entries[entries.length - 1]).toMatchObject({
      kind: "error",
      text: "error 403: No such channel",
    });
  });

  it("disconnected flips status and notes the cause", () => {
    const model = connectedModel();
    renderEvent(model, { ev: "disconnected", cause: "server went away" });
    expect(model.status).toBe("disconnected");
    const entries = model.timelines.get(SERVER_VIEW)!;
    expect(entries[entries.length - 1].text).toContain("server went away");
  });

  it("every rendered fact traces to a received event", () => {
    const model = connectedModel();
    const events: BridgeEvent[] = [
      { ev: "joined", nick: "me", channel: "#trace" },
      { ev: "message", from: "ana", target: "#trace", text: "x", ts: 3 },
    ];
    events.forEach((event) => renderEvent(model, event));
    expect(model.rawLog.length).toBe(1 + events.length); // registered + these
  });
});
