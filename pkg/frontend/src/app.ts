// Browser entry point: connect form, sidebar, timeline, input box.
// All protocol state flows through the model reducer; this file only
// wires the DOM to the bridge WebSocket.

import {
  channelsOf,
  newModel,
  renderEvent,
  SERVER_VIEW,
  setActive,
  type TimelineEntry,
  type UiModel,
} from "./model.js";
import { parseBridgeEvent, type BridgeCommand } from "./protocol.js";
import { slashParse } from "./slash.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

class App {
  model: UiModel = newModel();
  ws: WebSocket | null = null;

  readonly form = $<HTMLFormElement>("connect-form");
  readonly statusEl = $<HTMLElement>("status");
  readonly channelsEl = $<HTMLElement>("channels");
  readonly membersEl = $<HTMLElement>("members");
  readonly timelineEl = $<HTMLElement>("timeline");
  readonly inputEl = $<HTMLInputElement>("input");
  readonly inputForm = $<HTMLFormElement>("input-form");
  readonly rawLogEl = $<HTMLElement>("raw-log");

  constructor() {
    this.form.addEventListener("submit", (evt) => {
      evt.preventDefault();
      this.connect();
    });
    this.inputForm.addEventListener("submit", (evt) => {
      evt.preventDefault();
      this.submitInput();
    });
    $<HTMLElement>("raw-toggle").addEventListener("click", () => {
      this.rawLogEl.classList.toggle("hidden");
      this.renderRawLog();
    });
    this.render();
  }

  connect(): void {
    const bridgeUrl = $<HTMLInputElement>("bridge-url").value;
    const host = $<HTMLInputElement>("irc-host").value;
    const port = Number($<HTMLInputElement>("irc-port").value);
    const nick = $<HTMLInputElement>("nick").value;
    const realname = $<HTMLInputElement>("realname").value || nick;
    if (!nick) return;

    this.model = newModel();
    this.model.status = "connecting";
    this.model.ownNick = nick;
    this.ws = new WebSocket(bridgeUrl);
    this.ws.addEventListener("open", () => {
      this.send({ op: "connect", host, port, nick, realname });
    });
    this.ws.addEventListener("message", (evt) => {
      const event = parseBridgeEvent(String(evt.data));
      if (event) {
        renderEvent(this.model, event);
        this.render();
      }
    });
    this.ws.addEventListener("close", () => {
      if (this.model.status !== "disconnected") {
        renderEvent(this.model, { ev: "disconnected", cause: "bridge closed" });
        this.render();
      }
    });
    this.render();
  }

  send(command: BridgeCommand): void {
    this.ws?.send(JSON.stringify(command));
  }

  submitInput(): void {
    const text = this.inputEl.value;
    if (!text.trim()) return;
    const active =
      this.model.activeTarget === SERVER_VIEW ? null : this.model.activeTarget;
    const result = slashParse(text, active);
    if (result.kind === "error") {
      renderEvent(this.model, { ev: "server_error", numeric: 0, text: result.text });
      this.render();
      return;
    }
    this.send(result.command);
    if (result.command.op === "privmsg") {
      // our own messages are not echoed by the server
      const entry: TimelineEntry = {
        kind: "message",
        from: this.model.ownNick ?? "me",
        text: result.command.text,
        ts: Date.now(),
      };
      const entries = this.model.timelines.get(result.command.target) ?? [];
      entries.push(entry);
      this.model.timelines.set(result.command.target, entries);
      this.render();
    }
    this.inputEl.value = "";
  }

  activate(target: string): void {
    setActive(this.model, target);
    this.render();
  }

  render(): void {
    const { model } = this;
    this.statusEl.textContent =
      model.status === "registered"
        ? `connected as ${model.ownNick}`
        : model.status;
    this.statusEl.className = `status-${model.status}`;
    this.inputEl.disabled = model.status !== "registered";

    this.channelsEl.replaceChildren(
      ...[SERVER_VIEW, ...channelsOf(model)].map((target) => {
        const li = document.createElement("li");
        li.textContent = target;
        const unread = model.unread.get(target);
        if (unread) {
          const badge = document.createElement("span");
          badge.className = "badge";
          badge.textContent = String(unread);
          li.append(badge);
        }
        if (target === model.activeTarget) li.classList.add("active");
        li.addEventListener("click", () => this.activate(target));
        return li;
      }),
    );

    const roster = model.members.get(model.activeTarget) ?? [];
    this.membersEl.replaceChildren(
      ...roster.map((nick) => {
        const li = document.createElement("li");
        li.textContent = nick;
        return li;
      }),
    );

    const entries = model.timelines.get(model.activeTarget) ?? [];
    this.timelineEl.replaceChildren(
      ...entries.map((entry) => {
        const div = document.createElement("div");
        div.className = `entry entry-${entry.kind}`;
        const when = new Date(entry.ts).toLocaleTimeString();
        div.textContent = entry.from
          ? `[${when}] <${entry.from}> ${entry.text}`
          : `[${when}] ${entry.text}`;
        return div;
      }),
    );
    this.timelineEl.scrollTop = this.timelineEl.scrollHeight;
    this.renderRawLog();
  }

  renderRawLog(): void {
    if (!this.rawLogEl.classList.contains("hidden")) {
      this.rawLogEl.textContent = this.model.rawLog.slice(-200).join("\n");
    }
  }
}

new App();
