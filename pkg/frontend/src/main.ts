// Browser entry: live session view with controls, or trace replay when a
// JSONL file is dropped on the page.

import { SessionClient } from "./client.js";
import { loadTrace } from "./replay.js";
import { renderHTML } from "./ui.js";
import type { ViewModel } from "./viewmodel.js";

const root = document.getElementById("app");
if (root === null) throw new Error("missing #app element");

const wsUrl = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/ws`;
const client = new SessionClient(wsUrl);

function draw(vm: ViewModel): void {
  root!.innerHTML = renderHTML(vm);
}

client.onUpdate(draw);
client.connect();

document.getElementById("start")?.addEventListener("click", () => client.start());
document.getElementById("pause")?.addEventListener("click", () => client.pause());
document.getElementById("resume")?.addEventListener("click", () => client.resume());

root.addEventListener("click", (ev) => {
  const target = ev.target as HTMLElement;
  if (target.matches("button.choice")) {
    client.sendChoose(target.dataset["point"]!, target.dataset["relation"]!);
  }
});

root.addEventListener("change", (ev) => {
  const input = ev.target as HTMLInputElement;
  if (!input.matches(".var input")) return;
  const to = input.dataset["to"]!;
  const name = input.dataset["name"]!;
  if (input.dataset["kind"] === "int") {
    client.sendSetVar(to, name, Number(input.value));
  } else {
    client.sendSetVar(to, name, input.checked);
  }
});

// Drop a .jsonl trace anywhere to switch into replay mode with a scrubber.
document.addEventListener("dragover", (ev) => ev.preventDefault());
document.addEventListener("drop", async (ev) => {
  ev.preventDefault();
  const file = ev.dataTransfer?.files[0];
  if (!file) return;
  const replay = loadTrace(await file.text());
  client.close();
  const scrub = document.getElementById("scrubber") as HTMLInputElement;
  scrub.hidden = false;
  scrub.max = String(replay.maxTick);
  const show = (tick: number) => draw(replay.at(tick));
  scrub.addEventListener("input", () => show(Number(scrub.value)));
  show(replay.maxTick);
});
