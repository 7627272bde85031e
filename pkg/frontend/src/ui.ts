// DOM-free HTML rendering of the view, plus the event wiring used by
// main.ts.  Keeping render a string function makes it testable headlessly.

import type { ViewModel } from "./viewmodel.js";

const esc = (s: string): string =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
   .replace(/"/g, "&quot;");

export function renderBannerHTML(vm: ViewModel): string {
  if (!vm.banner) return "";
  return `<div class="banner">${esc(vm.banner)}</div>`;
}

export function renderStatusHTML(vm: ViewModel): string {
  const state = vm.ended
    ? `ended (${esc(vm.ended.reason)} at tick ${vm.ended.t})`
    : vm.connection;
  return `<div class="status">tick <b class="tick">${vm.tick}</b> | ${state}</div>`;
}

export function renderTimelineHTML(vm: ViewModel, pxPerTick = 24): string {
  const horizon = Math.max(vm.tick + 1, 8);
  const rows: string[] = [];
  for (const to of Object.keys(vm.lanes).sort()) {
    const bars = (vm.lanes[to] ?? []).map((b) => {
      const end = b.end ?? vm.tick;
      const width = Math.max((end - b.start) * pxPerTick, 4);
      return `<div class="bar ${b.status}" title="${esc(b.id)} [${b.start}, ${b.end ?? "…"}]"` +
        ` style="left:${b.start * pxPerTick}px;width:${width}px"></div>`;
    });
    rows.push(`<div class="lane"><span class="lane-label">${esc(to)}</span>` +
      `<div class="lane-track" style="width:${horizon * pxPerTick}px">${bars.join("")}</div></div>`);
  }
  const cursor = `<div class="cursor" style="left:${vm.tick * pxPerTick}px"></div>`;
  return `<div class="timeline">${cursor}${rows.join("")}</div>`;
}

export function renderPromptsHTML(vm: ViewModel): string {
  if (vm.prompts.length === 0) return "";
  const blocks = vm.prompts.map((p) => {
    const buttons = p.options.map((opt) =>
      `<button class="choice" data-point="${esc(p.point)}" data-relation="${esc(opt)}">${esc(opt)}</button>`);
    return `<div class="prompt">choice at <b>${esc(p.point)}</b>: ${buttons.join(" ")}</div>`;
  });
  return `<div class="prompts">${blocks.join("")}</div>`;
}

export function renderVarsHTML(vm: ViewModel): string {
  const rows = Object.keys(vm.vars).sort().map((key) => {
    const value = vm.vars[key] ?? null;
    const [to, name] = [key.slice(0, key.indexOf(".")), key.slice(key.indexOf(".") + 1)];
    if (typeof value === "number") {
      return `<label class="var">${esc(key)} <input type="number" data-to="${esc(to)}"` +
        ` data-name="${esc(name)}" data-kind="int" value="${value}"></label>`;
    }
    const checked = value === true ? " checked" : "";
    return `<label class="var">${esc(key)} <input type="checkbox" data-to="${esc(to)}"` +
      ` data-name="${esc(name)}" data-kind="bool"${checked}></label>`;
  });
  return `<div class="vars">${rows.join("")}</div>`;
}

export function renderLogHTML(vm: ViewModel, limit = 200): string {
  const items = vm.eventLog.slice(-limit).map((e) =>
    `<li><code>${esc(JSON.stringify(e))}</code></li>`);
  return `<ol class="log">${items.join("")}</ol>`;
}

export function renderHTML(vm: ViewModel): string {
  return [
    renderBannerHTML(vm),
    renderStatusHTML(vm),
    renderTimelineHTML(vm),
    renderPromptsHTML(vm),
    renderVarsHTML(vm),
    renderLogHTML(vm),
  ].join("\n");
}
