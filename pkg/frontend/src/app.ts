// Page wiring: the live board stays visible; suggestion, command, and stats
// panels dock beside it.  All trust decisions belong to the server; user
// text is sent raw and moderated there.

import { ApiClient } from "./api.js";
import { scoreTrendSvg, statsSummaryLines, winRateLabel } from "./charts.js";
import { connectLive } from "./live.js";
import { frameCaption, policyBars, renderGrid } from "./render.js";
import type { LiveFrame } from "./types.js";

const api = new ApiClient(window.location.origin);

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function setConnection(state: string): void {
  const badge = el<HTMLSpanElement>("connection");
  badge.textContent = state;
  badge.className = `badge ${state}`;
}

function drawFrame(frame: LiveFrame): void {
  const board = el<HTMLPreElement>("board");
  board.innerHTML = renderGrid(frame)
    .map((row) => row.map((c) => `<span class="${c.cssClass}">${c.glyph}</span>`).join(""))
    .join("\n");
  el<HTMLDivElement>("caption").textContent = frameCaption(frame);
  const bars = policyBars(frame)
    .map((bar) =>
      `<div class="bar${bar.chosen ? " chosen" : ""}">` +
      `<span class="label">${bar.action}</span>` +
      `<span class="fill" style="width:${(bar.weight * 100).toFixed(1)}%"></span>` +
      `<span class="pct">${bar.percent}</span></div>`)
    .join("");
  el<HTMLDivElement>("policy").innerHTML = bars;
}

function log(line: string): void {
  const node = el<HTMLPreElement>("responses");
  node.textContent = `${line}\n${node.textContent ?? ""}`.slice(0, 4000);
}

async function refreshGames(): Promise<void> {
  const games = await api.games();
  const select = el<HTMLSelectElement>("game-select");
  select.innerHTML = games.map((g) => `<option value="${g}">${g}</option>`).join("");
}

async function showStats(): Promise<void> {
  const game = el<HTMLSelectElement>("game-select").value || undefined;
  const report = await api.stats(game);
  el<HTMLDivElement>("stats-title").textContent = `stats: ${report.scope}`;
  el<HTMLDivElement>("stats-summary").innerHTML =
    statsSummaryLines(report).map((l) => `<div>${l}</div>`).join("");
  el<HTMLDivElement>("win-rate").textContent = winRateLabel(report);
  el<HTMLDivElement>("trend").innerHTML = scoreTrendSvg(report);
}

function hintBias(): number[] {
  return ["up", "down", "left", "right", "nil"].map(
    (name) => Number(el<HTMLInputElement>(`bias-${name}`).value));
}

function wire(): void {
  el<HTMLButtonElement>("suggest-play").onclick = async () => {
    const result = await api.submitSuggestion({
      kind: "play-game",
      game: el<HTMLSelectElement>("game-select").value,
      submitter: el<HTMLInputElement>("submitter").value,
    });
    log(result.accepted ? "suggestion accepted" : `rejected: ${result.reason}`);
  };
  el<HTMLButtonElement>("suggest-upload").onclick = async () => {
    const result = await api.submitSuggestion({
      kind: "play-game",
      gdf: el<HTMLTextAreaElement>("gdf-text").value,
      submitter: el<HTMLInputElement>("submitter").value,
    });
    log(result.accepted ? "suggestion accepted" : `rejected: ${result.reason}`);
    if (result.accepted) void refreshGames();
  };
  el<HTMLButtonElement>("suggest-hint").onclick = async () => {
    const result = await api.submitSuggestion({
      kind: "strategy-hint",
      bias: hintBias(),
      submitter: el<HTMLInputElement>("submitter").value,
    });
    log(result.accepted ? "hint accepted for the next episode" : `rejected: ${result.reason}`);
  };
  el<HTMLButtonElement>("send-command").onclick = async () => {
    const text = el<HTMLInputElement>("command-text").value;
    log(`> ${text}`);
    log(await api.command(text));
  };
  el<HTMLButtonElement>("show-stats").onclick = () => void showStats();
  el<HTMLButtonElement>("pause").onclick = () => void api.pause();
  el<HTMLButtonElement>("resume").onclick = () => void api.resume();
}

async function start(): Promise<void> {
  wire();
  await refreshGames();
  connectLive(window.location.origin, drawFrame, { onState: setConnection });
  setInterval(() => {
    void api.status().then((status) => {
      el<HTMLDivElement>("status-line").textContent =
        `fingerprint ${status.fingerprint} · episode ${status.episode}` +
        `${status.paused ? " · paused" : ""} · pending ${status.pending_suggestions}`;
    });
  }, 2000);
}

window.addEventListener("DOMContentLoaded", () => void start());
