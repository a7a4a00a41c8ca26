// Typed client for the /v1 control protocol.  The console never mutates
// server state except through these documented endpoints.

import type { StatsReport, StatusInfo, SuggestionDraft, SuggestionResult } from "./types.js";

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async status(): Promise<StatusInfo> {
    const res = await fetch(this.url("/v1/status"));
    if (!res.ok) throw new Error(`status ${res.status}`);
    return res.json();
  }

  async games(): Promise<string[]> {
    const res = await fetch(this.url("/v1/games"));
    if (!res.ok) throw new Error(`status ${res.status}`);
    return (await res.json()).games;
  }

  async stats(game?: string): Promise<StatsReport> {
    const query = game ? `?game=${encodeURIComponent(game)}` : "";
    const res = await fetch(this.url(`/v1/stats${query}`));
    if (!res.ok) throw new Error(`status ${res.status}`);
    return res.json();
  }

  /** Server acknowledgment verbatim: accepted, or rejected with a rule id. */
  async submitSuggestion(draft: SuggestionDraft): Promise<SuggestionResult> {
    const res = await fetch(this.url("/v1/suggestions"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(draft),
    });
    return res.json();
  }

  async uploadGame(gdf: string): Promise<{ accepted: boolean; name?: string; reason?: string }> {
    const res = await fetch(this.url("/v1/games"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ gdf }),
    });
    return res.json();
  }

  async command(text: string): Promise<string> {
    const res = await fetch(this.url("/v1/command"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text }),
    });
    if (!res.ok) throw new Error(`status ${res.status}`);
    return (await res.json()).response;
  }

  async pause(): Promise<void> {
    await fetch(this.url("/v1/admin/pause"), { method: "POST" });
  }

  async resume(): Promise<void> {
    await fetch(this.url("/v1/admin/resume"), { method: "POST" });
  }
}
