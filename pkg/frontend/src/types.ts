// Wire types for the /v1 control protocol.

export const ACTION_NAMES = ["Up", "Down", "Left", "Right", "Nil"] as const;

// Bit positions of sprite kinds in a grid observation cell.
export const KIND_BITS = {
  avatar: 0,
  solid: 1,
  collectible: 2,
  lethal: 3,
  chaser: 4,
  key: 5,
  door: 6,
  goal: 7,
} as const;

export interface LiveFrame {
  seq: number;
  game: string;
  episode: number;
  tick: number;
  score: number;
  grid: number[][]; // [y][x] bit-set over sprite kinds
  action: number;
  policy: number[]; // distribution over the five actions
}

export interface StatusInfo {
  game: string | null;
  tick: number;
  score: number;
  episode: number;
  fingerprint: string;
  uptime_seconds: number;
  pending_suggestions: number;
  active_hint: boolean;
  games: string[];
  paused?: boolean;
}

export interface StatsReport {
  scope: string;
  episodes: number;
  wins: number;
  win_rate: number | null;
  mean_score: number;
  max_score: number;
  recent_scores: number[];
  recent_mean: number | null;
  model_steps: number;
  fingerprint: string;
}

export type SuggestionKind = "play-game" | "strategy-hint" | "query-stats";

export interface SuggestionDraft {
  kind: SuggestionKind;
  game?: string;
  gdf?: string;
  bias?: number[];
  submitter?: string;
}

export interface SuggestionResult {
  accepted: boolean;
  reason?: string; // rule id only; the server never echoes content
  stats?: StatsReport;
}

export type View = "live" | "stats" | "suggest" | "command";

export interface ConsoleState {
  connection: "connecting" | "open" | "reconnecting" | "closed";
  view: View;
  lastResponses: string[];
}
