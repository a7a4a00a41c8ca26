"""Statistics reports: delimited tables plus rendered figures.

Everything here is read-only over StatsReport values, so it works equally
against a live runtime or a restored snapshot.
"""

from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")  # file rendering only; never needs a display
import matplotlib.pyplot as plt

from .runtime import Runtime, StatsReport

CSV_COLUMNS = ["scope", "episodes", "wins", "win_rate", "mean_score",
               "max_score", "recent_mean", "model_steps", "fingerprint"]


def collect_reports(runtime: Runtime) -> list[StatsReport]:
    """Aggregate report first, then one per game."""
    return [runtime.stats()] + [runtime.stats(name) for name in runtime.game_names()]


def write_stats_csv(reports: list[StatsReport], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in reports:
            writer.writerow([
                r.scope, r.episodes, r.wins,
                "" if r.win_rate is None else f"{r.win_rate:.4f}",
                f"{r.mean_score:.4f}", r.max_score,
                "" if r.recent_mean is None else f"{r.recent_mean:.4f}",
                r.model_steps, r.fingerprint,
            ])


def plot_win_rates(reports: list[StatsReport], path: str) -> None:
    games = [r for r in reports if r.scope != "all"]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    names = [r.scope for r in games]
    rates = [0.0 if r.win_rate is None else r.win_rate for r in games]
    ax.bar(names, rates, color="#4878cf")
    ax.set_ylim(0, 1)
    ax.set_ylabel("win rate")
    ax.set_title("Win rate per game")
    ax.tick_params(axis="x", rotation=20)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_score_trend(runtime: Runtime, game: str, path: str) -> None:
    scores = [e["score"] for e in runtime.episode_events(game)]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    if scores:
        ax.plot(range(1, len(scores) + 1), scores, marker="o", markersize=3,
                linewidth=1, color="#4878cf")
    ax.set_xlabel("episode")
    ax.set_ylabel("score")
    ax.set_title(f"Score trend: {game}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(runtime: Runtime, out_dir: str) -> list[str]:
    """CSV table plus PNG figures; returns the files written."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    reports = collect_reports(runtime)
    csv_path = os.path.join(out_dir, "stats.csv")
    write_stats_csv(reports, csv_path)
    written.append(csv_path)
    win_path = os.path.join(out_dir, "win_rates.png")
    plot_win_rates(reports, win_path)
    written.append(win_path)
    for name in runtime.game_names():
        trend_path = os.path.join(out_dir, f"score_trend_{name}.png")
        plot_score_trend(runtime, name, trend_path)
        written.append(trend_path)
    return written
