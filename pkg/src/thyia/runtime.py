"""The always-on loop: schedules games, plays episodes, trains, tunes, persists.

One coordinator thread owns the game loop and is the only writer of agent
state.  The control protocol talks to it exclusively through the moderated
suggestion queue and read-only stats views, so no suggestion content can ever
crash the loop: every failure becomes an event in the log.
"""

from __future__ import annotations

import json
import os
import queue
import random
import shutil
import threading
import time
from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np

from .game import NUM_ACTIONS, ScoreBounds, builtin_games
from .gdf import GameSpec, GdfError, parse_gdf, serialize_gdf
from .learner import (
    FeatureExtractor,
    GuidanceModel,
    ModelWeights,
    ReplayBuffer,
    Trainer,
    init_model,
    load_model,
    policy_target,
    record_episode,
    save_model,
)
from .ntbea import TuningConfig, TuningProblem, run_ntbea
from .params import (
    AgentFingerprint,
    ParameterSet,
    default_params,
    derive_seed,
    parameter_set_from_text,
    shared_default_space,
)
from .planner import RheaPlanner, play_episode

SNAPSHOT_VERSION = 1
SNAPSHOT_ENV = "THYIA_SNAPSHOT_DIR"

PLAY_GAME = "play-game"
STRATEGY_HINT = "strategy-hint"
QUERY_STATS = "query-stats"
SUGGESTION_KINDS = (PLAY_GAME, STRATEGY_HINT, QUERY_STATS)


class SnapshotError(RuntimeError):
    """Snapshot directory missing, incomplete, or unreadable."""


# ---------------------------------------------------------------------------
# moderation

def moderation_filter(text: str, blocklist: Iterable[tuple[str, str]]) -> str | None:
    """Case-insensitive blocklist match; returns the rule id or None to pass.

    Only the rule id is ever reported, never the matched content.
    """
    lowered = (text or "").lower()
    for rule_id, pattern in blocklist:
        if pattern.lower() in lowered:
            return rule_id
    return None


def load_blocklist(path: str) -> list[tuple[str, str]]:
    """One pattern per line; rule ids are stable line-based tags."""
    rules = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            pattern = line.strip()
            if pattern and not pattern.startswith("#"):
                rules.append((f"blocklist-{i + 1}", pattern))
    return rules


@dataclass
class Suggestion:
    kind: str
    game: str | None = None
    gdf: str | None = None
    bias: list[float] | None = None
    submitter: str = ""
    timestamp: float = 0.0
    status: str = "pending"  # pending | accepted | rejected

    def text_fields(self) -> list[str]:
        fields = [self.submitter]
        if self.game:
            fields.append(self.game)
        if self.gdf:
            fields.append(self.gdf)
        return fields


@dataclass
class EpisodeRecord:
    episode: int
    game: str
    fingerprint: str
    model_version: int
    seed: int
    ticks: int
    score: int
    outcome: str
    actions: list[int]

    def to_event(self) -> dict:
        return {"type": "episode", **asdict(self)}


@dataclass
class StatsReport:
    scope: str  # "all" or a game id
    episodes: int
    wins: int
    win_rate: float | None
    mean_score: float
    max_score: int
    recent_scores: list[int]
    recent_mean: float | None
    model_steps: int
    fingerprint: str

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RuntimeConfig:
    master_seed: int = 0
    params: ParameterSet = field(default_factory=default_params)
    games: list[str] | None = None  # None = full built-in library
    learning: bool = True
    tune_interval: int = 0  # episodes per game between tuning runs; 0 disables
    tune_budget: int = 20
    tune_episodes: int = 2
    blocklist: list[tuple[str, str]] = field(default_factory=list)
    max_level_area: int = 2500
    stats_window: int = 20
    wallclock_ms: float | None = None  # live-play tick deadline; breaks trace determinism


class _GameSlot:
    """Everything the agent knows about one game."""

    def __init__(self, spec: GameSpec):
        self.spec = spec
        self.extractor = FeatureExtractor(spec)
        self.bounds = ScoreBounds()
        self.model: ModelWeights | None = None
        self.buffer: ReplayBuffer | None = None
        self.trainer: Trainer | None = None


class Runtime:
    def __init__(self, config: RuntimeConfig | None = None):
        self.config = config or RuntimeConfig()
        self.params = self.config.params
        library = builtin_games()
        if self.config.games is not None:
            missing = [g for g in self.config.games if g not in library]
            if missing:
                raise ValueError(f"unknown games: {missing}")
            library = {g: library[g] for g in self.config.games}
        self.slots: dict[str, _GameSlot] = {name: _GameSlot(spec) for name, spec in library.items()}

        self.episode_index = 0
        self.schedule_pos = 0
        self.events: list[dict] = []
        self.started_at = time.time()

        self._lock = threading.Lock()
        self.play_queue: list[str] = []
        self.hint_queue: list[list[float]] = []
        self._subscribers: list[queue.Queue] = []
        self._frame_seq = 0
        self.cycle_lock = threading.Lock()  # held for the duration of one episode
        self.tuner_state: dict | None = None

        self.current_game: str | None = None
        self.current_tick = 0
        self.current_score = 0

    # -- identity -------------------------------------------------------------

    @property
    def fingerprint(self) -> AgentFingerprint:
        return AgentFingerprint(self.params, self.config.master_seed)

    # -- events and stats -------------------------------------------------------

    def log_event(self, event: dict) -> None:
        self.events.append(event)

    def episode_events(self, game: str | None = None) -> list[dict]:
        return [e for e in self.events
                if e.get("type") == "episode" and (game is None or e.get("game") == game)]

    def stats(self, game: str | None = None) -> StatsReport:
        """Pure function of the event log (plus current model/fingerprint)."""
        if game is not None and game not in self.slots:
            raise KeyError(game)
        eps = self.episode_events(game)
        scores = [e["score"] for e in eps]
        wins = sum(1 for e in eps if e["outcome"] == "win")
        recent = scores[-self.config.stats_window:]
        model_steps = 0
        if game is not None:
            slot = self.slots[game]
            model_steps = slot.model.step if slot.model else 0
        else:
            model_steps = sum(s.model.step for s in self.slots.values() if s.model)
        return StatsReport(
            scope=game or "all",
            episodes=len(eps),
            wins=wins,
            win_rate=(wins / len(eps)) if eps else None,
            mean_score=(sum(scores) / len(scores)) if scores else 0.0,
            max_score=max(scores) if scores else 0,
            recent_scores=recent,
            recent_mean=(sum(recent) / len(recent)) if recent else None,
            model_steps=model_steps,
            fingerprint=self.fingerprint.short_hash(),
        )

    def game_names(self) -> list[str]:
        return list(self.slots)

    # -- suggestions ------------------------------------------------------------

    def moderate(self, text: str) -> str | None:
        return moderation_filter(text, self.config.blocklist)

    def check_inline_gdf(self, text: str) -> tuple[GameSpec | None, str | None]:
        """Structural moderation: must parse and stay within the area cap."""
        try:
            spec = parse_gdf(text)
        except GdfError as exc:
            return None, f"structural:{exc.code}"
        if spec.width * spec.height > self.config.max_level_area:
            return None, "structural:level-area"
        return spec, None

    def enqueue_suggestion(self, suggestion: Suggestion) -> tuple[bool, str | None]:
        """Moderate every text field exactly once, then queue FIFO per kind.

        Returns (accepted, rule_id_or_reason).  Rejections never echo content.
        """
        if suggestion.kind not in SUGGESTION_KINDS:
            return self._reject(suggestion, "unknown-kind")
        for text in suggestion.text_fields():
            rule = self.moderate(text)
            if rule is not None:
                return self._reject(suggestion, rule)

        if suggestion.kind == PLAY_GAME:
            if suggestion.gdf:
                spec, reason = self.check_inline_gdf(suggestion.gdf)
                if spec is None:
                    return self._reject(suggestion, reason)
                with self._lock:
                    if spec.name in self.slots:
                        return self._reject(suggestion, "duplicate-name")
                    self.slots[spec.name] = _GameSlot(spec)
                    self.play_queue.append(spec.name)
            elif suggestion.game:
                if suggestion.game not in self.slots:
                    return self._reject(suggestion, "unknown-game")
                with self._lock:
                    self.play_queue.append(suggestion.game)
            else:
                return self._reject(suggestion, "missing-game")
        elif suggestion.kind == STRATEGY_HINT:
            bias = suggestion.bias
            if not bias or len(bias) != NUM_ACTIONS or not all(
                    isinstance(b, (int, float)) and np.isfinite(b) for b in bias):
                return self._reject(suggestion, "bad-bias")
            with self._lock:
                self.hint_queue.append([float(b) for b in bias])
        # QUERY_STATS carries no scheduler effect; acceptance is the answer

        suggestion.status = "accepted"
        self.log_event({"type": "suggestion", "kind": suggestion.kind, "status": "accepted"})
        return True, None

    def _reject(self, suggestion: Suggestion, reason: str) -> tuple[bool, str]:
        suggestion.status = "rejected"
        self.log_event({"type": "rejection", "kind": suggestion.kind, "rule": reason})
        return False, reason

    def add_game(self, text: str) -> tuple[str | None, str | None]:
        """Moderated library upload; returns (name, None) or (None, reason)."""
        rule = self.moderate(text)
        if rule is not None:
            self.log_event({"type": "rejection", "kind": "upload", "rule": rule})
            return None, rule
        spec, reason = self.check_inline_gdf(text)
        if spec is None:
            self.log_event({"type": "rejection", "kind": "upload", "rule": reason})
            return None, reason
        with self._lock:
            if spec.name in self.slots:
                return None, "duplicate-name"
            self.slots[spec.name] = _GameSlot(spec)
        self.log_event({"type": "library", "game": spec.name})
        return spec.name, None

    # -- live feed ---------------------------------------------------------------

    def subscribe(self, maxsize: int = 256) -> queue.Queue:
        q: queue.Queue = queue.Queue(maxsize=maxsize)
        with self._lock:
            self._subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self._lock:
            if q in self._subscribers:
                self._subscribers.remove(q)

    def _emit_frame(self, frame: dict) -> None:
        with self._lock:
            victims = []
            for q in self._subscribers:
                try:
                    q.put_nowait(frame)
                except queue.Full:
                    victims.append(q)  # slow subscribers are dropped, never block
            for q in victims:
                self._subscribers.remove(q)

    # -- the cycle -----------------------------------------------------------------

    def _next_game(self) -> str:
        with self._lock:
            if self.play_queue:
                return self.play_queue.pop(0)
            names = list(self.slots)
            name = names[self.schedule_pos % len(names)]
            self.schedule_pos += 1
            return name

    def _take_hint(self) -> list[float] | None:
        with self._lock:
            return self.hint_queue.pop(0) if self.hint_queue else None

    def _ensure_learning_state(self, name: str) -> None:
        slot = self.slots[name]
        if slot.model is None:
            slot.model = init_model(
                name, slot.extractor.length,
                self.params["hidden1"], self.params["hidden2"],
                seed=derive_seed(self.config.master_seed, "model-init", name),
            )
        if slot.buffer is None:
            slot.buffer = ReplayBuffer(self.params["buffer_capacity"])
        if slot.trainer is None:
            slot.trainer = Trainer(slot.model, self.params)

    def step_cycle(self) -> EpisodeRecord | None:
        """Play one episode end to end; never raises on content failures."""
        with self.cycle_lock:
            name = self._next_game()
            try:
                return self._run_episode(name)
            except Exception as exc:  # noqa: BLE001 - liveness over purity
                self.log_event({"type": "error", "game": name, "error": repr(exc)})
                return None

    def _run_episode(self, name: str) -> EpisodeRecord:
        slot = self.slots[name]
        if self.config.learning:
            self._ensure_learning_state(name)

        hint = self._take_hint()
        # the planner and the training features both see the episode-start
        # bounds: planning stays stationary within an episode
        bounds_view = ScoreBounds(slot.bounds.low, slot.bounds.high)
        model_handle = None
        model_version = 0
        if slot.model is not None:
            model_handle = GuidanceModel(slot.model.copy(), slot.extractor, bounds_view)
            model_version = model_handle.version

        planner = RheaPlanner(
            self.params,
            seed=derive_seed(self.config.master_seed, "planner", self.episode_index),
            model=model_handle,
            bounds=bounds_view,
            hint=np.asarray(hint, dtype=np.float64) if hint else None,
            wallclock_ms=self.config.wallclock_ms,
        )
        episode_seed = derive_seed(self.config.master_seed, "episode", self.episode_index)

        self.current_game = name
        tick_scores: list[int] = []

        def frame_hook(state, obs, action, policy):
            self.current_tick = state.tick
            self.current_score = state.score
            tick_scores.append(state.score)
            self._frame_seq += 1
            self._emit_frame({
                "seq": self._frame_seq,
                "game": name,
                "episode": self.episode_index,
                "tick": state.tick,
                "score": state.score,
                "grid": obs.to_lists(),
                "action": int(action),
                "policy": [float(p) for p in policy],
            })

        result = play_episode(slot.spec, planner, episode_seed,
                              collect_steps=self.config.learning, frame_hook=frame_hook)
        for event in planner.events:
            self.log_event({"type": "fallback", "game": name, "what": event})

        # lifetime score bounds: every score seen along the trajectory counts
        for score in tick_scores:
            slot.bounds.update(score)
        slot.bounds.update(result.score)

        train_losses: list[float] = []
        if self.config.learning and slot.buffer is not None:
            terminal_value = 1.0 if result.outcome == "win" else 0.0
            record_episode(
                slot.buffer,
                ((slot.extractor.featurize(s["state"], bounds_view), s["policy"])
                 for s in result.steps),
                terminal_value,
            )
            train_losses = self._train(slot)

        record = EpisodeRecord(
            episode=self.episode_index,
            game=name,
            fingerprint=self.fingerprint.short_hash(),
            model_version=model_version,
            seed=episode_seed,
            ticks=result.ticks,
            score=result.score,
            outcome=result.outcome,
            actions=result.actions,
        )
        self.log_event(record.to_event())
        if train_losses:
            self.log_event({"type": "training", "game": name, "losses": train_losses})
        self.episode_index += 1

        if self.config.tune_interval > 0:
            per_game = len(self.episode_events(name))
            if per_game % self.config.tune_interval == 0:
                self._tune(name)
        return record

    def _train(self, slot: _GameSlot) -> list[float]:
        batch_size = self.params["batch_size"]
        if slot.buffer is None or len(slot.buffer) < batch_size:
            return []
        rng = random.Random(derive_seed(self.config.master_seed, "train", self.episode_index))
        losses = []
        for _ in range(self.params["batches_per_episode"]):
            batch = slot.buffer.sample(batch_size, rng, self.params["replay_sample"])
            losses.append(slot.trainer.step(batch))
        return losses

    def _tune(self, name: str) -> None:
        """Small bandit tuning run; adopt the recommendation only if it beats
        the incumbent's recent mean episode value."""
        slot = self.slots[name]
        space = shared_default_space()
        model_handle = (GuidanceModel(slot.model.copy(), slot.extractor, slot.bounds)
                        if slot.model is not None else None)
        tune_salt = [0]

        def evaluate(params: ParameterSet) -> float:
            tune_salt[0] += 1
            values = []
            for e in range(self.config.tune_episodes):
                seed = derive_seed(self.config.master_seed, "tune",
                                   self.episode_index, tune_salt[0], e)
                p = RheaPlanner(params, seed=seed, model=model_handle, bounds=slot.bounds)
                values.append(play_episode(slot.spec, p, seed).final_value)
            return sum(values) / len(values)

        config = TuningConfig(
            budget=self.config.tune_budget,
            seed=derive_seed(self.config.master_seed, "tune-seed", self.episode_index),
        )
        result = run_ntbea(TuningProblem(space, evaluate), config)

        incumbent = [1.0 if e["outcome"] == "win" else 0.0
                     for e in self.episode_events(name)][-self.config.stats_window:]
        incumbent_mean = sum(incumbent) / len(incumbent) if incumbent else 0.0
        adopted = result.recommended_mean > incumbent_mean
        if adopted:
            self.params = result.recommended
        self.tuner_state = {
            "game": name,
            "episode": self.episode_index,
            "adopted": adopted,
            "recommended_mean": result.recommended_mean,
            "incumbent_mean": incumbent_mean,
            "recommended": {k: str(v) for k, v in result.recommended.items()},
            "evaluations": [[list(pt), r] for pt, r in result.evaluations],
        }
        self.log_event({"type": "tuning", "game": name, "adopted": adopted,
                        "recommended_mean": result.recommended_mean,
                        "incumbent_mean": incumbent_mean})

    # -- snapshot / restore ---------------------------------------------------------

    def snapshot(self, path: str) -> None:
        """Write the complete agent state atomically (temp dir + rename)."""
        parent = os.path.dirname(os.path.abspath(path)) or "."
        os.makedirs(parent, exist_ok=True)
        tmp = f"{path}.tmp-{os.getpid()}"
        if os.path.exists(tmp):
            shutil.rmtree(tmp)
        os.makedirs(os.path.join(tmp, "games"))
        os.makedirs(os.path.join(tmp, "models"))
        os.makedirs(os.path.join(tmp, "buffers"))
        os.makedirs(os.path.join(tmp, "trainer"))

        for name, slot in self.slots.items():
            with open(os.path.join(tmp, "games", f"{name}.gdf"), "w", encoding="utf-8") as fh:
                fh.write(serialize_gdf(slot.spec))
            if slot.model is not None:
                save_model(slot.model, os.path.join(tmp, "models", f"{name}.thy"))
            if slot.buffer is not None:
                slot.buffer.save_npz(os.path.join(tmp, "buffers", f"{name}.npz"))
            if slot.trainer is not None:
                slot.trainer.save_aux(os.path.join(tmp, "trainer", f"{name}.npz"))

        with open(os.path.join(tmp, "events.jsonl"), "w", encoding="utf-8") as fh:
            for event in self.events:
                fh.write(json.dumps(event) + "\n")
        with self._lock:
            pending = {"play": list(self.play_queue), "hints": [list(h) for h in self.hint_queue]}
        with open(os.path.join(tmp, "suggestions.json"), "w", encoding="utf-8") as fh:
            json.dump(pending, fh)
        if self.tuner_state is not None:
            with open(os.path.join(tmp, "tuner.json"), "w", encoding="utf-8") as fh:
                json.dump(self.tuner_state, fh)

        manifest = [
            f"version = {SNAPSHOT_VERSION}",
            f"created_at = {time.strftime('%Y-%m-%dT%H:%M:%S%z')}",
            f"master_seed = {self.config.master_seed}",
            f"episode_index = {self.episode_index}",
            f"schedule_pos = {self.schedule_pos}",
            f"learning = {int(self.config.learning)}",
            f"tune_interval = {self.config.tune_interval}",
            f"tune_budget = {self.config.tune_budget}",
            f"tune_episodes = {self.config.tune_episodes}",
            f"stats_window = {self.config.stats_window}",
            f"max_level_area = {self.config.max_level_area}",
            f"wallclock_ms = {self.config.wallclock_ms if self.config.wallclock_ms is not None else ''}",
            "games = " + ",".join(self.slots),
            "blocklist = " + json.dumps(self.config.blocklist),
        ]
        manifest += [f"param.{k} = {v}" for k, v in self.params.items()]
        manifest += [f"bounds.{name} = {slot.bounds.low},{slot.bounds.high}"
                     for name, slot in self.slots.items()]
        # manifest is written last: its presence marks the snapshot complete
        with open(os.path.join(tmp, "manifest.txt"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(manifest) + "\n")

        if os.path.exists(path):
            old = f"{path}.old-{os.getpid()}"
            os.rename(path, old)
            os.rename(tmp, path)
            shutil.rmtree(old)
        else:
            os.rename(tmp, path)

    @classmethod
    def restore(cls, path: str) -> "Runtime":
        manifest_path = os.path.join(path, "manifest.txt")
        if not os.path.isfile(manifest_path):
            raise SnapshotError(f"no snapshot at {path!r} (missing manifest)")
        raw: dict[str, str] = {}
        param_lines = []
        with open(manifest_path, encoding="utf-8") as fh:
            for line in fh:
                key, sep, value = line.partition("=")
                if not sep:
                    continue
                key, value = key.strip(), value.strip()
                if key.startswith("param."):
                    param_lines.append(f"{key[len('param.'):]} = {value}")
                else:
                    raw[key] = value
        try:
            params, ignored = parameter_set_from_text(shared_default_space(), "\n".join(param_lines))
            config = RuntimeConfig(
                master_seed=int(raw["master_seed"]),
                params=params,
                learning=bool(int(raw.get("learning", "1"))),
                tune_interval=int(raw.get("tune_interval", "0")),
                tune_budget=int(raw.get("tune_budget", "20")),
                tune_episodes=int(raw.get("tune_episodes", "2")),
                blocklist=[tuple(r) for r in json.loads(raw.get("blocklist", "[]"))],
                max_level_area=int(raw.get("max_level_area", "2500")),
                stats_window=int(raw.get("stats_window", "20")),
                wallclock_ms=float(raw["wallclock_ms"]) if raw.get("wallclock_ms") else None,
            )
        except (KeyError, ValueError) as exc:
            raise SnapshotError(f"corrupt manifest in {path!r}: {exc}") from exc

        rt = cls.__new__(cls)
        rt.config = config
        rt.params = params
        rt.slots = {}
        for name in [g for g in raw.get("games", "").split(",") if g]:
            gdf_path = os.path.join(path, "games", f"{name}.gdf")
            try:
                with open(gdf_path, encoding="utf-8") as fh:
                    spec = parse_gdf(fh.read())
            except (OSError, GdfError) as exc:
                raise SnapshotError(f"cannot load game {name!r}: {exc}") from exc
            slot = _GameSlot(spec)
            low_high = raw.get(f"bounds.{name}")
            if low_high:
                low, high = low_high.split(",")
                slot.bounds = ScoreBounds(int(low), int(high))
            model_path = os.path.join(path, "models", f"{name}.thy")
            if os.path.isfile(model_path):
                slot.model = load_model(model_path, expect_game=name)
            buffer_path = os.path.join(path, "buffers", f"{name}.npz")
            if os.path.isfile(buffer_path):
                slot.buffer = ReplayBuffer.load_npz(buffer_path)
            if slot.model is not None:
                slot.trainer = Trainer(slot.model, params)
                aux_path = os.path.join(path, "trainer", f"{name}.npz")
                if os.path.isfile(aux_path):
                    slot.trainer.load_aux(aux_path)
            rt.slots[name] = slot

        rt.episode_index = int(raw.get("episode_index", "0"))
        rt.schedule_pos = int(raw.get("schedule_pos", "0"))
        rt.events = []
        events_path = os.path.join(path, "events.jsonl")
        if os.path.isfile(events_path):
            with open(events_path, encoding="utf-8") as fh:
                rt.events = [json.loads(line) for line in fh if line.strip()]
        rt.started_at = time.time()
        rt._lock = threading.Lock()
        rt.play_queue = []
        rt.hint_queue = []
        suggestions_path = os.path.join(path, "suggestions.json")
        if os.path.isfile(suggestions_path):
            with open(suggestions_path, encoding="utf-8") as fh:
                pending = json.load(fh)
            rt.play_queue = list(pending.get("play", []))
            rt.hint_queue = [list(h) for h in pending.get("hints", [])]
        rt._subscribers = []
        rt._frame_seq = 0
        rt.cycle_lock = threading.Lock()
        rt.tuner_state = None
        tuner_path = os.path.join(path, "tuner.json")
        if os.path.isfile(tuner_path):
            with open(tuner_path, encoding="utf-8") as fh:
                rt.tuner_state = json.load(fh)
        rt.current_game = None
        rt.current_tick = 0
        rt.current_score = 0
        if ignored:
            rt.log_event({"type": "snapshot-note", "ignored_params": ignored})
        return rt

    # -- status ------------------------------------------------------------------

    def status(self) -> dict:
        with self._lock:
            pending = len(self.play_queue) + len(self.hint_queue)
        return {
            "game": self.current_game,
            "tick": self.current_tick,
            "score": self.current_score,
            "episode": self.episode_index,
            "fingerprint": self.fingerprint.short_hash(),
            "uptime_seconds": round(time.time() - self.started_at, 3),
            "pending_suggestions": pending,
            "active_hint": bool(self.hint_queue),
            "games": self.game_names(),
        }


# ---------------------------------------------------------------------------
# keyword commands

HELP_TEXT = "commands: play <game> | stats [<game>] | games | help"
FALLBACK_TEXT = "I did not recognise that. " + HELP_TEXT


def handle_command(runtime: Runtime, text: str) -> str:
    """Keyword command dispatch; input is moderated before anything else."""
    rule = runtime.moderate(text or "")
    if rule is not None:
        runtime.log_event({"type": "rejection", "kind": "command", "rule": rule})
        return f"rejected ({rule})"
    words = (text or "").strip().split()
    if not words:
        return FALLBACK_TEXT
    keyword = words[0].lower()
    if keyword == "help":
        return HELP_TEXT
    if keyword == "games":
        return "library: " + ", ".join(runtime.game_names())
    if keyword == "stats":
        game = words[1] if len(words) > 1 else None
        try:
            report = runtime.stats(game)
        except KeyError:
            return f"unknown game: {words[1]}"
        win_rate = "n/a" if report.win_rate is None else f"{report.win_rate:.0%}"
        return (f"{report.scope}: {report.episodes} episodes, win rate {win_rate}, "
                f"mean score {report.mean_score:.2f}, max score {report.max_score}")
    if keyword == "play" and len(words) > 1:
        accepted, reason = runtime.enqueue_suggestion(
            Suggestion(kind=PLAY_GAME, game=words[1], timestamp=time.time()))
        return f"queued {words[1]} to play next" if accepted else f"rejected ({reason})"
    return FALLBACK_TEXT
