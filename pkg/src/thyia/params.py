"""Tunable-parameter registry: planner and learner knobs in one ordered space.

The space is built modularly: new parameters append to the registry without
disturbing existing indices, and serialized sets from older builds load with
new parameters at their defaults.  Every value is drawn from a declared
finite list, so the space doubles as the bandit tuner's search domain.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Any, Iterator, Mapping


@dataclass(frozen=True)
class ParameterDef:
    name: str
    values: tuple[Any, ...]
    default: Any
    doc: str = ""

    def __post_init__(self) -> None:
        if len(set(map(str, self.values))) != len(self.values):
            raise ValueError(f"{self.name}: values must be distinct")
        if self.default not in self.values:
            raise ValueError(f"{self.name}: default {self.default!r} not in declared values")


class ParameterSpace:
    """Ordered registry of parameter definitions."""

    def __init__(self, defs: list[ParameterDef] | tuple[ParameterDef, ...] = ()):
        self._defs: list[ParameterDef] = []
        self._index: dict[str, int] = {}
        for d in defs:
            self.register(d)

    def register(self, definition: ParameterDef) -> None:
        if definition.name in self._index:
            raise ValueError(f"duplicate parameter name {definition.name!r}")
        self._index[definition.name] = len(self._defs)
        self._defs.append(definition)

    def __len__(self) -> int:
        return len(self._defs)

    def __iter__(self) -> Iterator[ParameterDef]:
        return iter(self._defs)

    def __getitem__(self, key: int | str) -> ParameterDef:
        if isinstance(key, str):
            return self._defs[self._index[key]]
        return self._defs[key]

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def index_of(self, name: str) -> int:
        return self._index[name]

    def names(self) -> list[str]:
        return [d.name for d in self._defs]

    def arities(self) -> list[int]:
        return [len(d.values) for d in self._defs]

    def value_index(self, name: str, value: Any) -> int:
        d = self[name]
        for i, v in enumerate(d.values):
            if v == value:
                return i
        raise ValueError(f"{name}: {value!r} is not a declared value")

    def defaults(self) -> "ParameterSet":
        return ParameterSet(self, {d.name: d.default for d in self._defs})

    def set_from_indices(self, indices: list[int] | tuple[int, ...]) -> "ParameterSet":
        if len(indices) != len(self._defs):
            raise ValueError("index vector length does not match space dimension")
        return ParameterSet(self, {d.name: d.values[i] for d, i in zip(self._defs, indices)})


def space_cardinality(space: ParameterSpace) -> int:
    """Exact product of arities (Python big ints; never overflows)."""
    if len(space) == 0:
        raise ValueError("space has no parameters")
    return math.prod(len(d.values) for d in space)


class ParameterSet(Mapping[str, Any]):
    """One point in a ParameterSpace; every value validated against its arity."""

    def __init__(self, space: ParameterSpace, values: Mapping[str, Any]):
        self.space = space
        resolved: dict[str, Any] = {}
        for d in space:
            v = values.get(d.name, d.default)
            # store the declared value so 0 and 0.0 canonicalize identically
            for declared in d.values:
                if declared == v:
                    resolved[d.name] = declared
                    break
            else:
                raise ValueError(f"{d.name}: {v!r} is not a declared value")
        unknown = set(values) - set(space.names())
        if unknown:
            raise ValueError(f"unknown parameters: {sorted(unknown)}")
        self._values = resolved

    def __getitem__(self, name: str) -> Any:
        return self._values[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._values)

    def __len__(self) -> int:
        return len(self._values)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ParameterSet):
            return NotImplemented
        return self._values == other._values

    def __hash__(self) -> int:
        return hash(tuple(sorted((k, str(v)) for k, v in self._values.items())))

    def replace(self, **overrides: Any) -> "ParameterSet":
        merged = dict(self._values)
        merged.update(overrides)
        return ParameterSet(self.space, merged)

    def to_indices(self) -> tuple[int, ...]:
        return tuple(self.space.value_index(d.name, self._values[d.name]) for d in self.space)

    def to_text(self) -> str:
        """One `name = value` line per parameter, registry order."""
        return "\n".join(f"{d.name} = {self._values[d.name]}" for d in self.space) + "\n"


def parameter_set_from_text(space: ParameterSpace, text: str) -> tuple[ParameterSet, list[str]]:
    """Parse `name = value` lines.

    Missing parameters take their defaults (forward compatibility: snapshots
    written before a parameter existed still load); unknown names are
    tolerated and returned so callers can log them.
    """
    values: dict[str, Any] = {}
    ignored: list[str] = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name, sep, value_text = (p.strip() for p in line.partition("="))
        if not sep:
            raise ValueError(f"expected 'name = value', got {raw!r}")
        if name not in space:
            ignored.append(name)
            continue
        values[name] = _parse_value(space[name], value_text, name)
    return ParameterSet(space, values), ignored


def _parse_value(definition: ParameterDef, text: str, name: str) -> Any:
    for declared in definition.values:
        if str(declared) == text:
            return declared
    raise ValueError(f"{name}: {text!r} is not a declared value")


# ---------------------------------------------------------------------------
# fingerprint

@dataclass(frozen=True)
class AgentFingerprint:
    """Parameter set plus master seed: fully determines planner behaviour."""

    params: ParameterSet
    seed: int

    def to_text(self) -> str:
        return f"seed = {self.seed}\n{self.params.to_text()}"

    @staticmethod
    def from_text(space: ParameterSpace, text: str) -> "AgentFingerprint":
        seed = None
        param_lines = []
        for raw in text.splitlines():
            line = raw.strip()
            if line.startswith("seed"):
                _, _, v = line.partition("=")
                seed = int(v.strip())
            else:
                param_lines.append(raw)
        if seed is None:
            raise ValueError("fingerprint text has no seed line")
        params, _ = parameter_set_from_text(space, "\n".join(param_lines))
        return AgentFingerprint(params, seed)

    def short_hash(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()[:12]


def derive_seed(master_seed: int, *salt: object) -> int:
    """Stable per-component sub-seed (process-independent, unlike hash())."""
    text = ":".join([str(master_seed), *map(str, salt)])
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")


# ---------------------------------------------------------------------------
# default registry

def default_space() -> ParameterSpace:
    """The shipped registry: 31 parameters over planner and learner knobs."""
    p = ParameterDef
    return ParameterSpace([
        # population and operators
        p("population_size", (2, 4, 5, 10, 20), 10, "individuals evolved per game tick"),
        p("individual_length", (3, 4, 6, 8, 10, 12, 16), 8, "genes (actions) per individual"),
        p("mutation_rate", (0.0, 0.1, 0.2, 0.3, 1.0), 0.3, "per-gene flip probability"),
        p("crossover", ("none", "uniform", "1-point"), "uniform", "recombination operator"),
        p("selection", ("tournament", "rank", "uniform"), "tournament",
          "parent selection; all variants are rank-based so fitness rescaling never changes the outcome"),
        p("tournament_size", (2, 3, 5), 5, "entrants per tournament draw"),
        p("elitism", (1, 2), 2, "individuals copied unchanged into the next generation"),
        p("survivor_mode", ("comma", "plus"), "comma", "offspring replace parents, or merge-and-truncate"),
        # rolling-horizon structure
        p("shift_buffer", ("on", "off"), "on", "carry the population to the next tick, shifted left"),
        p("shift_keep", ("all", "half"), "all", "after shifting, keep all individuals or refresh the worst half"),
        p("rollout_length", (0, 2, 5, 10), 0, "random action suffix appended before state valuation"),
        p("rollout_repeats", (1, 2), 1, "independent random suffixes averaged per evaluation"),
        p("eval_repeats", (1, 2), 1, "full evaluations averaged per individual (for stochastic games)"),
        # learned guidance
        p("init_mode", ("uniform", "nn-seeded"), "uniform", "population initialisation distribution"),
        p("mutation_mode", ("uniform", "nn-weighted"), "uniform", "gene resampling distribution"),
        p("nn_seed_temperature", (1.0, 2.0), 1.0, "sampling temperature when following the learned policy"),
        p("alpha", (0.0, 0.25, 0.5, 0.75, 1.0), 0.0,
          "weight of the learned state value in the fitness blend"),
        # budgets and valuation
        p("budget", (50, 100, 250, 500, 1000, 2000), 500,
          "forward-model calls available per planned tick"),
        p("discount", (0.9, 0.95, 0.99, 1.0), 1.0,
          "reserved structural slot; early-win preference uses a fixed epsilon tie-break"),
        p("hint_weight", (0.25, 0.5, 0.75), 0.5, "blend weight of a human strategy hint at initialisation"),
        # learner architecture and training
        p("hidden1", (32, 64), 32, "first hidden layer width"),
        p("hidden2", (32, 64), 32, "second hidden layer width"),
        p("learning_rate", (0.03, 0.01, 0.003, 0.001), 0.01, "gradient step size"),
        p("lr_decay", (1.0, 0.999), 1.0, "per-step learning-rate multiplier"),
        p("batch_size", (16, 32, 64), 32, "examples per training batch"),
        p("batches_per_episode", (1, 2, 4), 2, "training batches run between episodes"),
        p("buffer_capacity", (1000, 5000), 5000, "replay buffer size per game, oldest evicted first"),
        p("optimizer", ("sgd", "momentum"), "sgd", "gradient-descent flavour (momentum 0.9 when enabled)"),
        p("l2_reg", (0.0, 0.0001), 0.0, "L2 penalty on weights (not biases)"),
        p("replay_sample", ("uniform", "recency"), "uniform", "batch sampling: whole buffer or newest half"),
        p("grad_clip", (0.0, 5.0), 0.0, "global gradient-norm clip; 0 disables"),
    ])


_default_space: ParameterSpace | None = None


def shared_default_space() -> ParameterSpace:
    global _default_space
    if _default_space is None:
        _default_space = default_space()
    return _default_space


def default_params(**overrides: Any) -> ParameterSet:
    ps = shared_default_space().defaults()
    return ps.replace(**overrides) if overrides else ps


def write_parameter_reference(path: str) -> None:
    """Generate the registry reference file (markdown table + cardinality)."""
    space = shared_default_space()
    lines = [
        "# Parameter registry",
        "",
        f"{len(space)} parameters; exact search-space cardinality: "
        f"{space_cardinality(space):,} ({float(space_cardinality(space)):.3e}).",
        "",
        "| # | name | values | default | notes |",
        "|---|------|--------|---------|-------|",
    ]
    for i, d in enumerate(space):
        values = ", ".join(str(v) for v in d.values)
        lines.append(f"| {i} | `{d.name}` | {values} | {d.default} | {d.doc} |")
    lines.append("")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))
