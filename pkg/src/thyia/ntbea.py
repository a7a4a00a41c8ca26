"""N-tuple bandit evolutionary tuner over the parameter registry.

Keeps visit-count/reward-sum statistics for every 1-tuple, 2-tuple, and the
full tuple of parameter dimensions.  Each iteration evaluates the current
point (a noisy scalar reward), folds it into every matching combination,
then hill-climbs to the neighbour with the highest mean UCB across tuples.
The tuner sees only scalar rewards: it never reads planner internals, so the
evaluated system can change freely underneath it.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Sequence

from .params import ParameterSet, ParameterSpace

UNVISITED_MEAN = 0.5  # optimistic prior for combinations never evaluated


def ucb(visits: float, reward_sum: float, total_evals: int, k: float,
        epsilon: float = 0.5) -> float:
    """Upper confidence bound: mean + k * sqrt(ln(N+1) / (n + epsilon))."""
    mean = reward_sum / visits if visits > 0 else UNVISITED_MEAN
    return mean + k * math.sqrt(math.log(total_evals + 1) / (visits + epsilon))


class NTupleModel:
    """Reward statistics over combinations of parameter values."""

    def __init__(self, space: ParameterSpace, *, use_pairs: bool = True,
                 use_full: bool = True):
        n = len(space)
        self.space = space
        self.tuples: list[tuple[int, ...]] = [(i,) for i in range(n)]
        if use_pairs:
            self.tuples += list(combinations(range(n), 2))
        if use_full and n > 1:
            self.tuples.append(tuple(range(n)))
        self.stats: dict[tuple[int, ...], dict[tuple[int, ...], list[float]]] = {
            t: {} for t in self.tuples
        }
        self.total_evals = 0

    def update(self, point: tuple[int, ...], reward: float) -> None:
        """Fold one evaluation into every tuple's matching combination."""
        if not math.isfinite(reward):
            raise ValueError("reward must be finite")
        for dims in self.tuples:
            key = tuple(point[d] for d in dims)
            entry = self.stats[dims].setdefault(key, [0.0, 0.0])
            entry[0] += 1.0
            entry[1] += reward
        self.total_evals += 1

    def combination_mean(self, dims: tuple[int, ...], key: tuple[int, ...]) -> float:
        entry = self.stats[dims].get(key)
        if entry is None or entry[0] == 0:
            return UNVISITED_MEAN
        return entry[1] / entry[0]

    def mean_estimate(self, point: tuple[int, ...]) -> float:
        """Average of tuple means for the point (the k=0 UCB)."""
        return self.point_ucb(point, k=0.0)

    def point_ucb(self, point: tuple[int, ...], k: float, epsilon: float = 0.5) -> float:
        total = 0.0
        for dims in self.tuples:
            key = tuple(point[d] for d in dims)
            entry = self.stats[dims].get(key)
            if entry is None:
                total += ucb(0.0, 0.0, self.total_evals, k, epsilon)
            else:
                total += ucb(entry[0], entry[1], self.total_evals, k, epsilon)
        return total / len(self.tuples)


def neighbours(point: tuple[int, ...], space: ParameterSpace, count: int,
               rng: random.Random, resample_rate: float = 0.3) -> list[tuple[int, ...]]:
    """Random neighbours: each dimension flips to a different value with
    probability resample_rate; at least one dimension always changes."""
    arities = space.arities()
    out = []
    for _ in range(count):
        cand = list(point)
        changed = []
        for d, arity in enumerate(arities):
            if arity > 1 and rng.random() < resample_rate:
                cand[d] = _other_value(point[d], arity, rng)
                changed.append(d)
        if not changed:
            movable = [d for d, a in enumerate(arities) if a > 1]
            d = movable[rng.randrange(len(movable))]
            cand[d] = _other_value(point[d], arities[d], rng)
        out.append(tuple(cand))
    return out


def _other_value(current: int, arity: int, rng: random.Random) -> int:
    pick = rng.randrange(arity - 1)
    return pick if pick < current else pick + 1


@dataclass
class TuningConfig:
    budget: int  # total evaluations
    seed: int = 0
    k: float = 2.0
    neighbourhood: int = 10
    resample_rate: float = 0.3
    epsilon: float = 0.5
    log_path: str | None = None


@dataclass
class TuningResult:
    recommended: ParameterSet
    recommended_mean: float
    evaluations: list[tuple[tuple[int, ...], float]]
    model: NTupleModel


class TuningProblem:
    """A tunable objective: a space plus a noisy scalar evaluator in [0,1]."""

    def __init__(self, space: ParameterSpace,
                 evaluate: Callable[[ParameterSet], float]):
        self.space = space
        self._evaluate = evaluate

    def evaluate(self, params: ParameterSet) -> float:
        return self._evaluate(params)


def run_ntbea(problem: TuningProblem, config: TuningConfig) -> TuningResult:
    """Tune against the problem for config.budget evaluations."""
    if config.budget < 1:
        raise ValueError("tuning budget must be >= 1")
    space = problem.space
    rng = random.Random(config.seed)
    model = NTupleModel(space)
    current = tuple(rng.randrange(a) for a in space.arities())
    evaluations: list[tuple[tuple[int, ...], float]] = []

    log_fh = open(config.log_path, "w", encoding="utf-8") if config.log_path else None
    try:
        if log_fh:
            log_fh.write("eval_index," + ",".join(space.names()) + ",reward\n")
        for i in range(config.budget):
            params = space.set_from_indices(list(current))
            reward = problem.evaluate(params)
            model.update(current, reward)
            evaluations.append((current, reward))
            if log_fh:
                values = ",".join(str(params[name]) for name in space.names())
                log_fh.write(f"{i},{values},{reward!r}\n")
            if i + 1 == config.budget:
                break
            cands = neighbours(current, space, config.neighbourhood, rng,
                               config.resample_rate)
            best, best_value = None, -math.inf
            for cand in cands:
                value = model.point_ucb(cand, config.k, config.epsilon)
                if value > best_value:
                    best, best_value = cand, value
            current = best
    finally:
        if log_fh:
            log_fh.close()

    rec_point, rec_mean = recommend(model, [pt for pt, _ in evaluations])
    return TuningResult(
        recommended=space.set_from_indices(list(rec_point)),
        recommended_mean=rec_mean,
        evaluations=evaluations,
        model=model,
    )


def recommend(model: NTupleModel, evaluated: Sequence[tuple[int, ...]]) -> tuple[tuple[int, ...], float]:
    """Among evaluated points, the model-estimated-mean argmax (earliest on ties)."""
    if not evaluated:
        raise ValueError("nothing evaluated yet")
    best, best_mean = None, -math.inf
    for pt in evaluated:
        mean = model.mean_estimate(pt)
        if mean > best_mean:
            best, best_mean = pt, mean
    return best, best_mean


def replay_log(space: ParameterSpace, path: str) -> NTupleModel:
    """Rebuild the statistics model from a tuning-run log file."""
    model = NTupleModel(space)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        names = header[1:-1]
        for line in fh:
            parts = line.strip().split(",")
            if not parts or parts == [""]:
                continue
            values = dict(zip(names, parts[1:-1]))
            point = tuple(
                space.value_index(name, _coerce(space, name, values[name]))
                for name in space.names()
            )
            model.update(point, float(parts[-1]))
    return model


def _coerce(space: ParameterSpace, name: str, text: str):
    for declared in space[name].values:
        if str(declared) == text:
            return declared
    raise ValueError(f"{name}: {text!r} not in declared values")


# ---------------------------------------------------------------------------
# synthetic benchmark problems

def make_onemax_space(dims: int = 5) -> ParameterSpace:
    from .params import ParameterDef

    return ParameterSpace([ParameterDef(f"bit{i}", (0, 1), 0) for i in range(dims)])


def onemax_problem(dims: int = 5, noise_sigma: float = 0.0, seed: int = 0) -> TuningProblem:
    """Reward = fraction of ones, plus optional clipped Gaussian noise."""
    space = make_onemax_space(dims)
    noise_rng = random.Random(seed)

    def evaluate(params: ParameterSet) -> float:
        value = sum(params[f"bit{i}"] for i in range(dims)) / dims
        if noise_sigma > 0.0:
            value += noise_rng.gauss(0.0, noise_sigma)
        return min(1.0, max(0.0, value))

    return TuningProblem(space, evaluate)
