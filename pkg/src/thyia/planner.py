"""Rolling-horizon evolutionary planner.

Each game tick the planner evolves fixed-length action sequences against the
forward model under a budget of simulator calls, then plays the first action
of the best sequence.  A learned model can steer three points of the loop:
population initialisation, gene resampling during mutation, and the fitness
blend of rollout value with the learned state value.

Everything stochastic flows through the planner's own seeded rng, so a
(parameter set, seed) fingerprint plus a model snapshot reproduces action
traces exactly.
"""

from __future__ import annotations

import random
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from .game import (
    NUM_ACTIONS,
    Action,
    GameState,
    ScoreBounds,
    TerminalStateError,
    advance,
    copy_state,
    heuristic_value,
    load_level,
    observe,
)
from .params import ParameterSet

WIN_DEPTH_EPSILON = 1e-4  # earlier wins outrank later ones
WIN_BONUS_CAP = 0.01  # keeps win fitness within [1, 1.01]


@dataclass
class Individual:
    genes: list[int]
    fitness: float | None = None

    def copy(self) -> "Individual":
        return Individual(list(self.genes), self.fitness)


def blend_values(rollout_value: float, learned_value: float, alpha: float) -> float:
    """Fitness blend: (1 - alpha) * rollout value + alpha * learned value."""
    return (1.0 - alpha) * rollout_value + alpha * learned_value


def mutation_distribution(policy: np.ndarray, current: int) -> np.ndarray:
    """Zero the current gene's weight and renormalize.

    If the policy put (essentially) all mass on the current value, fall back
    to uniform over the remaining actions so resampling still changes the gene.
    """
    p = np.asarray(policy, dtype=np.float64).copy()
    if p.shape[0] < 2:
        raise ValueError("need at least two actions to resample a gene")
    p[current] = 0.0
    total = p.sum()
    if total <= 1e-12:
        p[:] = 1.0 / (p.shape[0] - 1)
        p[current] = 0.0
        return p
    return p / total


def weighted_sample(dist: np.ndarray, rng) -> int:
    """Draw an index from a distribution; zero-mass entries are never chosen."""
    u = rng.random() * float(dist.sum())
    acc = 0.0
    last_positive = -1
    for i, w in enumerate(dist):
        if w > 0.0:
            last_positive = i
            acc += float(w)
            if u < acc:
                return i
    if last_positive < 0:
        raise ValueError("distribution has no positive mass")
    return last_positive  # float round-off: u landed past the final edge


def biased_distribution(base: np.ndarray, bias: np.ndarray | None, weight: float) -> np.ndarray:
    """Mix a human strategy hint into a sampling distribution, clamped valid."""
    if bias is None:
        return base
    mixed = np.maximum(0.0, base + weight * np.asarray(bias, dtype=np.float64))
    total = mixed.sum()
    if total <= 0.0:
        return np.full(len(base), 1.0 / len(base))
    return mixed / total


class _Meter:
    """Forward-model call budget for one planned tick."""

    __slots__ = ("remaining", "spent")

    def __init__(self, budget: int):
        self.remaining = budget
        self.spent = 0

    def take(self) -> bool:
        if self.remaining <= 0:
            return False
        self.remaining -= 1
        self.spent += 1
        return True


def nn_seeded_sequence(state: GameState, model, length: int, rng, *,
                       temperature: float = 1.0, meter: _Meter | None = None,
                       hint: np.ndarray | None = None, hint_weight: float = 0.0) -> Individual:
    """Build one individual by following the model's policy through simulation.

    At each step the policy for the current simulated state is sampled and the
    state advanced by the drawn action, consuming one forward-model call per
    gene.  If the simulation ends early the remaining genes are uniform.
    """
    genes: list[int] = []
    sim = copy_state(state)
    for _ in range(length):
        if not sim.running:
            genes.append(rng.randrange(NUM_ACTIONS))
            continue
        pi = np.asarray(model.policy(sim), dtype=np.float64)
        if temperature != 1.0:
            pi = np.power(np.clip(pi, 1e-12, None), 1.0 / temperature)
            pi = pi / pi.sum()
        pi = biased_distribution(pi, hint, hint_weight)
        a = weighted_sample(pi, rng)
        genes.append(a)
        if meter is None or meter.take():
            sim = advance(sim, Action(a))
        else:
            break
    while len(genes) < length:
        genes.append(rng.randrange(NUM_ACTIONS))
    return Individual(genes)


class RheaPlanner:
    """One planning agent: owns its rng, carried population, and counters.

    Budget is measured in forward-model calls (deterministic and
    machine-independent).  For live play a wall-clock deadline per tick can
    be layered on top via wallclock_ms: evolution then stops at whichever
    limit hits first.  Wall-clock mode trades away trace determinism, so the
    deterministic tests never use it.
    """

    def __init__(self, params: ParameterSet, seed: int, model=None,
                 bounds: ScoreBounds | None = None, hint: np.ndarray | None = None,
                 wallclock_ms: float | None = None):
        self.params = params
        self.seed = seed
        self.model = model
        self.bounds = bounds if bounds is not None else ScoreBounds()
        self.hint = hint
        self.wallclock_ms = wallclock_ms
        self.rng = random.Random(seed)
        self.population: list[Individual] | None = None
        self.last_population: list[Individual] = []
        self.calls_last_plan = 0
        self.events: list[str] = []

    # -- helpers ------------------------------------------------------------

    def _sim_copy(self, state: GameState) -> GameState:
        sim = copy_state(state)
        if state.spec.is_stochastic:
            # branch the imagined future: otherwise every evaluation would
            # replay the exact same chaser noise
            sim.reseed(self.rng.getrandbits(63))
        return sim

    def _terminal_value(self, state: GameState, depth: int) -> float:
        value = heuristic_value(state, self.bounds)
        if value == 1.0:
            horizon = self.params["individual_length"] + self.params["rollout_length"]
            value += min(WIN_BONUS_CAP, max(0, horizon - depth) * WIN_DEPTH_EPSILON)
        return value

    def _uses_model_for_value(self) -> bool:
        return self.model is not None and self.params["alpha"] > 0.0

    # -- population construction --------------------------------------------

    def init_population(self, state: GameState, meter: _Meter | None = None) -> list[Individual]:
        p = self.params["population_size"]
        length = self.params["individual_length"]
        mode = self.params["init_mode"]
        if mode == "nn-seeded" and self.model is None:
            self.events.append("init-fallback-uniform")
            mode = "uniform"

        if mode == "nn-seeded":
            first = nn_seeded_sequence(
                state, self.model, length, self.rng,
                temperature=self.params["nn_seed_temperature"], meter=meter,
                hint=self.hint, hint_weight=self.params["hint_weight"])
            pop = [first]
            while len(pop) < p:
                pop.append(self._forced_uniform_mutation(first))
            return pop

        base = np.full(NUM_ACTIONS, 1.0 / NUM_ACTIONS)
        dist = biased_distribution(base, self.hint, self.params["hint_weight"])
        uniform_hintless = self.hint is None
        pop = []
        for _ in range(p):
            if uniform_hintless:
                genes = [self.rng.randrange(NUM_ACTIONS) for _ in range(length)]
            else:
                genes = [weighted_sample(dist, self.rng) for _ in range(length)]
            pop.append(Individual(genes))
        return pop

    def _forced_uniform_mutation(self, source: Individual) -> Individual:
        """Uniform mutation guaranteed to change at least one gene."""
        rate = self.params["mutation_rate"]
        genes = list(source.genes)
        flips = [i for i in range(len(genes)) if self.rng.random() < rate]
        if not flips:
            flips = [self.rng.randrange(len(genes))]
        for i in flips:
            genes[i] = self._resample_uniform_other(genes[i])
        return Individual(genes)

    def _resample_uniform_other(self, current: int) -> int:
        pick = self.rng.randrange(NUM_ACTIONS - 1)
        return pick if pick < current else pick + 1

    # -- mutation -------------------------------------------------------------

    def mutate(self, individual: Individual, root_state: GameState,
               meter: _Meter | None = None) -> Individual:
        """Flip each gene with probability mutation_rate.

        Uniform mode resamples over the other actions; nn-weighted mode
        simulates from the root through the genes up to and including the
        mutated one, then samples from the model policy with the old value
        zeroed.  Every flipped gene is guaranteed to change.
        """
        rate = self.params["mutation_rate"]
        genes = list(individual.genes)
        flips = [i for i in range(len(genes)) if self.rng.random() < rate]
        if not flips:
            return Individual(genes, individual.fitness)

        nn_mode = self.params["mutation_mode"] == "nn-weighted" and self.model is not None
        if not nn_mode:
            for i in flips:
                genes[i] = self._resample_uniform_other(genes[i])
            return Individual(genes)

        sim = self._sim_copy(root_state)
        cursor = 0
        alive = True
        for i in flips:
            # reach the state after genes[..i] (the gene's own old value included)
            while alive and cursor <= i:
                if not sim.running or (meter is not None and not meter.take()):
                    alive = False
                    break
                sim = advance(sim, Action(genes[cursor]))
                cursor += 1
            old = genes[i]
            if alive:
                dist = mutation_distribution(np.asarray(self.model.policy(sim)), old)
                genes[i] = weighted_sample(dist, self.rng)
            else:
                genes[i] = self._resample_uniform_other(old)
        return Individual(genes)

    # -- evaluation -----------------------------------------------------------

    def evaluate(self, individual: Individual, root_state: GameState,
                 meter: _Meter | None = None) -> float:
        """Simulate the genes (plus optional random rollout) and blend values."""
        if meter is None:
            meter = _Meter(self.params["budget"])
        rollout_len = self.params["rollout_length"]
        rollout_reps = self.params["rollout_repeats"] if rollout_len > 0 else 1
        alpha = self.params["alpha"]
        use_model = self._uses_model_for_value()

        r_samples: list[float] = []
        n_samples: list[float] = []
        for _ in range(self.params["eval_repeats"]):
            sim = self._sim_copy(root_state)
            depth = 0
            for g in individual.genes:
                if not sim.running or not meter.take():
                    break
                sim = advance(sim, Action(g))
                depth += 1
            if rollout_len > 0 and sim.running:
                for _ in range(rollout_reps):
                    tail = self._sim_copy(sim)
                    tail_depth = depth
                    for _ in range(rollout_len):
                        if not tail.running or not meter.take():
                            break
                        tail = advance(tail, Action(self.rng.randrange(NUM_ACTIONS)))
                        tail_depth += 1
                    r_samples.append(self._terminal_value(tail, tail_depth))
                    if use_model:
                        n_samples.append(self.model.value(tail))
            else:
                r_samples.append(self._terminal_value(sim, depth))
                if use_model:
                    n_samples.append(self.model.value(sim))

        rollout_value = statistics.fmean(r_samples)
        learned_value = statistics.fmean(n_samples) if n_samples else 0.5
        fitness = blend_values(rollout_value, learned_value, alpha)
        individual.fitness = fitness
        return fitness

    # -- generations ----------------------------------------------------------

    def _sorted(self, population: list[Individual]) -> list[Individual]:
        # stable: equal fitness preserves creation order, keeping argmax
        # deterministic and invariant under monotone fitness transforms
        return sorted(population, key=lambda ind: -(ind.fitness or 0.0))

    def _select_index(self, population: list[Individual]) -> int:
        """Pick a parent index from a fitness-sorted population (rank-based)."""
        p = len(population)
        mode = self.params["selection"]
        if mode == "tournament":
            k = min(self.params["tournament_size"], p)
            return min(self.rng.randrange(p) for _ in range(k))
        if mode == "rank":
            # linear rank weights P..1 over sorted positions
            total = p * (p + 1) // 2
            u = self.rng.random() * total
            acc = 0.0
            for idx in range(p):
                acc += p - idx
                if u < acc:
                    return idx
            return p - 1
        return self.rng.randrange(p)

    def _crossover(self, a: Individual, b: Individual) -> Individual:
        mode = self.params["crossover"]
        length = len(a.genes)
        if mode == "uniform":
            genes = [a.genes[i] if self.rng.random() < 0.5 else b.genes[i] for i in range(length)]
        elif mode == "1-point" and length >= 2:
            cut = self.rng.randrange(1, length)
            genes = a.genes[:cut] + b.genes[cut:]
        else:
            genes = list(a.genes)
        return Individual(genes)

    def _next_generation(self, population: list[Individual], root_state: GameState,
                         meter: _Meter) -> list[Individual]:
        p = self.params["population_size"]
        elites = max(0, min(self.params["elitism"], p - 1))  # always >= 1 offspring
        use_crossover = self.params["crossover"] != "none"

        offspring: list[Individual] = []
        for _ in range(p - elites):
            first = population[self._select_index(population)]
            child = self._crossover(first, population[self._select_index(population)]) \
                if use_crossover else first.copy()
            child = self.mutate(child, root_state, meter)
            self.evaluate(child, root_state, meter)
            offspring.append(child)

        if self.params["survivor_mode"] == "plus":
            return self._sorted(population + offspring)[:p]
        return self._sorted([ind.copy() for ind in population[:elites]] + offspring)

    # -- shift buffer ---------------------------------------------------------

    def shift_population(self, population: list[Individual], new_tick_state: GameState,
                         meter: _Meter | None = None) -> list[Individual]:
        """Carry a population to the next tick: genes shift left, last resampled.

        All fitnesses are invalidated; callers re-evaluate against the new root.
        """
        if not population:
            return self.init_population(new_tick_state, meter)
        nn_mode = self.params["mutation_mode"] == "nn-weighted" and self.model is not None
        shifted: list[Individual] = []
        for ind in population:
            genes = ind.genes[1:]
            if nn_mode:
                sim = self._sim_copy(new_tick_state)
                for g in genes:
                    if not sim.running or (meter is not None and not meter.take()):
                        break
                    sim = advance(sim, Action(g))
                if sim.running:
                    genes = genes + [weighted_sample(np.asarray(self.model.policy(sim)), self.rng)]
                else:
                    genes = genes + [self.rng.randrange(NUM_ACTIONS)]
            else:
                genes = genes + [self.rng.randrange(NUM_ACTIONS)]
            shifted.append(Individual(genes))
        if self.params["shift_keep"] == "half":
            keep = max(1, len(shifted) // 2)
            length = self.params["individual_length"]
            shifted = shifted[:keep] + [
                Individual([self.rng.randrange(NUM_ACTIONS) for _ in range(length)])
                for _ in range(len(shifted) - keep)
            ]
        return shifted

    # -- the per-tick entry point ----------------------------------------------

    def plan_action(self, state: GameState) -> Action:
        """Evolve under the call budget and return the best first action."""
        if not state.running:
            raise TerminalStateError("plan_action requires a running state")
        params = self.params
        p = params["population_size"]
        if params["budget"] < p:
            raise ValueError("budget must allow at least one evaluation per individual")

        meter = _Meter(params["budget"])
        if params["shift_buffer"] == "on" and self.population:
            population = self.shift_population(self.population, state, meter)
        else:
            population = self.init_population(state, meter)
        for ind in population:
            self.evaluate(ind, state, meter)
        population = self._sorted(population)

        rollout_calls = params["rollout_length"] * (params["rollout_repeats"] if params["rollout_length"] else 0)
        eval_cost = params["eval_repeats"] * (params["individual_length"] + rollout_calls)
        mutate_cost = params["individual_length"] if (
            params["mutation_mode"] == "nn-weighted" and self.model is not None) else 0
        offspring = p - max(0, min(params["elitism"], p - 1))
        generation_cost = offspring * (mutate_cost + eval_cost)

        deadline = (time.monotonic() + self.wallclock_ms / 1000.0
                    if self.wallclock_ms is not None else None)
        while meter.remaining >= generation_cost:
            if deadline is not None and time.monotonic() >= deadline:
                break
            population = self._next_generation(population, state, meter)

        self.population = population if params["shift_buffer"] == "on" else None
        self.last_population = population
        self.calls_last_plan = meter.spent
        return Action(population[0].genes[0])

    def begin_episode(self) -> None:
        """Drop the carried population: shift buffers never span episodes."""
        self.population = None

    def end_episode(self) -> None:
        """Strategy hints apply to a single episode."""
        self.hint = None


# ---------------------------------------------------------------------------
# episodes

@dataclass
class EpisodeResult:
    game: str
    seed: int
    actions: list[int]
    score: int
    outcome: str
    ticks: int
    final_value: float
    steps: list[dict] = field(default_factory=list)  # per-tick capture when requested


def play_episode(spec, planner: RheaPlanner, episode_seed: int, *,
                 collect_steps: bool = False, frame_hook=None) -> EpisodeResult:
    """Run one full episode with the planner driving every tick."""
    from .learner import policy_target

    state = load_level(spec, episode_seed)
    planner.begin_episode()
    actions: list[int] = []
    steps: list[dict] = []
    while state.running:
        action = planner.plan_action(state)
        if collect_steps or frame_hook is not None:
            policy = policy_target(planner.last_population)
            if collect_steps:
                steps.append({
                    "state": copy_state(state),
                    "policy": policy,
                    "action": int(action),
                })
            if frame_hook is not None:
                frame_hook(state, observe(state), int(action), policy)
        actions.append(int(action))
        state = advance(state, action)
    planner.end_episode()
    return EpisodeResult(
        game=spec.name,
        seed=episode_seed,
        actions=actions,
        score=state.score,
        outcome=state.status,
        ticks=state.tick,
        final_value=heuristic_value(state, planner.bounds),
        steps=steps,
    )
