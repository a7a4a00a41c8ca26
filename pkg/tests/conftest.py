import random

import numpy as np
import pytest
from hypothesis import strategies as st

from thyia.game import Action, advance, builtin_games, load_level
from thyia.gdf import CONDITIONS, OUTCOMES, GameSpec, Kind, SpriteDef, TerminationRule


@pytest.fixture(scope="session")
def games():
    return builtin_games()


@pytest.fixture(scope="session")
def coin_corridor(games):
    return games["CoinCorridor"]


@pytest.fixture(scope="session")
def coin_maze(games):
    return games["CoinMaze"]


@pytest.fixture(scope="session")
def key_door(games):
    return games["KeyDoor"]


@pytest.fixture(scope="session")
def dodge_runner(games):
    return games["DodgeRunner"]


MINIMAL_CORRIDOR = """\
game corridor

sprites
  A player avatar
  C coin collectible score=1

termination
  all-collected -> win
  timeout 20 -> loss

level
A..C
"""


@pytest.fixture(scope="session")
def corridor_text():
    return MINIMAL_CORRIDOR


def state_key(state):
    """Observable identity of a state, rng stream excluded."""
    return (
        state.avatar,
        state.avatar_alive,
        state.keys_held,
        frozenset(state.collectibles.items()),
        frozenset(state.keys.items()),
        frozenset(state.doors.items()),
        tuple(state.chasers),
        state.tick,
        state.score,
        state.status,
    )


def abstract_key(state):
    """state_key without the clock and score: the planning-relevant core."""
    return (
        state.avatar,
        state.avatar_alive,
        state.keys_held,
        frozenset(state.collectibles.items()),
        frozenset(state.keys.items()),
        frozenset(state.doors.items()),
        tuple(state.chasers),
    )


def bfs_oracle_policy(spec):
    """Optimal-action table for a deterministic game, by breadth-first search.

    Explores the abstract state graph (clock frozen so the timeout never
    interferes), then backward-inducts distance-to-win.  Returns
    (states, best_action, distance): representative state, optimal action id,
    and win distance per abstract key.  Oracle only; independent of the
    planner and learner code paths.
    """
    assert not spec.is_stochastic, "BFS oracle assumes a deterministic game"
    root = load_level(spec, 0)
    states = {abstract_key(root): root}
    edges = {}  # key -> {action: key2}
    win_keys = set()
    frontier = [root]
    while frontier:
        nxt = []
        for state in frontier:
            key = abstract_key(state)
            edges[key] = {}
            for action in Action:
                succ = advance(state, action)
                succ.tick = 0  # freeze the clock for exploration
                succ_key = abstract_key(succ)
                edges[key][int(action)] = (succ_key, succ.status)
                if succ.status == "win":
                    win_keys.add(succ_key)
                if succ.status == "running" and succ_key not in states:
                    states[succ_key] = succ
                    nxt.append(succ)
        frontier = nxt

    # backward induction over the abstract graph
    INF = float("inf")
    distance = {key: (0 if key in win_keys else INF) for key in states}
    for key in win_keys:
        distance.setdefault(key, 0)
    changed = True
    while changed:
        changed = False
        for key, moves in edges.items():
            best = distance.get(key, INF)
            for _, (succ_key, status) in moves.items():
                cand = 1 if status == "win" else 1 + distance.get(succ_key, INF)
                if cand < best:
                    best = cand
            if best < distance.get(key, INF):
                distance[key] = best
                changed = True

    best_action = {}
    for key, moves in edges.items():
        if distance.get(key, INF) is INF or key in win_keys:
            continue
        scored = []
        for action, (succ_key, status) in moves.items():
            cost = 1 if status == "win" else 1 + distance.get(succ_key, INF)
            scored.append((cost, action))
        cost, action = min(scored)
        if cost < INF:
            best_action[key] = action
    return states, best_action, distance


def oracle_training_examples(spec, extractor, bounds, count):
    """BFS-oracle (state, one-hot best action, value 1.0) training triples."""
    from thyia.learner import TrainingExample

    states, best_action, _ = bfs_oracle_policy(spec)
    keys = sorted(best_action, key=repr)
    examples = []
    i = 0
    while len(examples) < count:
        key = keys[i % len(keys)]
        state = states[key]
        policy = np.zeros(5)
        policy[best_action[key]] = 1.0
        examples.append(TrainingExample(extractor.featurize(state, bounds), policy, 1.0))
        i += 1
    return examples, len(keys)


class StubModel:
    """Planner-facing model stub with a fixed policy/value function."""

    version = 0

    def __init__(self, policy_fn, value_fn=lambda s: 0.5):
        self._policy = policy_fn
        self._value = value_fn

    def policy(self, state):
        return np.asarray(self._policy(state), dtype=np.float64)

    def value(self, state):
        return float(self._value(state))


def random_rollout(spec, seed, max_ticks=None):
    """Play uniformly random actions to termination; returns the trajectory."""
    rng = random.Random(seed)
    state = load_level(spec, seed)
    traj = [state]
    while state.running and (max_ticks is None or state.tick < max_ticks):
        state = advance(state, Action(rng.randrange(5)))
        traj.append(state)
    return traj


@st.composite
def game_specs(draw):
    """Random valid games ('#' excluded: not declarable through the text form)."""
    symbols = draw(st.lists(st.sampled_from("BCDEFGHKLMZW%+*"), min_size=1,
                            max_size=6, unique=True))
    kinds = [draw(st.sampled_from([k for k in Kind if k is not Kind.AVATAR]))
             for _ in symbols]
    sprites = [SpriteDef("A", "avatar", Kind.AVATAR)]
    for i, (sym, kind) in enumerate(zip(symbols, kinds)):
        sprites.append(SpriteDef(
            sym, f"sprite{i}", kind,
            score=draw(st.integers(-9, 99)),
            noise=draw(st.sampled_from([0.0, 0.1, 0.25])) if kind is Kind.CHASER else 0.0,
        ))
    width = draw(st.integers(2, 9))
    height = draw(st.integers(1, 7))
    cells = [draw(st.sampled_from([s.symbol for s in sprites[1:]] + ["."] * 4))
             for _ in range(width * height - 1)]
    avatar_at = draw(st.integers(0, width * height - 1))
    cells.insert(avatar_at, "A")
    level = tuple("".join(cells[y * width:(y + 1) * width]) for y in range(height))
    rules = [TerminationRule("timeout", draw(st.sampled_from(OUTCOMES)),
                             draw(st.integers(1, 200)))]
    for condition in draw(st.lists(st.sampled_from(
            [c for c in CONDITIONS if c != "timeout"]), max_size=3, unique=True)):
        rules.insert(0, TerminationRule(condition, draw(st.sampled_from(OUTCOMES))))
    return GameSpec(
        name=draw(st.sampled_from(["alpha", "Beta_2", "gamma-run"])),
        sprites=tuple(sorted(sprites, key=lambda s: s.symbol)),
        terminations=tuple(rules),
        level=level,
    )
