"""Acceptance suite: one test per acceptance criterion, stated tolerances.

Each test prints a single PASS line on success (run with -s to see them);
a failed assertion is the FAIL signal.
"""

import random
import time

import numpy as np
import pytest

from conftest import StubModel, oracle_training_examples
from test_gdf import MALFORMED
from thyia.game import (
    Action,
    ScoreBounds,
    advance,
    builtin_games,
    heuristic_value,
    load_level,
)
from thyia.gdf import GdfError, parse_gdf, serialize_gdf
from thyia.learner import (
    FeatureExtractor,
    GuidanceModel,
    init_model,
    loss_and_gradients,
    predict,
    train_step,
)
from thyia.ntbea import TuningConfig, onemax_problem, run_ntbea
from thyia.params import default_params, derive_seed, shared_default_space, space_cardinality
from thyia.planner import (
    Individual,
    RheaPlanner,
    WIN_DEPTH_EPSILON,
    blend_values,
    play_episode,
)
from thyia.runtime import PLAY_GAME, STRATEGY_HINT, Runtime, RuntimeConfig, Suggestion


def _report(name: str, detail: str = "") -> None:
    print(f"\nACCEPTANCE PASS: {name}" + (f" ({detail})" if detail else ""))


# ---------------------------------------------------------------------------

def test_fitness_blend_exactness(coin_maze):
    """Fitness blend: f = (1-alpha)*R + alpha*N, exact to 1e-12."""
    rng = random.Random(0)
    worst = 0.0
    for alpha in (0.0, 0.25, 0.5, 1.0):
        for _ in range(1000):
            r_value, n_value = rng.random(), rng.random()
            got = blend_values(r_value, n_value, alpha)
            worst = max(worst, abs(got - ((1 - alpha) * r_value + alpha * n_value)))
    assert worst <= 1e-12

    # the same blend through evaluate() end to end at the endpoints
    state = load_level(coin_maze, 0)
    still = Individual([4, 4, 4, 4])
    for alpha, expected in ((0.0, 0.1), (1.0, 0.875), (0.5, (0.1 + 0.875) / 2)):
        planner = RheaPlanner(
            default_params(alpha=alpha, individual_length=4),
            seed=0, model=StubModel(lambda s: [0.2] * 5, value_fn=lambda s: 0.875),
            bounds=ScoreBounds(0, 3))
        assert abs(planner.evaluate(still.copy(), state) - expected) <= 1e-12
    _report("fitness blend exactness", f"worst |err| = {worst:.2e}")


def test_mutation_zeroing(coin_corridor):
    """10^5 nn-weighted mutations never resample a gene to its old value."""
    start = time.time()
    state = load_level(coin_corridor, 0)
    rng = np.random.default_rng(0)
    policies = rng.dirichlet(np.ones(5), size=256)

    hits = 0
    count = 0
    planner = RheaPlanner(
        default_params(mutation_mode="nn-weighted", mutation_rate=1.0,
                       individual_length=3),
        seed=1, model=None, bounds=ScoreBounds(0, 3))
    current_policy = [None]
    planner.model = StubModel(lambda s: current_policy[0])

    trials = 0
    while count < 100_000:
        old_genes = [planner.rng.randrange(5) for _ in range(3)]
        if trials % 10 == 0:
            # degenerate case: policy one-hot on the gene's current value
            policy = np.zeros(5)
            policy[old_genes[0]] = 1.0
        else:
            policy = policies[trials % len(policies)]
        current_policy[0] = policy
        out = planner.mutate(Individual(list(old_genes)), state)
        for a, b in zip(old_genes, out.genes):
            count += 1
            hits += int(a == b)
        trials += 1
    elapsed = time.time() - start
    assert hits == 0
    assert elapsed < 10.0
    _report("mutation zeroing", f"{count} resamples, {hits} collisions, {elapsed:.1f}s")


def test_determinism_and_fingerprint(tmp_path):
    """Equal fingerprint + model snapshot => identical 100-tick traces on all
    built-in games; snapshot/restore continuation equality over 10 episodes."""
    start = time.time()
    params = default_params(budget=250, population_size=5, individual_length=6)

    for name, spec in builtin_games().items():
        model = GuidanceModel(
            init_model(name, FeatureExtractor(spec).length, 32, 32, seed=9),
            FeatureExtractor(spec), ScoreBounds(0, 5))
        traces = []
        for _ in range(2):
            planner = RheaPlanner(params, seed=77, model=model, bounds=ScoreBounds(0, 5))
            actions = []
            episode = 0
            state = load_level(spec, derive_seed(77, name, episode))
            planner.begin_episode()
            while len(actions) < 100:
                if not state.running:
                    episode += 1
                    state = load_level(spec, derive_seed(77, name, episode))
                    planner.begin_episode()
                action = planner.plan_action(state)
                actions.append(int(action))
                state = advance(state, action)
            traces.append(actions)
        assert traces[0] == traces[1], f"trace divergence on {name}"

    runtime = Runtime(RuntimeConfig(
        master_seed=13, params=params, games=["CoinCorridor", "DodgeRunner"]))
    for _ in range(4):
        runtime.step_cycle()
    snap = str(tmp_path / "snap")
    runtime.snapshot(snap)
    restored = Runtime.restore(snap)
    control = [runtime.step_cycle() for _ in range(10)]
    resumed = [restored.step_cycle() for _ in range(10)]
    for a, b in zip(control, resumed):
        assert (a.game, a.seed, a.actions, a.score, a.outcome) == \
               (b.game, b.seed, b.actions, b.score, b.outcome)
    elapsed = time.time() - start
    assert elapsed < 60.0
    _report("determinism and fingerprint", f"{elapsed:.1f}s")


def _exhaustive_best_first_actions(spec, length, bounds):
    """Enumerate all 5^L action sequences (shared prefixes; a terminal state
    fixes the value of every continuation) and return the optimal first
    actions under the planner's value convention."""
    best: dict[int, float] = {}

    def value(state, depth):
        v = heuristic_value(state, bounds)
        if v == 1.0:
            v += min(0.01, (length - depth) * WIN_DEPTH_EPSILON)
        return v

    def walk(state, depth, first):
        if depth == length or not state.running:
            v = value(state, depth)
            if v > best.get(first, -1.0):
                best[first] = v
            return
        for action in range(5):
            walk(advance(state, Action(action)), depth + 1, first)

    root = load_level(spec, 0)
    for action in range(5):
        walk(advance(root, Action(action)), 1, action)
    top = max(best.values())
    return {a for a, v in best.items() if v == top}


def test_planning_oracle(coin_corridor):
    """plan_action matches the exhaustive-search-optimal first action in at
    least 95 of 100 seeded episodes (budget 500, P=10, L=6, alpha=0)."""
    start = time.time()
    bounds = ScoreBounds(0, 3)
    optimal = _exhaustive_best_first_actions(coin_corridor, 6, bounds)
    assert optimal == {int(Action.RIGHT)}  # right-prefixed sequences win earliest

    params = default_params(budget=500, population_size=10,
                            individual_length=6, alpha=0.0)
    hits = 0
    for seed in range(100):
        planner = RheaPlanner(params, seed=seed, bounds=bounds)
        hits += int(int(planner.plan_action(load_level(coin_corridor, seed))) in optimal)
    elapsed = time.time() - start
    assert hits >= 95, f"only {hits}/100 matched the oracle"
    assert elapsed < 60.0
    _report("planning oracle", f"{hits}/100 matches, {elapsed:.1f}s")


def test_ntbea_oracle():
    """Noisy OneMax (2^5, sigma 0.1, T=200): the known optimum is recommended
    in at least 90 of 100 seeds."""
    start = time.time()
    hits = 0
    for seed in range(100):
        result = run_ntbea(onemax_problem(5, 0.1, seed=1000 + seed),
                           TuningConfig(budget=200, seed=seed))
        hits += int(all(result.recommended[f"bit{i}"] == 1 for i in range(5)))
    elapsed = time.time() - start
    assert hits >= 90, f"only {hits}/100 found the optimum"
    assert elapsed < 60.0
    _report("ntbea oracle", f"{hits}/100 optima, {elapsed:.1f}s")


def test_gradient_check():
    """Analytic gradients match central finite differences (h=1e-5) within
    1e-3 relative error on 20 random models and batches."""
    start = time.time()
    from test_learner import make_example

    h = 1e-5
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        model = init_model("g", 10, 6, 5, seed=seed)
        for arr in model.arrays():
            arr += rng.normal(0, 0.3, arr.shape)
        batch = [make_example(rng, 10) for _ in range(3)]
        l2 = 0.0001 if seed % 4 == 0 else 0.0
        _, grads = loss_and_gradients(model, batch, l2=l2)
        for name in ("w1", "b1", "w2", "b2", "wp", "bp", "wv", "bv"):
            arr = getattr(model, name)
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                keep = arr[idx]
                arr[idx] = keep + h
                up, _ = loss_and_gradients(model, batch, l2=l2)
                arr[idx] = keep - h
                down, _ = loss_and_gradients(model, batch, l2=l2)
                arr[idx] = keep
                fd = (up - down) / (2 * h)
                rel = abs(fd - grads[name][idx]) / max(abs(fd), abs(grads[name][idx]), 1e-8)
                worst = max(worst, rel)
        assert worst < 1e-3, f"model {seed}: relative error {worst:.2e}"
    elapsed = time.time() - start
    assert elapsed < 30.0
    _report("gradient check", f"max rel err {worst:.2e}, {elapsed:.1f}s")


def _train_on_oracle(spec, bounds, count, seed=0):
    extractor = FeatureExtractor(spec)
    examples, distinct = oracle_training_examples(spec, extractor, bounds, count)
    model = init_model(spec.name, extractor.length, 64, 64, seed=seed)
    rng = random.Random(seed)
    velocity = {}
    for _ in range(400):
        order = list(range(len(examples)))
        rng.shuffle(order)
        for i in range(0, len(order), 32):
            batch = [examples[j] for j in order[i:i + 32]]
            train_step(model, batch, 0.03, velocity=velocity, momentum=0.9)
    correct = sum(
        int(np.argmax(predict(model, e.features)[0]) == np.argmax(e.policy))
        for e in examples)
    return model, extractor, correct / len(examples), distinct


def test_learning_effect(coin_maze, key_door):
    """(a) policy top-1 accuracy >= 90% after training on 200 BFS-oracle
    examples from CoinMaze; (b) nn-seeded initialisation at budget 50 is at
    least as good as uniform over 200 paired seeds on KeyDoor."""
    start = time.time()
    _, _, accuracy, distinct = _train_on_oracle(coin_maze, ScoreBounds(0, 4), 200)
    assert accuracy >= 0.90, f"top-1 accuracy {accuracy:.1%}"

    kd_model, kd_extractor, kd_acc, _ = _train_on_oracle(key_door, ScoreBounds(0, 5), 200)
    handle = GuidanceModel(kd_model, kd_extractor, ScoreBounds(0, 5))
    base = dict(budget=50, population_size=5, individual_length=8, alpha=0.0)
    uniform_params = default_params(**base)
    seeded_params = default_params(**base, init_mode="nn-seeded")
    uniform_fit, seeded_fit = [], []
    for seed in range(200):
        planner = RheaPlanner(uniform_params, seed=derive_seed(1, "p", seed),
                              bounds=ScoreBounds(0, 5))
        uniform_fit.append(play_episode(key_door, planner,
                                        derive_seed(2, "e", seed)).final_value)
        planner = RheaPlanner(seeded_params, seed=derive_seed(1, "p", seed),
                              model=handle, bounds=ScoreBounds(0, 5))
        seeded_fit.append(play_episode(key_door, planner,
                                       derive_seed(2, "e", seed)).final_value)
    mean_uniform = sum(uniform_fit) / len(uniform_fit)
    mean_seeded = sum(seeded_fit) / len(seeded_fit)
    elapsed = time.time() - start
    assert mean_seeded >= mean_uniform
    assert elapsed < 300.0
    _report("learning effect",
            f"top-1 {accuracy:.1%} over {distinct} states; KeyDoor mean fitness "
            f"nn-seeded {mean_seeded:.3f} vs uniform {mean_uniform:.3f}, {elapsed:.0f}s")


def test_parameter_space_cardinality():
    """At least 30 registered parameters; cardinality is the exact big-integer
    product, cross-checked against hand-computed sub-registry products."""
    space = shared_default_space()
    assert len(space) >= 30

    # hand-computed from the declared arities:
    # 5,7,5,3,3,3,2,2,2,2,4,2,2,2,2,2,5,6,4,3,2,2,4,2,3,3,2,2,2,2,2
    arities = space.arities()
    assert arities == [5, 7, 5, 3, 3, 3, 2, 2, 2, 2, 4, 2, 2, 2, 2, 2,
                       5, 6, 4, 3, 2, 2, 4, 2, 3, 3, 2, 2, 2, 2, 2]
    from thyia.params import ParameterSpace

    sub_expected = {3: 175, 5: 1575, 8: 18900, 12: 604800, 20: 3_483_648_000}
    for k, expected in sub_expected.items():
        sub = ParameterSpace([space[i] for i in range(k)])
        assert space_cardinality(sub) == expected, f"first {k} parameters"
    full = space_cardinality(space)
    assert full == 32_105_299_968_000
    assert full >= 10 ** 12
    _report("parameter space", f"{len(space)} parameters, cardinality {full:,}")


def test_gdf_roundtrip_and_diagnostics(games):
    """parse-serialize identity on the built-in suite; every malformed fixture
    yields its designated diagnostic."""
    for spec in games.values():
        assert parse_gdf(serialize_gdf(spec)) == spec
    fixtures = MALFORMED[:10] if len(MALFORMED) >= 10 else MALFORMED
    assert len(fixtures) >= 10
    for code, text in fixtures:
        with pytest.raises(GdfError) as err:
            parse_gdf(text)
        assert err.value.code == code
    _report("gdf round-trip and diagnostics",
            f"{len(games)} games, {len(fixtures)} malformed fixtures")


ADVERSARIAL_GDF = [
    "game broken\nnot a block",
    "game g\n\nsprites\n  A a avatar\n\ntermination\n  all-collected -> win\n\nlevel\nA.",
    "game g\n\nsprites\n  A a wizard\n\ntermination\n  timeout 5 -> loss\n\nlevel\nA.",
    "",
]


def test_runtime_liveness():
    """500 step_cycles under adversarial suggestion fixtures complete without
    loop termination; every rejection is logged."""
    start = time.time()
    runtime = Runtime(RuntimeConfig(
        master_seed=99,
        params=default_params(budget=100, population_size=5, individual_length=4),
        games=["CoinCorridor", "CoinMaze"],
        blocklist=[("blocklist-1", "troll"), ("blocklist-2", "poison")],
    ))
    rejected = 0
    completed = 0
    rng = random.Random(0)
    for cycle in range(500):
        kind = cycle % 5
        if kind == 0:
            ok, _ = runtime.enqueue_suggestion(Suggestion(
                kind=PLAY_GAME, gdf=ADVERSARIAL_GDF[cycle % len(ADVERSARIAL_GDF)]))
            rejected += int(not ok)
        elif kind == 1:
            ok, _ = runtime.enqueue_suggestion(Suggestion(
                kind=PLAY_GAME, game="a TROLL wrote this"))
            rejected += int(not ok)
        elif kind == 2:
            ok, _ = runtime.enqueue_suggestion(Suggestion(
                kind=STRATEGY_HINT, bias=[float("nan")] * 5))
            rejected += int(not ok)
        elif kind == 3:
            ok, _ = runtime.enqueue_suggestion(Suggestion(
                kind=STRATEGY_HINT, bias=[rng.uniform(-1, 1) for _ in range(5)],
                submitter="poison pen"))
            rejected += int(not ok)
        else:
            ok, _ = runtime.enqueue_suggestion(Suggestion(kind=PLAY_GAME, game="CoinCorridor"))
            rejected += int(not ok)
        record = runtime.step_cycle()
        completed += 1
        if record is not None:
            assert record.outcome in ("win", "loss")
    elapsed = time.time() - start
    assert completed == 500
    rejection_events = [e for e in runtime.events if e["type"] == "rejection"]
    assert len(rejection_events) == rejected
    assert rejected >= 300  # the adversarial fixtures really were adversarial
    errors = [e for e in runtime.events if e["type"] == "error"]
    assert not errors  # content failures are rejections, never crashes
    assert elapsed < 300.0
    _report("runtime liveness",
            f"500 cycles, {rejected} rejections logged, {elapsed:.0f}s")
