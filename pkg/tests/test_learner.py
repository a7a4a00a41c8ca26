import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import state_key
from thyia.game import Action, ScoreBounds, advance, load_level, observe
from thyia.gdf import KIND_COUNT
from thyia.learner import (
    FeatureExtractor,
    GridObservation,
    ModelFileError,
    NonFiniteLossError,
    ReplayBuffer,
    TrainingExample,
    init_model,
    load_model,
    loss_and_gradients,
    policy_target,
    predict,
    record_episode,
    save_model,
    softmax,
    train_step,
)
from thyia.planner import Individual


def make_example(rng, n_in, one_hot=False):
    features = rng.uniform(0, 1, n_in)
    if one_hot:
        policy = np.zeros(5)
        policy[rng.integers(5)] = 1.0
    else:
        policy = rng.uniform(0.05, 1, 5)
        policy /= policy.sum()
    return TrainingExample(features, policy, float(rng.uniform(0, 1)))


class TestSoftmax:
    def test_zeros_give_uniform(self):
        assert softmax(np.zeros(5)) == pytest.approx([0.2] * 5)

    def test_shift_invariance(self):
        logits = np.array([1.3, -0.2, 0.0, 2.4, -3.1])
        shifted = softmax(logits + 17.5)
        assert np.abs(shifted - softmax(logits)).max() < 1e-12

    def test_analytic_point(self):
        out = softmax(np.array([math.log(2), 0, 0, 0, 0]))
        assert out == pytest.approx([1 / 3, 1 / 6, 1 / 6, 1 / 6, 1 / 6])

    @given(st.lists(st.floats(-50, 50), min_size=5, max_size=5))
    @settings(max_examples=200, deadline=None)
    def test_valid_distribution(self, logits):
        out = softmax(np.array(logits))
        assert (out >= 0).all()
        assert abs(out.sum() - 1.0) < 1e-9


class TestFeaturize:
    def test_empty_grid_has_only_scalars(self):
        obs = GridObservation(2, 2, ((0, 0), (0, 0)))
        spec = type("S", (), {"width": 2, "height": 2, "timeout": 10})
        ex = FeatureExtractor.__new__(FeatureExtractor)
        ex.spec, ex.width, ex.height = spec, 2, 2
        ex.length = 2 * 2 * KIND_COUNT + 3
        vec = ex.from_observation(obs, 0.0, 0.5, 0.0)
        assert vec[:-3].sum() == 0.0
        assert list(vec[-3:]) == [0.0, 0.5, 0.0]

    def test_avatar_sets_one_bit_in_avatar_plane(self, coin_corridor):
        ex = FeatureExtractor(coin_corridor)
        state = load_level(coin_corridor, 0)
        vec = ex.featurize(state, ScoreBounds(0, 3))
        avatar_plane = vec[:-3].reshape(-1, KIND_COUNT)[:, 0]
        assert avatar_plane.sum() == 1.0
        assert avatar_plane[0] == 1.0  # cell (0,0)

    def test_entries_stay_in_unit_interval(self, key_door):
        ex = FeatureExtractor(key_door)
        state = load_level(key_door, 0)
        for _ in range(30):
            vec = ex.featurize(state, ScoreBounds(0, 5))
            assert (vec >= 0).all() and (vec <= 1).all()
            if not state.running:
                break
            state = advance(state, Action(random.Random(state.tick).randrange(5)))

    def test_dimension_mismatch_rejected(self, coin_corridor, coin_maze):
        ex = FeatureExtractor(coin_corridor)
        with pytest.raises(ValueError):
            ex.from_observation(observe(load_level(coin_maze, 0)), 0, 0, 0)

    def test_injective_over_coin_corridor_reachable_states(self, coin_corridor):
        # enumerate every reachable state (tick included) and check no feature
        # collisions between observably-distinct states
        ex = FeatureExtractor(coin_corridor)
        bounds = ScoreBounds(0, 3)
        seen = {}
        frontier = [load_level(coin_corridor, 0)]
        visited = {state_key(frontier[0])}
        while frontier:
            nxt = []
            for state in frontier:
                vec = tuple(ex.featurize(state, bounds))
                key = state_key(state)
                assert seen.get(vec, key) == key, "feature collision"
                seen[vec] = key
                if not state.running:
                    continue
                for action in Action:
                    succ = advance(state, action)
                    if state_key(succ) not in visited:
                        visited.add(state_key(succ))
                        nxt.append(succ)
            frontier = nxt
        assert len(seen) > 50


class TestPredict:
    def test_zero_weights_uniform_policy_half_value(self):
        model = init_model("g", 7, 4, 4, seed=0)
        for arr in model.arrays():
            arr[...] = 0.0
        policy, value = predict(model, np.zeros(7))
        assert policy == pytest.approx([0.2] * 5)
        assert value == 0.5

    def test_deterministic_bit_equal(self):
        model = init_model("g", 7, 4, 4, seed=1)
        x = np.linspace(0, 1, 7)
        p1, v1 = predict(model, x)
        p2, v2 = predict(model, x)
        assert np.array_equal(p1, p2) and v1 == v2

    def test_fuzz_outputs_always_valid(self):
        rng = np.random.default_rng(0)
        for trial in range(10_000):
            model = init_model("g", 5, 3, 3, seed=trial)
            scale = rng.uniform(0.1, 30)
            for arr in model.arrays():
                arr *= scale
            policy, value = predict(model, rng.uniform(0, 1, 5))
            assert abs(policy.sum() - 1.0) < 1e-9
            assert (policy >= 0).all()
            assert 0.0 < value < 1.0

    def test_dimension_mismatch(self):
        model = init_model("g", 7, 4, 4, seed=1)
        with pytest.raises(ValueError):
            predict(model, np.zeros(8))


class TestPolicyTarget:
    def test_single_action_population_is_one_hot(self):
        pop = [Individual([3, 0], 0.8), Individual([3, 1], 0.4)]
        assert policy_target(pop) == pytest.approx([0, 0, 0, 1.0, 0])

    def test_symmetric_halves(self):
        pop = [Individual([2, 0], 0.5), Individual([3, 0], 0.5)]
        assert policy_target(pop) == pytest.approx([0, 0, 0.5, 0.5, 0])

    def test_all_zero_fitness_uniform(self):
        pop = [Individual([0, 0], 0.0), Individual([1, 0], 0.0)]
        assert policy_target(pop) == pytest.approx([0.2] * 5)


class TestReplayBuffer:
    def test_record_episode_values_and_count(self):
        buf = ReplayBuffer(100)
        steps = [(np.zeros(3), np.full(5, 0.2)) for _ in range(10)]
        n = record_episode(buf, steps, terminal_value=1.0)
        assert n == 10 and len(buf) == 10
        assert all(e.value == 1.0 for e in buf)

    def test_fifo_eviction(self):
        buf = ReplayBuffer(5)
        for i in range(8):
            buf.add(TrainingExample(np.array([float(i)]), np.full(5, 0.2), 0.0))
        assert len(buf) == 5
        assert [e.features[0] for e in buf] == [3.0, 4.0, 5.0, 6.0, 7.0]

    def test_policies_remain_valid_distributions(self):
        buf = ReplayBuffer(10)
        record_episode(buf, [(np.zeros(2), np.array([0.5, 0.5, 0, 0, 0]))], 0.0)
        for e in buf:
            assert abs(e.policy.sum() - 1.0) < 1e-9

    def test_npz_roundtrip(self, tmp_path):
        buf = ReplayBuffer(7)
        rng = np.random.default_rng(0)
        for _ in range(4):
            buf.add(make_example(rng, 6))
        path = str(tmp_path / "buf.npz")
        buf.save_npz(path)
        loaded = ReplayBuffer.load_npz(path)
        assert loaded.capacity == 7 and len(loaded) == 4
        for a, b in zip(buf, loaded):
            assert np.array_equal(a.features, b.features)
            assert np.array_equal(a.policy, b.policy)
            assert a.value == b.value


class TestTraining:
    def test_lr_zero_leaves_weights(self):
        model = init_model("g", 6, 4, 4, seed=0)
        before = [a.copy() for a in model.arrays()]
        rng = np.random.default_rng(1)
        loss = train_step(model, [make_example(rng, 6)], 0.0)
        assert loss > 0
        assert all(np.array_equal(a, b) for a, b in zip(model.arrays(), before))
        assert model.step == 1

    def test_memorizable_batch_halves_loss(self):
        # fixed 2-example batch, lr 1e-2, 200 steps from the seed-0 init
        model = init_model("g", 16, 32, 32, seed=0)
        rng = np.random.default_rng(5)
        batch = [make_example(rng, 16, one_hot=True) for _ in range(2)]
        initial = train_step(model, batch, 0.0)
        loss = initial
        for _ in range(200):
            loss = train_step(model, batch, 1e-2)
        assert loss <= 0.5 * initial, (initial, loss)

    def test_gradients_match_finite_differences(self):
        failures = []
        for seed in range(3):
            model = init_model("g", 9, 6, 5, seed=seed)
            jitter = np.random.default_rng(seed + 100)
            for arr in model.arrays():
                arr += jitter.normal(0, 0.3, arr.shape)
            batch = [make_example(jitter, 9) for _ in range(3)]
            l2 = 0.0001 if seed == 0 else 0.0
            _, grads = loss_and_gradients(model, batch, l2=l2)
            h = 1e-5
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
                    if rel >= 1e-3:
                        failures.append((seed, name, idx, rel))
        assert not failures, failures[:5]

    def test_non_finite_loss_aborts_without_touching_model(self):
        model = init_model("g", 4, 3, 3, seed=0)
        model.w1[...] = np.inf
        before_step = model.step
        bad = TrainingExample(np.ones(4), np.full(5, 0.2), 0.5)
        with np.errstate(all="ignore"), pytest.raises(NonFiniteLossError):
            train_step(model, [bad], 0.01)
        assert model.step == before_step

    def test_empty_batch_rejected(self):
        model = init_model("g", 4, 3, 3, seed=0)
        with pytest.raises(ValueError):
            train_step(model, [], 0.01)

    def test_momentum_and_clip_paths_update(self):
        rng = np.random.default_rng(3)
        batch = [make_example(rng, 6) for _ in range(4)]
        model = init_model("g", 6, 4, 4, seed=2)
        velocity = {}
        l1 = train_step(model, batch, 0.01, velocity=velocity, momentum=0.9)
        l2 = train_step(model, batch, 0.01, velocity=velocity, momentum=0.9)
        assert velocity and l2 < l1
        clipped = init_model("g", 6, 4, 4, seed=2)
        train_step(clipped, batch, 0.01, grad_clip=1e-6)  # crushes the step
        reference = init_model("g", 6, 4, 4, seed=2)
        drift = max(np.abs(a - b).max() for a, b in zip(clipped.arrays(), reference.arrays()))
        assert drift < 1e-6


class TestModelIO:
    def test_roundtrip_bit_exact(self, tmp_path):
        model = init_model("CoinMaze", 12, 8, 8, seed=3)
        model.step = 42
        rng = np.random.default_rng(0)
        for _ in range(5):
            train_step(model, [make_example(rng, 12)], 0.01)
        path = str(tmp_path / "m.thy")
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.game_id == "CoinMaze"
        assert loaded.step == model.step
        assert model.same_weights(loaded)
        x = rng.uniform(0, 1, 12)
        assert np.array_equal(predict(model, x)[0], predict(loaded, x)[0])
        assert predict(model, x)[1] == predict(loaded, x)[1]

    def test_truncated_file_errors_cleanly(self, tmp_path):
        model = init_model("g", 6, 4, 4, seed=0)
        path = str(tmp_path / "m.thy")
        save_model(model, path)
        blob = open(path, "rb").read()
        for cut in (3, 10, len(blob) // 2, len(blob) - 1):
            open(path, "wb").write(blob[:cut])
            with pytest.raises(ModelFileError):
                load_model(path)

    def test_wrong_game_rejected(self, tmp_path):
        model = init_model("CoinMaze", 6, 4, 4, seed=0)
        path = str(tmp_path / "m.thy")
        save_model(model, path)
        with pytest.raises(ModelFileError):
            load_model(path, expect_game="KeyDoor")

    def test_missing_file_errors(self, tmp_path):
        with pytest.raises(ModelFileError):
            load_model(str(tmp_path / "absent.thy"))

    def test_bad_magic_rejected(self, tmp_path):
        path = str(tmp_path / "m.thy")
        with open(path, "wb") as fh:
            fh.write(b"NOPE" + b"\0" * 64)
        with pytest.raises(ModelFileError):
            load_model(path)
