"""Network tests: forward algebra, exact gradients, Adam, checkpoints."""

import numpy as np
import pytest

from sls import nn


def to_float64(params):
    return nn.NetworkParams(
        arch=params.arch,
        obs_size=params.obs_size,
        arrays={k: v.astype(np.float64) for k, v in params.arrays.items()},
    )


def fd_gradients(params, batch, h=1e-3):
    """Central finite differences of the batch loss, in 64-bit arithmetic."""
    params64 = to_float64(params)
    grads = {}
    for name, arr in params64.arrays.items():
        grad = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up = nn.loss(params64, batch)
            flat[i] = keep - h
            down = nn.loss(params64, batch)
            flat[i] = keep
            gflat[i] = (up - down) / (2 * h)
        grads[name] = grad
    return grads


def max_relative_error(a, b, floor=1e-6):
    worst = 0.0
    for name in a:
        diff = np.abs(np.asarray(a[name], np.float64) - np.asarray(b[name], np.float64))
        scale = np.maximum(np.abs(np.asarray(b[name], np.float64)), floor)
        worst = max(worst, float((diff / scale).max()))
    return worst


def random_batch(rng, obs_size, batch_size, n_actions=10):
    return nn.Batch(
        inputs=rng.normal(size=(batch_size, obs_size)).astype(np.float32),
        actions=rng.integers(n_actions, size=batch_size),
        targets=rng.normal(scale=2.0, size=batch_size).astype(np.float32),
    )


def kink_margin(params, inputs):
    """Distance of the closest relu pre-activation to zero."""
    a = {k: v.astype(np.float64) for k, v in params.arrays.items()}
    z1 = inputs.astype(np.float64) @ a["w1"] + a["b1"]
    z2 = np.maximum(z1, 0) @ a["w2"] + a["b2"]
    return min(np.abs(z1).min(), np.abs(z2).min())


def safe_net_and_batch(rng, arch, h=1e-3):
    """A random small net and batch with pre-activations clear of the relu
    kink, so central differences measure a true derivative."""
    while True:
        obs = int(rng.integers(2, 9))
        params = nn.init(arch, obs, seed=int(rng.integers(1_000_000)), hidden=4)
        for name in ("b1", "b2"):
            params.arrays[name] += rng.normal(
                scale=0.3, size=params.arrays[name].shape
            ).astype(np.float32)
        batch = random_batch(rng, obs, batch_size=3)
        if kink_margin(params, batch.inputs) > 20 * h:
            return params, batch


class TestInit:
    def test_deterministic_per_seed(self):
        a = nn.init(nn.STANDARD, 509, seed=5)
        b = nn.init(nn.STANDARD, 509, seed=5)
        for name in a.arrays:
            assert np.array_equal(a.arrays[name], b.arrays[name])
        c = nn.init(nn.STANDARD, 509, seed=6)
        assert not np.array_equal(a.arrays["w1"], c.arrays["w1"])

    def test_standard_shapes(self):
        params = nn.init(nn.STANDARD, 509, seed=0)
        shapes = {k: v.shape for k, v in params.arrays.items()}
        assert shapes == {
            "w1": (509, 64), "b1": (64,),
            "w2": (64, 64), "b2": (64,),
            "w3": (64, 10), "b3": (10,),
        }

    def test_dueling_shapes(self):
        params = nn.init(nn.DUELING, 509, seed=0)
        shapes = {k: v.shape for k, v in params.arrays.items()}
        assert shapes == {
            "w1": (509, 64), "b1": (64,),
            "w2": (64, 64), "b2": (64,),
            "wv": (64, 1), "bv": (1,),
            "wa": (64, 10), "ba": (10,),
        }

    def test_biases_zero_and_weights_bounded(self):
        params = nn.init(nn.STANDARD, 32, seed=1)
        for name, arr in params.arrays.items():
            if name.startswith("b"):
                assert not arr.any()
            else:
                bound = np.sqrt(6.0 / sum(arr.shape))
                assert np.abs(arr).max() <= bound

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            nn.init("conv", 10, seed=0)
        with pytest.raises(ValueError):
            nn.init(nn.STANDARD, 0, seed=0)


class TestForward:
    def test_zero_weights_give_zero_q(self):
        params = nn.init(nn.STANDARD, 16, seed=0)
        for arr in params.arrays.values():
            arr[:] = 0
        q = nn.forward(params, np.ones((3, 16), np.float32))
        assert not q.any() and q.shape == (3, 10)

    def test_hand_computed_single_unit_chain(self):
        # 1 -> 1 -> 1 -> 1 with unit weights and zero biases: relu passthrough
        params = nn.NetworkParams(
            arch=nn.STANDARD,
            obs_size=1,
            arrays={
                "w1": np.ones((1, 1), np.float32), "b1": np.zeros(1, np.float32),
                "w2": np.ones((1, 1), np.float32), "b2": np.zeros(1, np.float32),
                "w3": np.ones((1, 1), np.float32), "b3": np.zeros(1, np.float32),
            },
        )
        q = nn.forward(params, np.array([[2.0]], np.float32))
        assert q.tolist() == [[2.0]]
        q = nn.forward(params, np.array([[-3.0]], np.float32))
        assert q.tolist() == [[0.0]]  # relu clips the negative path

    def test_dueling_mean_equals_value(self):
        rng = np.random.default_rng(3)
        params = nn.init(nn.DUELING, 12, seed=9)
        x = rng.normal(size=(5, 12)).astype(np.float32)
        q = nn.forward(params, x)
        a = params.arrays
        z1 = np.maximum(x @ a["w1"] + a["b1"], 0)
        h2 = np.maximum(z1 @ a["w2"] + a["b2"], 0)
        value = (h2 @ a["wv"] + a["bv"])[:, 0]
        assert np.abs(q.mean(axis=1) - value).max() < 1e-5

    def test_shape_mismatch_rejected(self):
        params = nn.init(nn.STANDARD, 8, seed=0)
        with pytest.raises(ValueError):
            nn.forward(params, np.ones((2, 9), np.float32))
        with pytest.raises(ValueError):
            nn.forward(params, np.ones(8, np.float32))


class TestBackward:
    def test_zero_error_means_zero_gradients(self):
        params = nn.init(nn.STANDARD, 6, seed=2, hidden=4)
        x = np.random.default_rng(0).normal(size=(4, 6)).astype(np.float32)
        actions = np.array([0, 3, 7, 9])
        q = nn.forward(params, x)
        batch = nn.Batch(x, actions, q[np.arange(4), actions])
        grads = nn.backward(params, batch)
        for arr in grads.values():
            assert np.abs(arr).max() < 1e-6

    def test_final_layer_gradient_matches_closed_form(self):
        # passthrough trunk turns the net into a single linear layer, where
        # dL/dw3 = 2 (q - y) x for a single example
        params = nn.NetworkParams(
            arch=nn.STANDARD,
            obs_size=1,
            arrays={
                "w1": np.ones((1, 1), np.float32), "b1": np.zeros(1, np.float32),
                "w2": np.ones((1, 1), np.float32), "b2": np.zeros(1, np.float32),
                "w3": np.full((1, 1), 0.5, np.float32), "b3": np.zeros(1, np.float32),
            },
        )
        x = np.array([[3.0]], np.float32)
        target = np.array([2.0], np.float32)
        q = nn.forward(params, x)[0, 0]  # 1.5
        grads = nn.backward(params, nn.Batch(x, np.array([0]), target))
        assert grads["w3"][0, 0] == pytest.approx(2 * (q - 2.0) * 3.0)
        assert grads["b3"][0] == pytest.approx(2 * (q - 2.0))

    def test_gradient_only_flows_through_taken_actions(self):
        params = nn.init(nn.STANDARD, 5, seed=4, hidden=3)
        x = np.random.default_rng(1).normal(size=(1, 5)).astype(np.float32)
        grads = nn.backward(params, nn.Batch(x, np.array([2]), np.array([1.0])))
        # output bias gradient is zero everywhere except the taken action
        nonzero = np.flatnonzero(grads["b3"])
        assert nonzero.tolist() == [2]

    @pytest.mark.parametrize("arch", [nn.STANDARD, nn.DUELING])
    def test_matches_finite_differences(self, arch):
        rng = np.random.default_rng(11)
        for _ in range(4):
            params, batch = safe_net_and_batch(rng, arch)
            batch64 = nn.Batch(
                batch.inputs.astype(np.float64),
                batch.actions,
                batch.targets.astype(np.float64),
            )
            exact = nn.backward(to_float64(params), batch64)
            oracle = fd_gradients(params, batch64)
            assert max_relative_error(exact, oracle) < 1e-4
            # the float32 training path tracks the 64-bit gradients closely
            trained = nn.backward(params, batch)
            assert max_relative_error(trained, exact, floor=1e-3) < 1e-3


class TestAdam:
    def test_zero_gradient_keeps_params(self):
        params = nn.init(nn.STANDARD, 4, seed=0, hidden=3)
        reference = nn.copy_params(params)
        state = nn.init_adam(params)
        zero = {k: np.zeros_like(v) for k, v in params.arrays.items()}
        nn.adam_step(params, zero, state)
        for name in params.arrays:
            assert np.array_equal(params.arrays[name], reference.arrays[name])
        assert state.t == 1

    def test_first_step_magnitude(self):
        # biases start at zero, so the update lands free of rounding noise
        params = nn.init(nn.STANDARD, 4, seed=0, hidden=3)
        state = nn.init_adam(params, lr=0.001)
        grads = {k: np.zeros_like(v) for k, v in params.arrays.items()}
        grads["b1"] = np.ones_like(params.arrays["b1"])
        nn.adam_step(params, grads, state)
        delta = params.arrays["b1"].astype(np.float64)
        assert np.abs(delta + 0.001).max() < 1e-9

    def test_deterministic_updates(self):
        def run():
            params = nn.init(nn.STANDARD, 6, seed=3, hidden=4)
            state = nn.init_adam(params)
            rng = np.random.default_rng(8)
            for _ in range(25):
                grads = {k: rng.normal(size=v.shape).astype(np.float32)
                         for k, v in params.arrays.items()}
                nn.adam_step(params, grads, state)
            return params
        a, b = run(), run()
        for name in a.arrays:
            assert np.array_equal(a.arrays[name], b.arrays[name])

    def test_long_random_training_stays_finite(self):
        params = nn.init(nn.STANDARD, 8, seed=5, hidden=4)
        state = nn.init_adam(params)
        rng = np.random.default_rng(42)
        x = rng.normal(size=(16, 8)).astype(np.float32)
        for step in range(100_000):
            batch = nn.Batch(
                inputs=x,
                actions=rng.integers(10, size=16),
                targets=rng.uniform(-10, 10, size=16).astype(np.float32),
            )
            grads = nn.backward(params, batch)
            nn.adam_step(params, grads, state)
            if step % 20_000 == 0:
                assert nn.all_finite(params)
        assert nn.all_finite(params)


class TestCopy:
    def test_copy_is_independent(self):
        src = nn.init(nn.STANDARD, 7, seed=1, hidden=4)
        dst = nn.copy_params(src)
        x = np.random.default_rng(2).normal(size=(2, 7)).astype(np.float32)
        assert np.array_equal(nn.forward(src, x), nn.forward(dst, x))
        src.arrays["w1"][:] = 0
        assert dst.arrays["w1"].any()

    def test_copy_of_copy(self):
        src = nn.init(nn.DUELING, 7, seed=1, hidden=4)
        twice = nn.copy_params(nn.copy_params(src))
        for name in src.arrays:
            assert np.array_equal(src.arrays[name], twice.arrays[name])


class TestCheckpoint:
    @pytest.mark.parametrize("arch", [nn.STANDARD, nn.DUELING])
    def test_bit_exact_round_trip(self, tmp_path, arch):
        params = nn.init(arch, 509, seed=13)
        path = tmp_path / "net.qnet"
        nn.save_params(path, params)
        loaded = nn.load_params(path)
        assert loaded.arch == arch and loaded.obs_size == 509
        for name in params.arrays:
            assert loaded.arrays[name].tobytes() == params.arrays[name].tobytes()

    def test_small_net_round_trip(self, tmp_path):
        params = nn.init(nn.STANDARD, 3, seed=0, hidden=2, n_actions=4)
        path = tmp_path / "tiny.qnet"
        nn.save_params(path, params)
        loaded = nn.load_params(path)
        assert loaded.hidden == 2 and loaded.n_actions == 4

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.qnet"
        path.write_bytes(b"NOTANET!" + b"\x00" * 64)
        with pytest.raises(nn.CheckpointError):
            nn.load_params(path)

    def test_truncated_file_rejected(self, tmp_path):
        params = nn.init(nn.STANDARD, 5, seed=0, hidden=4)
        path = tmp_path / "cut.qnet"
        nn.save_params(path, params)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) // 2])
        with pytest.raises(nn.CheckpointError):
            nn.load_params(path)

    def test_trailing_garbage_rejected(self, tmp_path):
        params = nn.init(nn.STANDARD, 5, seed=0, hidden=4)
        path = tmp_path / "fat.qnet"
        nn.save_params(path, params)
        path.write_bytes(path.read_bytes() + b"xx")
        with pytest.raises(nn.CheckpointError):
            nn.load_params(path)
