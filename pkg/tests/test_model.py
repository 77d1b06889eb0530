import numpy as np
import pytest

from coadapt.graphs import Graph, generate_er
from coadapt.model import (
    forward,
    init_parameters,
    load_parameters,
    make_input,
    save_parameters,
)
from coadapt.objectives import loss_mvc
from coadapt.tensor import ShapeMismatchError, Tape, Tensor, backward

from test_tensor import finite_difference, rel_err


class TestInitParameters:
    def test_deterministic(self):
        a = init_parameters(8, 8, rng_seed=3)
        b = init_parameters(8, 8, rng_seed=3)
        assert a.equal_bits(b)

    def test_biases_zero(self):
        params = init_parameters(8, 8, rng_seed=0)
        for name, t in params.tensors.items():
            if ".b" in name or name == "head.b":
                assert not t.data.any()

    def test_different_seeds_differ(self):
        a = init_parameters(8, 8, rng_seed=0)
        b = init_parameters(8, 8, rng_seed=1)
        assert not a.equal_bits(b)

    def test_shapes(self):
        params = init_parameters(5, 7, rng_seed=0, layers=4)
        assert params.tensors["gin0.w1"].shape == (5, 7)
        assert params.tensors["gin3.w1"].shape == (7, 7)
        assert params.tensors["head.w"].shape == (7,)
        assert params.tensors["gin0.eps"].shape == ()

    def test_invalid(self):
        with pytest.raises(ValueError):
            init_parameters(0, 4, rng_seed=0)

    def test_eps_not_trainable_by_default(self):
        params = init_parameters(4, 4, rng_seed=0)
        assert "gin0.eps" not in params.trainable_names()
        learnable = init_parameters(4, 4, rng_seed=0, eps_learnable=True)
        assert "gin0.eps" in learnable.trainable_names()


class TestMakeInput:
    def test_rows_one_hot(self):
        g = generate_er(9, 0.3, 0)
        x = make_input(g, seed=4, d_in=8).data
        assert np.array_equal(x.sum(axis=1), np.ones(9))
        assert set(np.unique(x)) <= {0.0, 1.0}

    def test_deterministic(self):
        g = generate_er(6, 0.5, 1)
        assert np.array_equal(make_input(g, 3, 8).data, make_input(g, 3, 8).data)

    def test_d_in_one_forces_constant(self):
        g = generate_er(5, 0.5, 0)
        assert np.array_equal(make_input(g, 9, 1).data, np.ones((5, 1)))

    def test_shared_node_indices_agree_across_sizes(self):
        # same seed, different graph sizes: overlapping rows match
        small = make_input(generate_er(5, 0.2, 0), seed=7, d_in=8).data
        large = make_input(generate_er(9, 0.2, 0), seed=7, d_in=8).data
        assert np.array_equal(small, large[:5])


def triangle():
    return Graph(3, [(0, 1), (1, 2), (0, 2)])


class TestForward:
    def test_outputs_strictly_inside_unit_interval(self):
        g = generate_er(12, 0.4, 2)
        params = init_parameters(8, 8, rng_seed=0)
        p = forward(params, g, make_input(g, 0, 8), Tape())
        assert np.all(p.values.data > 0) and np.all(p.values.data < 1)

    def test_identical_rows_no_edges_identical_outputs(self):
        g = Graph(4, [])
        params = init_parameters(6, 6, rng_seed=1)
        x = Tensor(np.tile(np.eye(6)[0], (4, 1)))
        p = forward(params, g, x, Tape()).values.data
        assert np.allclose(p, p[0], atol=0, rtol=0)

    def test_triangle_symmetry(self):
        params = init_parameters(6, 6, rng_seed=2)
        x = Tensor(np.tile(np.eye(6)[2], (3, 1)))
        p = forward(params, triangle(), x, Tape()).values.data
        assert np.allclose(p, p[0], atol=1e-12)

    def test_deterministic(self):
        g = generate_er(10, 0.4, 5)
        params = init_parameters(8, 8, rng_seed=3)
        x = make_input(g, 11, 8)
        a = forward(params, g, x, Tape()).values.data
        b = forward(params, g, x, Tape()).values.data
        assert np.array_equal(a, b)

    def test_shape_mismatch(self):
        g = generate_er(5, 0.5, 0)
        params = init_parameters(8, 8, rng_seed=0)
        with pytest.raises(ShapeMismatchError):
            forward(params, g, Tensor(np.zeros((4, 8))), Tape())

    @pytest.mark.parametrize("seed", range(6))
    def test_permutation_equivariance(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 20))
        g = generate_er(n, 0.4, seed)
        params = init_parameters(8, 8, rng_seed=seed)
        x = make_input(g, seed, 8)
        p = forward(params, g, x, Tape()).values.data
        perm = rng.permutation(n)
        gp = g.relabel(list(perm))
        xp = np.empty_like(x.data)
        xp[perm] = x.data
        pp = forward(params, gp, Tensor(xp), Tape()).values.data
        assert np.abs(pp[perm] - p).max() < 1e-9

    def test_end_to_end_gradient_matches_finite_differences(self):
        g = generate_er(7, 0.5, 4)
        params = init_parameters(4, 4, rng_seed=5)
        x = make_input(g, 2, 4)
        name = "gin1.w1"

        def loss_at(wv):
            trial = params.copy()
            trial.tensors[name] = Tensor(wv)
            tape = Tape()
            p = forward(trial, g, x, tape)
            return float(loss_mvc(p, g, 0.5, tape).value)

        tape = Tape()
        p = forward(params, g, x, tape)
        grads = backward(tape, loss_mvc(p, g, 0.5, tape))
        fd = finite_difference(loss_at, params.tensors[name].copy_data())
        assert rel_err(grads[name].data, fd) < 1e-4


class TestCheckpoint:
    def test_round_trip_lossless(self, tmp_path):
        params = init_parameters(16, 16, rng_seed=9)
        path = tmp_path / "ckpt.json"
        save_parameters(params, path)
        loaded = load_parameters(path)
        assert loaded.equal_bits(params)
        assert (loaded.d_in, loaded.d, loaded.layers) == (16, 16, 4)

    def test_rejects_foreign_format(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"format": "something-else"}')
        with pytest.raises(ValueError):
            load_parameters(path)

    def test_copy_is_independent(self):
        params = init_parameters(4, 4, rng_seed=0)
        clone = params.copy()
        clone.tensors["head.b"] = Tensor(5.0)
        assert float(params.tensors["head.b"].data) == 0.0
