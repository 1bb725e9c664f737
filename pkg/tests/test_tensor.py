import itertools

import numpy as np
import pytest

from vcr.errors import FileFormatError, ValidationError
from vcr.tensor import (
    conv2d,
    gb_pool,
    instance_norm,
    inverse_permutation,
    load_tensor,
    permute,
    save_tensor,
    sigmoid,
    softmax_temp,
)

from oracles import conv2d_loops, permute_loops


class TestPermute:
    def test_axis_reorder_shape(self, rng):
        t = rng.standard_normal((2, 3, 4))
        out = permute(t, (1, 0, 2))
        assert out.shape == (3, 2, 4)

    def test_identity_is_bit_exact(self, rng):
        t = rng.standard_normal((3, 4, 5))
        out = permute(t, (0, 1, 2))
        assert np.array_equal(out, t)

    def test_inverse_round_trip_exact(self, rng):
        t = rng.standard_normal((3, 4, 5))
        out = permute(permute(t, (2, 0, 1)), (1, 2, 0))
        assert np.array_equal(out, t)

    def test_matches_index_oracle(self, rng):
        for _ in range(20):
            rank = int(rng.integers(2, 5))
            shape = tuple(int(rng.integers(1, 5)) for _ in range(rank))
            axes = tuple(rng.permutation(rank))
            t = rng.standard_normal(shape)
            assert np.array_equal(permute(t, axes), permute_loops(t, axes))

    def test_bijection_exhaustive_small_shapes(self, rng):
        # every shape with extents <= 4, every permutation: double
        # application with the inverse is bit-exact
        for rank in (1, 2, 3, 4):
            for shape in itertools.product(range(1, 5), repeat=rank):
                t = rng.standard_normal(shape)
                for axes in itertools.permutations(range(rank)):
                    inv = inverse_permutation(axes)
                    assert np.array_equal(permute(permute(t, axes), inv), t)

    @pytest.mark.parametrize("axes", [(0, 1), (0, 0, 2), (0, 1, 2, 3)])
    def test_bad_axes_rejected(self, axes, rng):
        t = rng.standard_normal((2, 3, 4))
        with pytest.raises(ValidationError):
            permute(t, axes)


class TestGbPool:
    def test_singleton_axis_copies_slice(self, rng):
        t = rng.standard_normal((1, 2, 2))
        out = gb_pool(t)
        assert out.shape == (2, 2, 2)
        assert np.array_equal(out[0], t[0])
        assert np.array_equal(out[1], t[0])

    def test_hand_computed_case(self):
        t = np.array([[[0.0, 1.0], [1.0, 0.0]], [[2.0, 3.0], [3.0, 2.0]]])
        out = gb_pool(t)
        assert np.array_equal(out[0], [[2.0, 3.0], [3.0, 2.0]])
        assert np.array_equal(out[1], [[1.0, 2.0], [2.0, 1.0]])

    def test_constant_input(self):
        t = np.full((4, 3, 5), 2.5)
        out = gb_pool(t)
        assert np.all(out == 2.5)

    def test_max_dominates_mean(self, rng):
        for _ in range(50):
            t = rng.standard_normal((int(rng.integers(1, 6)), 4, 4))
            out = gb_pool(t)
            assert np.all(out[0] >= out[1])

    def test_rank_checked(self, rng):
        with pytest.raises(ValidationError):
            gb_pool(rng.standard_normal((2, 2)))


class TestConv2d:
    def test_delta_kernel_is_identity(self, rng):
        t = rng.standard_normal((1, 5, 5))
        kernel = np.ones((1, 1, 1, 1))
        assert np.allclose(conv2d(t, kernel), t, atol=0)

    def test_zero_kernel_annihilates(self, rng):
        t = rng.standard_normal((3, 6, 4))
        kernel = np.zeros((2, 3, 3, 3))
        assert np.all(conv2d(t, kernel) == 0.0)

    def test_matches_loop_oracle(self, rng):
        t = rng.standard_normal((1, 5, 5))
        kernel = rng.standard_normal((1, 1, 3, 3))
        assert np.max(np.abs(conv2d(t, kernel) - conv2d_loops(t, kernel))) < 1e-12

    def test_matches_loop_oracle_multichannel(self, rng):
        for _ in range(10):
            cin = int(rng.integers(1, 4))
            cout = int(rng.integers(1, 4))
            k = int(rng.choice([1, 3, 5]))
            t = rng.standard_normal((cin, 6, 7))
            kernel = rng.standard_normal((cout, cin, k, k))
            assert np.max(np.abs(conv2d(t, kernel) - conv2d_loops(t, kernel))) < 1e-12

    def test_linearity(self, rng):
        x = rng.standard_normal((2, 8, 8))
        y = rng.standard_normal((2, 8, 8))
        kernel = rng.standard_normal((1, 2, 3, 3))
        a, b = 1.7, -0.4
        lhs = conv2d(a * x + b * y, kernel)
        rhs = a * conv2d(x, kernel) + b * conv2d(y, kernel)
        assert np.max(np.abs(lhs - rhs)) < 1e-10

    def test_even_kernel_rejected(self, rng):
        with pytest.raises(ValidationError):
            conv2d(rng.standard_normal((1, 4, 4)), np.zeros((1, 1, 2, 2)))


class TestInstanceNorm:
    def test_constant_channel_maps_to_zero(self):
        t = np.full((2, 3, 3), 7.0)
        assert np.all(instance_norm(t) == 0.0)

    def test_two_point_channel(self):
        t = np.array([[[0.0, 2.0]]])
        out = instance_norm(t, eps=1e-12)
        assert np.allclose(out, [[[-1.0, 1.0]]], atol=1e-6)

    def test_affine_invariance_per_channel(self, rng):
        t = rng.standard_normal((3, 5, 5))
        scale = rng.uniform(0.5, 3.0, size=(3, 1, 1))
        shift = rng.uniform(-1.0, 1.0, size=(3, 1, 1))
        assert np.max(np.abs(instance_norm(scale * t + shift) - instance_norm(t))) < 1e-6

    def test_output_statistics(self, rng):
        t = rng.standard_normal((4, 6, 6)) * 3.0 + 1.0
        out = instance_norm(t)
        means = out.mean(axis=(1, 2))
        stds = out.std(axis=(1, 2))
        assert np.all(np.abs(means) <= 1e-6)
        assert np.all(np.abs(stds - 1.0) <= 1e-4)


class TestActivations:
    def test_sigmoid_at_zero(self):
        assert sigmoid(np.zeros(1))[0] == 0.5

    def test_sigmoid_extreme_inputs_finite(self):
        out = sigmoid(np.array([-1e4, 1e4]))
        assert np.all(np.isfinite(out))
        assert 0.0 <= out[0] < out[1] <= 1.0

    def test_softmax_constant_vector_uniform(self):
        out = softmax_temp(np.full(5, 3.3), tau=0.7)
        assert np.allclose(out, 0.2, atol=1e-12)

    def test_softmax_closed_form(self):
        v = np.log([1.0, 2.0, 3.0])
        out = softmax_temp(v, tau=1.0)
        assert np.allclose(out, [1 / 6, 2 / 6, 3 / 6], atol=1e-12)

    def test_softmax_sums_to_one_large_inputs(self, rng):
        v = rng.standard_normal(32) * 1e6
        out = softmax_temp(v, tau=1.0)
        assert abs(out.sum() - 1.0) < 1e-9
        assert np.all(out >= 0.0)

    def test_softmax_tau_flattens(self, rng):
        v = rng.standard_normal(8)
        spreads = [
            np.ptp(softmax_temp(v, tau)) for tau in (0.5, 1.0, 2.0, 8.0, 64.0)
        ]
        assert all(a > b for a, b in zip(spreads, spreads[1:]))

    def test_softmax_bad_tau(self):
        with pytest.raises(ValidationError):
            softmax_temp(np.ones(3), tau=0.0)


class TestTensorFile:
    def test_round_trip(self, tmp_path, rng):
        for shape in [(5,), (3, 4), (2, 3, 4), (2, 2, 2, 3)]:
            arr = rng.standard_normal(shape)
            path = tmp_path / "t.vct"
            save_tensor(path, arr)
            assert np.array_equal(load_tensor(path), arr)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.vct"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(FileFormatError):
            load_tensor(path)

    def test_truncated_payload_rejected(self, tmp_path, rng):
        path = tmp_path / "t.vct"
        save_tensor(path, rng.standard_normal((3, 3)))
        blob = path.read_bytes()
        path.write_bytes(blob[:-8])
        with pytest.raises(FileFormatError):
            load_tensor(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileFormatError):
            load_tensor(tmp_path / "absent.vct")

    def test_nan_payload_rejected(self, tmp_path):
        with pytest.raises(ValidationError):
            save_tensor(tmp_path / "t.vct", np.array([1.0, np.nan]))
