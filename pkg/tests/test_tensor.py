"""t-product core algebra: transforms, products, transposes, norms."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import tgkt
from tgkt.tensor import (
    bcirc,
    bcirc_oracle_prod,
    circledast,
    e1_lateral,
    e1_tube,
    fft_mode3,
    fold,
    fro_norm,
    identity_tensor,
    ifft_mode3,
    tdiamond,
    tprod,
    ttranspose,
    unfold,
    weighted_norm,
)


class TestFft:
    def test_delta_tube_transforms_to_ones(self):
        f = fft_mode3(e1_tube(4))
        assert np.allclose(f[0, 0, :], np.ones(4))

    def test_constant_tube_transforms_to_scaled_delta(self):
        n, c = 5, 2.5
        tube = np.full((1, 1, n), c)
        f = fft_mode3(tube)
        expected = np.zeros(n, dtype=complex)
        expected[0] = n * c
        assert np.allclose(f[0, 0, :], expected, atol=1e-12)

    def test_round_trip(self, rng):
        t = rng.standard_normal((3, 2, 5))
        assert np.allclose(ifft_mode3(fft_mode3(t)), t, atol=1e-12)

    def test_fft_of_real_tensor_is_conjugate_symmetric(self, rng):
        f = fft_mode3(rng.standard_normal((4, 3, 6)))
        n = 6
        mirror = (n - np.arange(n)) % n
        assert np.abs(f - f[:, :, mirror].conj()).max() < 1e-12 * np.abs(f).max()

    def test_ifft_rejects_broken_symmetry(self, rng):
        f = fft_mode3(rng.standard_normal((3, 3, 5)))
        f[0, 0, 1] += 10.0  # corrupt one face only
        with pytest.raises(ValueError, match="conjugate"):
            ifft_mode3(f)

    def test_ifft_rejects_large_imaginary_residue(self):
        # symmetric enough to pass the first check on an all-real spectrum,
        # but with a tiny asymmetry that lands entirely in the imaginary part
        f = np.ones((1, 1, 4), dtype=complex)
        f[0, 0, 1] = 1.0 + 1e-9j
        f[0, 0, 3] = 1.0 - 0.5e-9j
        with pytest.raises(ValueError, match="imaginary"):
            ifft_mode3(f)


class TestTprod:
    def test_identity_is_neutral(self, rng):
        a = rng.standard_normal((4, 3, 5))
        assert np.allclose(tprod(a, identity_tensor(3, 5)), a, atol=1e-12)

    def test_tube_example_against_hand_bcirc(self):
        # bcirc((1,2)) = [[1,2],[2,1]]; times (3,4) gives (11,10)
        a = np.array([1.0, 2.0]).reshape(1, 1, 2)
        b = np.array([3.0, 4.0]).reshape(1, 1, 2)
        assert np.allclose(tprod(a, b)[0, 0, :], [11.0, 10.0], atol=1e-12)
        assert np.allclose(bcirc_oracle_prod(a, b)[0, 0, :], [11.0, 10.0])

    def test_matches_bcirc_oracle(self, rng):
        a = rng.standard_normal((4, 3, 5))
        b = rng.standard_normal((3, 2, 5))
        c, ref = tprod(a, b), bcirc_oracle_prod(a, b)
        assert np.abs(c - ref).max() < 1e-12 * np.abs(ref).max()

    def test_dimension_mismatch(self, rng):
        with pytest.raises(ValueError, match="mismatch"):
            tprod(rng.standard_normal((3, 2, 4)), rng.standard_normal((3, 2, 4)))
        with pytest.raises(ValueError, match="mismatch"):
            tprod(rng.standard_normal((3, 2, 4)), rng.standard_normal((2, 2, 5)))

    def test_associativity(self, rng):
        a = rng.standard_normal((3, 4, 5))
        b = rng.standard_normal((4, 2, 5))
        c = rng.standard_normal((2, 3, 5))
        left = tprod(tprod(a, b), c)
        right = tprod(a, tprod(b, c))
        assert np.abs(left - right).max() < 1e-10 * max(np.abs(left).max(), 1.0)


class TestBcircOracle:
    def test_bcirc_of_tube_is_circulant(self):
        a = np.array([1.0, 2.0, 3.0]).reshape(1, 1, 3)
        expected = np.array([[1, 3, 2], [2, 1, 3], [3, 2, 1]], dtype=float)
        assert np.array_equal(bcirc(a), expected)

    def test_fold_unfold_round_trip(self, rng):
        a = rng.standard_normal((4, 3, 5))
        assert np.array_equal(fold(unfold(a), 4, 5), a)

    def test_oracle_cap(self, rng):
        big = rng.standard_normal((9, 9, 9))  # 81 > 64 block dimension
        with pytest.raises(ValueError, match="cap"):
            bcirc_oracle_prod(big, big)


class TestTranspose:
    def test_depth_one_is_matrix_transpose(self, rng):
        a = rng.standard_normal((4, 3, 1))
        assert np.array_equal(ttranspose(a)[:, :, 0], a[:, :, 0].T)

    def test_tube_reverses_tail(self):
        a = np.array([1.0, 2.0, 3.0]).reshape(1, 1, 3)
        assert np.array_equal(ttranspose(a)[0, 0, :], [1.0, 3.0, 2.0])

    def test_product_rule(self, rng):
        a = rng.standard_normal((4, 3, 5))
        b = rng.standard_normal((3, 2, 5))
        lhs = ttranspose(tprod(a, b))
        rhs = tprod(ttranspose(b), ttranspose(a))
        assert np.abs(lhs - rhs).max() < 1e-12 * max(np.abs(lhs).max(), 1.0)

    @given(l=st.integers(1, 4), m=st.integers(1, 4), n=st.integers(1, 6),
           seed=st.integers(0, 2 ** 31))
    @settings(max_examples=30, deadline=None)
    def test_involution(self, l, m, n, seed):
        a = np.random.default_rng(seed).standard_normal((l, m, n))
        assert np.array_equal(ttranspose(ttranspose(a)), a)


class TestUnits:
    def test_identity_squares_to_itself(self):
        i = identity_tensor(3, 4)
        assert np.allclose(tprod(i, i), i, atol=1e-14)

    def test_e1_tube_transform_is_all_ones(self):
        assert np.allclose(fft_mode3(e1_tube(6))[0, 0, :], np.ones(6))

    def test_e1_tube_is_tube_unit(self, rng):
        x = rng.standard_normal((1, 1, 5))
        assert np.allclose(tprod(e1_tube(5), x), x, atol=1e-13)

    def test_e1_lateral_shape_and_entry(self):
        e = e1_lateral(4, 3)
        assert e.shape == (4, 1, 3) and e[0, 0, 0] == 1.0 and e.sum() == 1.0


class TestNorms:
    def test_identity_weight_reduces_to_frobenius(self, rng):
        from tgkt import SpdOperator
        x = rng.standard_normal((5, 2, 4))
        w = SpdOperator.identity(5, 4)
        assert abs(weighted_norm(x, w) - fro_norm(x)) < 1e-13 * fro_norm(x)

    def test_depth_one_reduces_to_matrix_quadratic_form(self, rng):
        from tgkt import SpdOperator
        mat = np.array([[2.0, 0.5], [0.5, 1.0]])
        x = rng.standard_normal((2, 1, 1))
        w = SpdOperator.spatial(mat, 1)
        expected = np.sqrt(x[:, 0, 0] @ mat @ x[:, 0, 0])
        assert abs(weighted_norm(x, w) - expected) < 1e-14

    def test_whitening_identity(self, rng):
        # ||R^T * e||_{M^{-1}} == ||e||_F when M = R^T * R
        from conftest import random_spd_op
        m_op = random_spd_op(6, 4, rng)
        r = tgkt.tensor_cholesky(m_op)
        for _ in range(5):
            e = rng.standard_normal((6, 1, 4))
            colored = tprod(ttranspose(r), e)
            assert abs(weighted_norm(colored, m_op.inverse) - fro_norm(e)) < 1e-10

    def test_negative_radicand_raises(self, rng):
        class NegatingWeight:
            def apply(self, x):
                return -x
        with pytest.raises(ValueError, match="not SPD"):
            weighted_norm(rng.standard_normal((3, 1, 2)), NegatingWeight())

    def test_quadratic_form_positive_on_random_inputs(self, rng):
        from conftest import random_spd_op
        for _ in range(4):
            w = random_spd_op(5, 3, rng)
            for _ in range(20):
                x = rng.standard_normal((5, 1, 3))
                assert weighted_norm(x, w) > 0.0

    def test_orthogonal_factor_preserves_frobenius_norm(self, rng):
        # Q from a facewise QR of a random tensor: ||Q*a||_F == ||a||_F
        g = fft_mode3(rng.standard_normal((5, 5, 4)))
        qhat = np.empty_like(g)
        n = 4
        for j in range(n // 2 + 1):
            q = np.linalg.qr(g[:, :, j].real if j in (0, n // 2) else g[:, :, j])[0]
            qhat[:, :, j] = q
            qhat[:, :, (n - j) % n] = q.conj()
        q_tensor = ifft_mode3(qhat)
        a = rng.standard_normal((5, 3, 4))
        assert abs(fro_norm(tprod(q_tensor, a)) - fro_norm(a)) < 1e-12 * fro_norm(a)


class TestBlockProducts:
    def test_circledast_e1_selects_first_block(self, rng):
        blocks = [rng.standard_normal((3, 2, 4)) for _ in range(3)]
        assert np.array_equal(circledast(blocks, [1.0, 0.0, 0.0]), blocks[0])

    def test_circledast_zero_vector(self, rng):
        blocks = [rng.standard_normal((3, 2, 4)) for _ in range(2)]
        assert np.array_equal(circledast(blocks, [0.0, 0.0]), np.zeros((3, 2, 4)))

    def test_circledast_linearity(self, rng):
        c1, c2 = rng.standard_normal((4, 1, 3)), rng.standard_normal((4, 1, 3))
        assert np.allclose(circledast([c1, c2], [2.0, -3.0]), 2 * c1 - 3 * c2)

    def test_circledast_length_mismatch(self, rng):
        with pytest.raises(ValueError, match="coefficients"):
            circledast([rng.standard_normal((2, 1, 2))], [1.0, 2.0])

    def test_tdiamond_identity_weight_is_plain_inner_product(self, rng):
        from tgkt import SpdOperator
        a = rng.standard_normal((4, 2, 3))
        b = rng.standard_normal((4, 2, 3))
        g = tdiamond([a], [b], SpdOperator.identity(4, 3))
        assert abs(g[0, 0] - np.sum(a * b)) < 1e-12

    def test_tdiamond_symmetry(self, rng):
        from conftest import random_spd_op
        w = random_spd_op(4, 3, rng)
        blocks_a = [rng.standard_normal((4, 1, 3)) for _ in range(3)]
        blocks_b = [rng.standard_normal((4, 1, 3)) for _ in range(2)]
        g1 = tdiamond(blocks_a, blocks_b, w)
        g2 = tdiamond(blocks_b, blocks_a, w)
        assert np.allclose(g1, g2.T, atol=1e-12)

    def test_tdiamond_on_weighted_orthonormal_set(self, rng):
        # blocks from a generalized global bidiagonalization run
        from conftest import random_spd_op
        a = rng.standard_normal((8, 6, 3))
        b = rng.standard_normal((8, 2, 3))
        l_op = random_spd_op(6, 3, rng)
        m_op = random_spd_op(8, 3, rng)
        run = tgkt.wgg_tgkb(a, b, l_op, m_op, 4)
        gram = tdiamond(run.q_blocks, run.q_blocks, m_op.inverse)
        assert np.abs(gram - np.eye(run.k + 1)).max() < 1e-10


class TestOracleEquivalence:
    @given(l=st.integers(1, 4), m=st.integers(1, 4), p=st.integers(1, 4),
           n=st.integers(1, 6), seed=st.integers(0, 2 ** 31))
    @settings(max_examples=40, deadline=None)
    def test_tprod_equals_oracle_on_small_instances(self, l, m, p, n, seed):
        gen = np.random.default_rng(seed)
        a = gen.standard_normal((l, m, n))
        b = gen.standard_normal((m, p, n))
        c, ref = tprod(a, b), bcirc_oracle_prod(a, b)
        scale = max(np.abs(ref).max(), 1.0)
        assert np.abs(c - ref).max() < 1e-12 * scale
