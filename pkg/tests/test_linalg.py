"""SPD operators, normalization, Cholesky, the reduced Tikhonov solve, tSVD."""

import numpy as np
import pytest
from conftest import illposed_operator, random_spd_op

import tgkt
from tgkt import SpdOperator, ZeroSliceError, normalize, tensor_cholesky, tsvd_oracle
from tgkt.linalg import TensorBidiagonal, singular_tube_norms, solve_tensor_tikhonov
from tgkt.tensor import (
    e1_lateral,
    e1_tube,
    fro_norm,
    identity_tensor,
    tprod,
    ttranspose,
)


class TestNormalize:
    def test_depth_one_vector(self):
        x = np.array([3.0, 4.0]).reshape(2, 1, 1)
        v, a = normalize(x, SpdOperator.identity(2, 1))
        assert np.allclose(v[:, 0, 0], [0.6, 0.8])
        assert np.allclose(a[0, 0, 0], 5.0)

    def test_unit_faces_give_e1_tube(self, rng):
        # x whose Fourier faces all have unit norm: the tube collapses to e1
        n = 4
        xhat = np.ones((3, 1, n), dtype=complex)
        xhat[:, 0, :] /= np.linalg.norm(xhat[:, 0, 0])
        x = tgkt.ifft_mode3(xhat)
        v, a = normalize(x, SpdOperator.identity(3, n))
        assert np.allclose(a, e1_tube(n), atol=1e-12)

    def test_reconstruction_and_unit_norm(self, rng):
        x = rng.standard_normal((6, 1, 5))
        w = random_spd_op(6, 5, rng)
        v, a, replaced = normalize(x, w, return_info=True)
        assert replaced == []
        assert abs(w.norm(v) - 1.0) < 1e-12
        assert fro_norm(x - tprod(v, a)) < 1e-10 * fro_norm(x)

    def test_inverse_weight(self, rng):
        x = rng.standard_normal((5, 1, 4))
        w = random_spd_op(5, 4, rng)
        v, a = normalize(x, w.inverse)
        assert abs(w.inverse.norm(v) - 1.0) < 1e-12
        assert fro_norm(x - tprod(v, a)) < 1e-10 * fro_norm(x)

    def test_zero_input_raises(self):
        with pytest.raises(ZeroSliceError):
            normalize(np.zeros((4, 1, 3)), SpdOperator.identity(4, 3))

    def test_degenerate_face_takes_random_branch(self, rng):
        # one mirrored pair of Fourier faces exactly zero
        n = 4
        xhat = rng.standard_normal((3, 1, n)) + 0j
        xhat[:, 0, 1] = 1.0 + 2.0j
        xhat[:, 0, 3] = 1.0 - 2.0j
        xhat[:, 0, 1] = 0.0
        xhat[:, 0, 3] = 0.0
        x = tgkt.ifft_mode3(xhat)
        w = SpdOperator.identity(3, n)
        v, a, replaced = normalize(x, w, rng=rng, return_info=True)
        assert replaced == [1, 3]
        assert abs(w.norm(v) - 1.0) < 1e-12       # every face unit norm
        ahat = tgkt.fft_mode3(a)[0, 0, :]
        assert abs(ahat[1]) < 1e-14 and abs(ahat[3]) < 1e-14
        # the surviving faces still reconstruct x
        rec = tprod(v, a)
        assert fro_norm(rec - x) < 1e-10 * fro_norm(x)


class TestTensorCholesky:
    def test_identity(self):
        r = tensor_cholesky(SpdOperator.identity(3, 4))
        assert np.allclose(r, identity_tensor(3, 4))

    def test_depth_one_hand_factor(self):
        face = np.array([[4.0, 2.0], [2.0, 3.0]])
        r = tensor_cholesky(SpdOperator.spatial(face, 1))
        assert np.allclose(r[:, :, 0], [[2.0, 1.0], [0.0, np.sqrt(2.0)]])

    def test_reconstruction_on_random_spd(self, rng):
        for _ in range(10):
            m = rng.integers(2, 9)
            n = rng.integers(1, 9)
            op = random_spd_op(m, n, rng)
            r = tensor_cholesky(op)
            rec = tprod(ttranspose(r), r)
            dense = op.to_tensor()
            assert fro_norm(rec - dense) < 1e-9 * fro_norm(dense)

    def test_dense_tensor_input(self, rng):
        op = random_spd_op(4, 3, rng)
        r1 = tensor_cholesky(op)
        r2 = tensor_cholesky(op.to_tensor())
        assert np.allclose(r1, r2, atol=1e-12)

    def test_non_hpd_face_names_index(self):
        t = identity_tensor(2, 3)
        t[:, :, 0] = [[1.0, 0.0], [0.0, -1.0]]  # indefinite everywhere
        with pytest.raises(np.linalg.LinAlgError, match="face"):
            tensor_cholesky(t)


class TestSpdOperator:
    def test_identity_apply_roundtrip(self, rng):
        x = rng.standard_normal((4, 2, 3))
        op = SpdOperator.identity(4, 3)
        assert np.array_equal(op.apply(x), x)
        assert np.array_equal(op.apply_inverse(x), x)

    def test_spatial_equals_general(self, rng):
        face = np.eye(5) * 2 + 0.3
        sp = SpdOperator.spatial(face, 4)
        ge = SpdOperator.general(sp.to_tensor())
        x = rng.standard_normal((5, 3, 4))
        assert np.abs(sp.apply(x) - ge.apply(x)).max() < 1e-12
        assert np.abs(sp.apply_inverse(x) - ge.apply_inverse(x)).max() < 1e-12

    def test_inverse_roundtrip(self, rng):
        op = random_spd_op(5, 4, rng)
        x = rng.standard_normal((5, 2, 4))
        assert fro_norm(op.apply(op.apply_inverse(x)) - x) < 1e-10 * fro_norm(x)

    def test_spatial_application_is_facewise(self, rng):
        # spatial-kind weights act on each frontal slice with the single face
        face = np.eye(4) + 0.2 * np.ones((4, 4))
        op = SpdOperator.spatial(face, 5)
        x = rng.standard_normal((4, 3, 5))
        y = op.apply(x)
        for i in range(5):
            assert np.abs(y[:, :, i] - face @ x[:, :, i]).max() < 1e-13
        # and agrees with the dense t-product
        dense = tprod(op.to_tensor(), x)
        assert np.abs(y - dense).max() < 1e-12

    def test_rejects_asymmetric_face(self):
        with pytest.raises(np.linalg.LinAlgError, match="Hermitian"):
            SpdOperator.spatial(np.array([[1.0, 0.5], [0.0, 1.0]]), 2)

    def test_rejects_indefinite_tensor(self):
        t = identity_tensor(2, 3)
        t[0, 0, 0] = -1.0
        with pytest.raises(np.linalg.LinAlgError, match="positive definite"):
            SpdOperator.general(t)

    def test_dim_mismatch(self, rng):
        op = SpdOperator.identity(4, 3)
        with pytest.raises(ValueError, match="incompatible"):
            op.apply(rng.standard_normal((5, 1, 3)))


class TestSolveTensorTikhonov:
    def test_scalar_closed_form(self):
        # k=1, n=1: z = c*z1 / (c^2 + z2^2 + 1/mu)
        c, z2, z1, mu = 1.7, 0.4, 2.2, 50.0
        pbar = TensorBidiagonal(np.array([[c]]), np.array([[z1], [z2]]))
        z = solve_tensor_tikhonov(pbar, np.array(z1).reshape(1, 1, 1), mu)
        assert abs(z[0, 0, 0] - c * z1 / (c * c + z2 * z2 + 1 / mu)) < 1e-12

    def _random_bidiagonal(self, rng, k, n):
        diag = rng.standard_normal((k, n)) + 2.0
        sub = rng.standard_normal((k + 1, n))
        return TensorBidiagonal(diag, sub)

    def test_large_mu_approaches_pseudoinverse(self, rng):
        k, n = 3, 4
        pbar = self._random_bidiagonal(rng, k, n)
        z1 = pbar.start_tube
        z = solve_tensor_tikhonov(pbar, z1, 1e12)
        # facewise pseudoinverse oracle
        faces = pbar.fourier_faces()
        z1h = np.fft.fft(z1[0, 0, :])
        zh = np.empty((k, n), dtype=complex)
        for j in range(n):
            rhs = np.zeros(k + 1, dtype=complex)
            rhs[0] = z1h[j]
            zh[:, j] = np.linalg.pinv(faces[j]) @ rhs
        ref = tgkt.ifft_mode3(zh[:, None, :])
        assert fro_norm(z - ref) < 1e-8 * max(fro_norm(ref), 1.0)

    def test_normal_equations_residual(self, rng):
        for _ in range(5):
            k, n = 4, 3
            pbar = self._random_bidiagonal(rng, k, n)
            z1 = pbar.start_tube
            mu = 10.0 ** rng.uniform(0, 4)
            z = solve_tensor_tikhonov(pbar, z1, mu)
            p = pbar.to_tensor()
            lhs = tprod(tprod(ttranspose(p), p) + (1 / mu) * identity_tensor(k, n), z)
            rhs = tprod(ttranspose(p), tprod(e1_lateral(k + 1, n), z1))
            assert fro_norm(lhs - rhs) < 1e-10 * max(fro_norm(rhs), 1.0)

    def test_matches_facewise_closed_form(self, rng):
        # explicit facewise inversion of the normal equations, k,n <= 4
        for k, n in ((2, 2), (3, 4), (4, 3)):
            pbar = self._random_bidiagonal(rng, k, n)
            z1 = pbar.start_tube
            mu = 37.0
            z = solve_tensor_tikhonov(pbar, z1, mu)
            faces = pbar.fourier_faces()
            z1h = np.fft.fft(z1[0, 0, :])
            zh = np.empty((k, n), dtype=complex)
            for j in range(n):
                p = faces[j]
                rhs = np.zeros(k + 1, dtype=complex)
                rhs[0] = z1h[j]
                zh[:, j] = np.linalg.inv(p.conj().T @ p + np.eye(k) / mu) @ (p.conj().T @ rhs)
            ref = tgkt.ifft_mode3(zh[:, None, :])
            assert fro_norm(z - ref) < 1e-10 * max(fro_norm(ref), 1.0)

    def test_rejects_nonpositive_mu(self, rng):
        pbar = self._random_bidiagonal(rng, 2, 2)
        with pytest.raises(ValueError, match="positive"):
            solve_tensor_tikhonov(pbar, pbar.start_tube, 0.0)


class TestTsvdOracle:
    def test_identity_has_identity_singular_tensor(self):
        u, s, v = tsvd_oracle(identity_tensor(3, 4))
        assert np.allclose(s, identity_tensor(3, 4), atol=1e-12)

    def test_reconstruction(self, rng):
        a = rng.standard_normal((5, 4, 6))
        u, s, v = tsvd_oracle(a)
        rec = tprod(u, tprod(s, ttranspose(v)))
        assert fro_norm(rec - a) < 1e-10 * fro_norm(a)
        # factors are orthogonal tensors
        assert fro_norm(tprod(ttranspose(u), u) - identity_tensor(5, 6)) < 1e-10
        assert fro_norm(tprod(ttranspose(v), v) - identity_tensor(4, 6)) < 1e-10

    def test_blur_tensor_singular_tubes_decay(self):
        from tgkt import BlurSpec, build_blur
        a = build_blur(BlurSpec(24, 3.0, 6, "symmetric"))
        _, s, _ = tsvd_oracle(a)
        norms = singular_tube_norms(s)
        assert all(norms[i] >= norms[i + 1] - 1e-12 for i in range(len(norms) - 1))
        assert norms[-1] < 1e-2 * norms[0]  # genuinely ill-conditioned

    def test_cap(self, rng):
        with pytest.raises(ValueError, match="cap"):
            tsvd_oracle(rng.standard_normal((2, 2, 2)), cap=4)

    def test_illposed_builder_spectrum(self, rng):
        # the seeded ill-posed generator hits the requested spectrum
        a = illposed_operator(8, 6, 3, rng, decay_exp=-4.0)
        _, s, _ = tsvd_oracle(a)
        norms = singular_tube_norms(s)
        assert np.allclose(norms, np.logspace(0, -4.0, 6), rtol=1e-8)
