"""Experiment construction: blur operators, weights, noise, and metrics.

Everything needed to pose a deblurring run: the Gaussian point-spread blur
tensor, the spatial-kind covariance and regularization weights, synthesis of
correlated noise of a prescribed level, the twist/squeeze orientation
operators that store images as lateral slices, and restoration metrics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .linalg import SpdOperator, tensor_cholesky
from .tensor import _as_tensor3, fro_norm, tprod, ttranspose

#: blur variants: "symmetric" uses the symmetric Toeplitz profile, "wrapped"
#: mirrors the tail of the profile into the first column so the blur wraps
#: around periodically along the third mode.
BLUR_VARIANTS = ("symmetric", "wrapped")


@dataclass(frozen=True)
class BlurSpec:
    """Gaussian band-limited blur: profile exp(-i^2 / (2 sigma^2)), i < band."""

    n_pixels: int
    sigma: float
    band: int
    variant: str = "symmetric"

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if not 1 <= self.band <= self.n_pixels:
            raise ValueError(f"band must lie in [1, {self.n_pixels}]")
        if self.variant not in BLUR_VARIANTS:
            raise ValueError(f"unknown blur variant {self.variant!r}")


def build_blur(spec):
    """Blur tensor (N, N, N) from a :class:`BlurSpec`.

    The banded Gaussian profile ``z`` fills a Toeplitz matrix ``A`` (scaled
    by ``1 / (sigma * sqrt(2 pi))``) and face i of the tensor is
    ``A[i, 0] * A``; exactly ``band`` faces are nonzero.  The "symmetric"
    variant takes the symmetric Toeplitz of ``z``; the "wrapped" variant
    mirrors ``z``'s tail into the first column, so the face weights wrap
    around the depth axis.
    """
    n = spec.n_pixels
    i = np.arange(n, dtype=np.float64)
    z = np.where(i < spec.band, np.exp(-(i ** 2) / (2.0 * spec.sigma ** 2)), 0.0)
    if spec.variant == "symmetric":
        mat = scipy.linalg.toeplitz(z)
    else:
        col = np.concatenate([z[:1], z[1:][::-1]])
        mat = scipy.linalg.toeplitz(col, z)
    mat = mat / (spec.sigma * np.sqrt(2.0 * np.pi))
    return np.ascontiguousarray(np.multiply.outer(mat, mat[:, 0]))


def build_covariance_m(size, depth, omega):
    """Noise covariance weight: spatial kind, one face per the difference model.

    The single nonzero face is ``0.25 * B^T B + omega * I`` with ``B`` the
    upper bidiagonal (1 on the diagonal, -1 above); ``omega > 0`` shifts it
    positive definite.
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    b = np.eye(size) - np.eye(size, k=1)
    face = 0.25 * (b.T @ b) + omega * np.eye(size)
    return SpdOperator.spatial(face, depth)


def build_reg_d(size, depth, gamma, alpha):
    """Regularization weight: spatial kind, second-difference based.

    The single nonzero face is ``0.25 * (T^T T + alpha * I)`` where ``T`` is
    tridiagonal (-1, 2, -1) with corner entries ``gamma`` (1 or 2); its
    smallest eigenvalue is at least ``alpha / 4``.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if gamma not in (1, 2):
        raise ValueError("gamma must be 1 or 2")
    t = 2.0 * np.eye(size) - np.eye(size, k=1) - np.eye(size, k=-1)
    t[0, 0] = gamma
    t[-1, -1] = gamma
    face = 0.25 * (t.T @ t + alpha * np.eye(size))
    return SpdOperator.spatial(face, depth)


@dataclass(frozen=True)
class NoiseSpec:
    """Correlated-noise request: relative level, RNG seed, and (for
    provenance) the omega that built the covariance weight."""

    noise_level: float
    seed: int | None = None
    omega: float | None = None

    def __post_init__(self):
        if self.noise_level <= 0:
            raise ValueError("noise level must be positive")


@dataclass(frozen=True)
class NoiseResult:
    """Synthesized noise with its exact weighted-norm bounds.

    ``delta`` is the whitened norm ``||noise||_{M^{-1}}`` (exact by
    construction: ``noise_level * ||b_true||_F``); ``slice_deltas`` the
    per-lateral-slice bounds feeding the p-method solvers.
    """

    noise: np.ndarray
    delta: float
    slice_deltas: np.ndarray
    rho: float


def gen_noise(b_true, m, spec):
    """Draw correlated noise of prescribed level against the weight ``m``.

    Draws an i.i.d. standard normal tensor ``e1`` (PCG64 generator seeded by
    ``spec.seed``), scales it to ``e_rho = rho * e1`` so that
    ``||e_rho||_F = noise_level * ||b_true||_F``, and colors it as
    ``r^T * e_rho`` with ``r`` the tensor Cholesky factor of ``m``.  The
    coloring preserves the whitened norm, so the returned ``delta`` equals
    ``||noise||_{M^{-1}}`` and feeds the discrepancy principle directly.
    """
    b_true = _as_tensor3(b_true, "b_true")
    rng = np.random.default_rng(spec.seed)
    e1 = rng.standard_normal(b_true.shape)
    delta = spec.noise_level * fro_norm(b_true)
    rho = delta / fro_norm(e1)
    e_rho = rho * e1
    noise = tprod(ttranspose(tensor_cholesky(m)), e_rho)
    slice_deltas = np.array(
        [float(np.linalg.norm(e_rho[:, j, :])) for j in range(b_true.shape[1])])
    return NoiseResult(noise=noise, delta=delta, slice_deltas=slice_deltas, rho=rho)


# -- storage orientation -----------------------------------------------------

def twist(img):
    """Store an (m, n) image as an (m, 1, n) lateral slice (column j -> depth j)."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {img.shape}")
    return np.ascontiguousarray(img[:, None, :])


def squeeze(t):
    """Inverse of :func:`twist`: (m, 1, n) lateral slice back to an (m, n) image."""
    t = _as_tensor3(t, "lateral slice")
    if t.shape[1] != 1:
        raise ValueError(f"expected a lateral slice (m, 1, n), got {t.shape}")
    return np.ascontiguousarray(t[:, 0, :])


def multi_twist(imgs):
    """Stack p same-shaped images as the lateral slices of an (m, p, n) tensor."""
    imgs = [np.asarray(im, dtype=np.float64) for im in imgs]
    if not imgs:
        raise ValueError("need at least one image")
    if any(im.ndim != 2 or im.shape != imgs[0].shape for im in imgs):
        raise ValueError("images must all be matrices of one shape")
    return np.ascontiguousarray(np.stack(imgs, axis=1))


def multi_squeeze(t):
    """Inverse of :func:`multi_twist`: the list of images stored in ``t``."""
    t = _as_tensor3(t)
    return [np.ascontiguousarray(t[:, j, :]) for j in range(t.shape[1])]


# -- quality metrics ---------------------------------------------------------

class Metrics(NamedTuple):
    relative_error: float
    psnr: float
    mse: float


def metrics(x_method, x_true):
    """Relative Frobenius error, PSNR and MSE of a restoration.

    ``PSNR = 10 * log10(MAX^2 / MSE)`` with ``MAX`` the largest entry of
    ``x_true`` and the MSE averaged over all entries; a perfect restoration
    reports infinite PSNR.
    """
    x_method = np.asarray(x_method, dtype=np.float64)
    x_true = np.asarray(x_true, dtype=np.float64)
    if x_method.shape != x_true.shape:
        raise ValueError(f"shape mismatch: {x_method.shape} vs {x_true.shape}")
    diff = x_method - x_true
    relative_error = float(np.linalg.norm(diff) / np.linalg.norm(x_true))
    mse = float(np.mean(diff ** 2))
    if mse == 0.0:
        return Metrics(relative_error, float("inf"), 0.0)
    peak = float(x_true.max())
    psnr = float(10.0 * np.log10(peak ** 2 / mse))
    return Metrics(relative_error, psnr, mse)
