"""Shared fixtures: seeded problem builders and phantom test images."""

import numpy as np
import pytest

from tgkt import SpdOperator, tsvd_oracle
from tgkt.tensor import identity_tensor, tprod, ttranspose


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


def random_spd_op(m, n, rng, shift=0.5):
    """Random general-kind SPD weight G^T * G + shift * I."""
    g = rng.standard_normal((m, m, n)) / np.sqrt(m)
    return SpdOperator.general(tprod(ttranspose(g), g) + shift * identity_tensor(m, n))


def illposed_operator(l, m, n, rng, decay_exp=-5.0):
    """Random operator with facewise singular values decaying to 10**decay_exp.

    Built by replacing the singular tubes of a random tensor with a spatial
    f-diagonal log-spaced profile, so every Fourier face has the same
    decaying spectrum — a discrete ill-posed test problem.
    """
    u, _, v = tsvd_oracle(rng.standard_normal((l, m, n)))
    r = min(l, m)
    s = np.zeros((l, m, n))
    s[np.arange(r), np.arange(r), 0] = np.logspace(0.0, decay_exp, r)
    return tprod(u, tprod(s, ttranspose(v)))


def smooth_slice(m, n, rng, p=1):
    """Smooth random lateral slices (low-frequency sine mixtures)."""
    ii = np.arange(m)[:, None]
    kk = np.arange(n)[None, :]
    out = np.zeros((m, p, n))
    for j in range(p):
        img = np.zeros((m, n))
        for f1, f2 in ((1, 1), (2, 1), (1, 2), (3, 2)):
            c1, c2 = rng.standard_normal(2)
            img += c1 * np.sin(np.pi * f1 * (ii + 0.5) / m) * np.sin(np.pi * f2 * (kk + 0.5) / n)
            img += c2 * np.cos(np.pi * f2 * ii / m) * np.cos(np.pi * f1 * kk / n)
        out[:, j, :] = img
    return out


def phantom_gray(n):
    """Deterministic piecewise-smooth grayscale phantom in [0, 1]."""
    xx, yy = np.meshgrid(np.linspace(-1, 1, n), np.linspace(-1, 1, n), indexing="ij")
    img = 0.15 + 0.1 * (xx + yy)
    img += 0.55 * np.exp(-((xx + 0.25) ** 2 + (yy - 0.2) ** 2) * 9)
    img += 0.35 * np.exp(-((xx - 0.45) ** 2 + (yy + 0.4) ** 2) * 25)
    img += 0.25 * (((xx - 0.1) ** 2 + (yy + 0.15) ** 2) < 0.09)
    return np.clip(img, 0.0, 1.0)


def phantom_rgb(n):
    """Deterministic RGB phantom in [0, 1], shape (n, n, 3)."""
    xx, yy = np.meshgrid(np.linspace(-1, 1, n), np.linspace(-1, 1, n), indexing="ij")
    r = 0.3 + 0.5 * np.exp(-((xx - 0.2) ** 2 + (yy - 0.3) ** 2) * 7) + 0.1 * xx
    g = 0.25 + 0.55 * np.exp(-((xx + 0.35) ** 2 + (yy + 0.1) ** 2) * 11) + 0.1 * yy
    b = 0.35 + 0.4 * np.exp(-(xx ** 2 + yy ** 2) * 5) + 0.15 * ((xx * yy) > 0.1)
    return np.clip(np.stack([r, g, b], axis=2), 0.0, 1.0)
