"""Weighted Golub-Kahan bidiagonalization processes under the t-product.

Three partial reductions of an operator tensor ``a`` against SPD weights
``l`` (solution side) and ``m`` (data side), each building weighted-orthonormal
bases for the t-Krylov subspaces of ``a^T * m^{-1} * a * l``:

:func:`wtgkb`
    tensor variant.  Starting from a lateral data slice it produces lateral
    bases and a (k+1, k, n) lower bidiagonal tensor of tubes; every
    normalization is the facewise weighted normalization of
    :func:`tgkt.linalg.normalize`.
:func:`wgg_tgkb`
    generalized global variant.  Works on a whole (l, p, n) data tensor with
    scalar recurrence coefficients (weighted Frobenius norms of blocks),
    producing a real (k+1, k) lower bidiagonal matrix.
:func:`wg_tgkb`
    global variant: :func:`wgg_tgkb` restricted to a single lateral slice.

The operator is applied right-to-left (two weighted applies plus one
t-product per step); products like ``a * l`` are never formed.  Each run can
be continued with :func:`extend`, which reproduces a longer fresh run
bit-for-bit — the per-step work is arranged so that a step performs the
pending solution-side normalization first and the data-side step second,
giving the same operation sequence whether or not the run was interrupted.

Breakdown (a numerically zero normalization) truncates the factorization:
the result keeps the completed steps and records the breakdown step;
extending past a breakdown raises.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import SpdOperator, TensorBidiagonal, ZeroSliceError, normalize
from .tensor import _as_tensor3, fft_mode3, ifft_mode3, tprod


class BreakdownError(RuntimeError):
    """A bidiagonalization recurrence hit a zero normalization."""

    def __init__(self, step, message):
        super().__init__(message)
        self.step = step


class _FourierOp:
    """An operator tensor with its FFT cached, for repeated applies."""

    def __init__(self, a):
        a = _as_tensor3(a, "operator")
        self.shape = a.shape
        self._fa = np.moveaxis(fft_mode3(a), 2, 0)            # (n, l, m)
        self._fat = self._fa.conj().transpose(0, 2, 1)        # (n, m, l)

    def apply(self, x):
        """a * x."""
        fx = np.moveaxis(fft_mode3(x), 2, 0)
        return ifft_mode3(np.moveaxis(np.matmul(self._fa, fx), 0, 2))

    def apply_t(self, x):
        """ttranspose(a) * x."""
        fx = np.moveaxis(fft_mode3(x), 2, 0)
        return ifft_mode3(np.moveaxis(np.matmul(self._fat, fx), 0, 2))


@dataclass
class TensorBidiagResult:
    """Partial tensor-variant bidiagonalization.

    ``w_cols``/``q_cols`` hold the lateral basis slices, ``cs``/``zs`` the
    diagonal and subdiagonal tubes as (1, 1, n) tensors with ``zs[0]`` the
    starting tube of the data slice.  ``breakdown`` is the step index of a
    zero normalization, or None.  Treat instances as immutable.
    """

    w_cols: list = field(repr=False)
    q_cols: list = field(repr=False)
    cs: list = field(repr=False)
    zs: list = field(repr=False)
    breakdown: int | None
    rng_state: dict = field(repr=False)
    scale: float = 0.0  # largest normalization seen; floors the breakdown tol

    @property
    def k(self):
        return len(self.q_cols) - 1

    @property
    def depth(self):
        return self.q_cols[0].shape[2]

    @property
    def z1(self):
        return self.zs[0]

    def w_basis(self):
        """The (m, k, n) tensor of solution-side basis slices."""
        return np.concatenate(self.w_cols[:max(self.k, 1)], axis=1)

    def q_basis(self):
        """The (l, k+1, n) tensor of data-side basis slices."""
        return np.concatenate(self.q_cols, axis=1)

    @property
    def pbar(self):
        """The (k+1, k, n) lower bidiagonal reduction as tube stacks."""
        if self.k < 1:
            raise ValueError("no completed bidiagonalization step")
        diag = np.vstack([c[0, 0, :] for c in self.cs[:self.k]])
        sub = np.vstack([z[0, 0, :] for z in self.zs])
        return TensorBidiagonal(diag, sub)


@dataclass
class ScalarBidiagResult:
    """Partial global-variant bidiagonalization with scalar coefficients.

    ``w_blocks``/``q_blocks`` are the (m, p, n) and (l, p, n) basis blocks;
    ``alphas``/``betas`` the recurrence coefficients with ``betas[0]`` the
    normalizer of the data tensor.  Treat instances as immutable.
    """

    w_blocks: list = field(repr=False)
    q_blocks: list = field(repr=False)
    alphas: list
    betas: list
    breakdown: int | None

    @property
    def k(self):
        return len(self.q_blocks) - 1

    @property
    def p(self):
        return self.q_blocks[0].shape[1]

    @property
    def beta1(self):
        return self.betas[0]

    @property
    def pbar(self):
        """The real (k+1, k) lower bidiagonal matrix of the reduction."""
        if self.k < 1:
            raise ValueError("no completed bidiagonalization step")
        k = self.k
        out = np.zeros((k + 1, k))
        for i in range(k):
            out[i, i] = self.alphas[i]
            out[i + 1, i] = self.betas[i + 1]
        return out


def _check_weights(a, l, m):
    a = _as_tensor3(a, "operator")
    la, ma, n = a.shape
    if not (l.m == ma and l.n == n):
        raise ValueError(f"solution weight {l.shape} incompatible with operator {a.shape}")
    if not (m.m == la and m.n == n):
        raise ValueError(f"data weight {m.shape} incompatible with operator {a.shape}")
    return a


# -- tensor variant ---------------------------------------------------------

def _tensor_step(op, l, m, st, rng):
    """Advance the tensor recurrence one step; True on success."""
    t = len(st["q"])  # computing index t quantities (1-based step count)
    if t >= 2:
        w_raw = op.apply_t(m.apply_inverse(st["q"][-1])) - tprod(st["w"][-1], st["zs"][-1])
        try:
            w, c = normalize(w_raw, l, rng)
        except ZeroSliceError:
            st["breakdown"] = t
            return False
        st["w"].append(w)
        st["cs"].append(c)
    q_raw = op.apply(l.apply(st["w"][-1])) - tprod(st["q"][-1], st["cs"][-1])
    try:
        q, z = normalize(q_raw, m.inverse, rng)
    except ZeroSliceError:
        if t >= 2:
            st["w"].pop()
            st["cs"].pop()
        st["breakdown"] = t
        return False
    st["q"].append(q)
    st["zs"].append(z)
    return True


def _tensor_run(op, l, m, st, steps, rng):
    for _ in range(steps):
        if not _tensor_step(op, l, m, st, rng):
            break
    return TensorBidiagResult(
        w_cols=st["w"], q_cols=st["q"], cs=st["cs"], zs=st["zs"],
        breakdown=st["breakdown"], rng_state=rng.bit_generator.state,
    )


def wtgkb(a, b, l, m, k, seed=None):
    """Partial weighted tensor Golub-Kahan bidiagonalization (W-tGKB).

    Runs ``k`` steps against the lateral data slice ``b``, producing bases
    with ``w^T * l * w = I`` and ``q^T * m^{-1} * q = I`` and the tube
    bidiagonal ``pbar`` satisfying ``a * l * w = q * pbar`` and
    ``a^T * m^{-1} * q_k = w * p_k^T``.  The starting and first diagonal
    tubes must be invertible (all Fourier faces above tolerance); breakdown
    later in the recurrence truncates the run and is recorded on the result.

    ``seed`` controls the random replacement directions inside the weighted
    normalization (only exercised on degenerate faces).
    """
    a = _check_weights(a, l, m)
    b = _as_tensor3(b, "data slice")
    if b.shape != (a.shape[0], 1, a.shape[2]):
        raise ValueError(f"data slice shape {b.shape} incompatible with operator {a.shape}")
    if k < 1:
        raise ValueError("step count must be at least 1")
    rng = np.random.default_rng(seed)
    op = _FourierOp(a)

    q1, z1, rep = normalize(b, m.inverse, rng, return_info=True)
    if rep:
        raise BreakdownError(0, "starting tube of the data slice is not invertible")
    w_raw = op.apply_t(m.apply_inverse(q1))
    try:
        w1, c1, rep = normalize(w_raw, l, rng, return_info=True)
    except ZeroSliceError as exc:
        raise BreakdownError(1, "a^T * m^{-1} * b is numerically zero") from exc
    if rep:
        raise BreakdownError(1, "first diagonal tube is not invertible")

    st = {"w": [w1], "q": [q1], "cs": [c1], "zs": [z1], "breakdown": None}
    return _tensor_run(op, l, m, st, k, rng)


# -- global variants --------------------------------------------------------

def _scalar_tol(st):
    return np.sqrt(np.finfo(float).eps) * st["coefmax"]


def _scalar_step(op, l, m, st):
    t = len(st["q"])
    if t >= 2:
        w_raw = op.apply_t(m.apply_inverse(st["q"][-1])) - st["betas"][-1] * st["w"][-1]
        alpha = l.norm(w_raw)
        if alpha <= _scalar_tol(st):
            st["breakdown"] = t
            return False
        st["coefmax"] = max(st["coefmax"], alpha)
        st["w"].append(w_raw / alpha)
        st["alphas"].append(alpha)
    q_raw = op.apply(l.apply(st["w"][-1])) - st["alphas"][-1] * st["q"][-1]
    beta = m.inverse.norm(q_raw)
    if beta <= _scalar_tol(st):
        if t >= 2:
            st["w"].pop()
            st["alphas"].pop()
        st["breakdown"] = t
        return False
    st["coefmax"] = max(st["coefmax"], beta)
    st["q"].append(q_raw / beta)
    st["betas"].append(beta)
    return True


def _scalar_run(op, l, m, st, steps):
    for _ in range(steps):
        if not _scalar_step(op, l, m, st):
            break
    return ScalarBidiagResult(
        w_blocks=st["w"], q_blocks=st["q"], alphas=st["alphas"],
        betas=st["betas"], breakdown=st["breakdown"],
    )


def wgg_tgkb(a, b, l, m, k):
    """Partial weighted generalized global tGKB (WGG-tGKB).

    Reduces ``a`` against the whole (l, p, n) data tensor ``b`` with scalar
    coefficients: ``beta`` values are ``m^{-1}``-weighted norms of data-side
    blocks, ``alpha`` values ``l``-weighted norms of solution-side blocks.
    The blocks are weighted-orthonormal in the T-diamond sense and satisfy
    the blockwise decompositions with the (k+1, k) bidiagonal ``pbar``.
    """
    a = _check_weights(a, l, m)
    b = _as_tensor3(b, "data tensor")
    if b.shape[0] != a.shape[0] or b.shape[2] != a.shape[2]:
        raise ValueError(f"data shape {b.shape} incompatible with operator {a.shape}")
    if k < 1:
        raise ValueError("step count must be at least 1")
    op = _FourierOp(a)

    beta1 = m.inverse.norm(b)
    if beta1 <= 0.0:
        raise BreakdownError(0, "data tensor is numerically zero")
    q1 = b / beta1
    w_raw = op.apply_t(m.apply_inverse(q1))
    alpha1 = l.norm(w_raw)
    if alpha1 <= np.sqrt(np.finfo(float).eps) * beta1:
        raise BreakdownError(1, "a^T * m^{-1} * b is numerically zero")

    st = {
        "w": [w_raw / alpha1], "q": [q1], "alphas": [alpha1], "betas": [beta1],
        "coefmax": max(alpha1, beta1), "breakdown": None,
    }
    return _scalar_run(op, l, m, st, k)


def wg_tgkb(a, b, l, m, k):
    """Partial weighted global tGKB (WG-tGKB): :func:`wgg_tgkb` on one slice.

    The recurrence is identical to the generalized global process; the data
    must be a single lateral slice (p = 1).
    """
    b = _as_tensor3(b, "data slice")
    if b.ndim != 3 or b.shape[1] != 1:
        raise ValueError(f"expected a lateral slice (l, 1, n), got {b.shape}")
    return wgg_tgkb(a, b, l, m, k)


# -- continuation -----------------------------------------------------------

def extend(result, by, a, l, m):
    """Continue a bidiagonalization by ``by`` steps.

    Must be handed the same operator and weights the run was started with;
    the extended result is then bit-identical to a fresh run of the larger
    step count (the random-replacement generator state is carried in the
    result).  Extending past a recorded breakdown raises, carrying the
    original breakdown step.
    """
    if by < 0:
        raise ValueError("extension step count must be nonnegative")
    if result.breakdown is not None:
        raise BreakdownError(
            result.breakdown,
            f"cannot extend: bidiagonalization broke down at step {result.breakdown}",
        )
    if by == 0:
        return result
    a = _check_weights(a, l, m)
    op = _FourierOp(a)
    if isinstance(result, TensorBidiagResult):
        rng = np.random.default_rng()
        rng.bit_generator.state = result.rng_state
        st = {
            "w": list(result.w_cols), "q": list(result.q_cols),
            "cs": list(result.cs), "zs": list(result.zs), "breakdown": None,
        }
        return _tensor_run(op, l, m, st, by, rng)
    if isinstance(result, ScalarBidiagResult):
        st = {
            "w": list(result.w_blocks), "q": list(result.q_blocks),
            "alphas": list(result.alphas), "betas": list(result.betas),
            "coefmax": max(max(result.alphas), max(result.betas)),
            "breakdown": None,
        }
        return _scalar_run(op, l, m, st, by)
    raise TypeError(f"not a bidiagonalization result: {type(result)!r}")
