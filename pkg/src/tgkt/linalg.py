"""SPD tensor machinery: weighted norms, normalization, Cholesky, subproblems.

An SPD tensor is one whose Fourier faces are all Hermitian positive definite;
it induces weighted Frobenius norms and is the weight object of the
bidiagonalization processes.  :class:`SpdOperator` packages such a tensor with
its facewise Cholesky factors so that ``N*Y``, ``N^{-1}*Y`` and ``||.||_N``
are cheap.  An inverse is never materialized as a tensor — every occurrence
is realized as a pair of triangular solves against the cached factors.

Three kinds are supported:

``identity``
    the identity tensor; all operations are no-ops or plain norms.
``spatial``
    only the first frontal slice is nonzero.  Its Fourier faces all equal
    that slice, so application happens face-by-face in the spatial domain
    with a single real matrix — no FFT at all.
``general``
    an arbitrary SPD tensor, handled facewise in the Fourier domain.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .tensor import (
    _as_tensor3,
    e1_tube,
    fft_mode3,
    identity_tensor,
    ifft_mode3,
    weighted_norm,
)

#: relative Hermitian defect tolerated in the Fourier faces of an SPD tensor
HERMITIAN_RTOL = 1e-10

#: element cap for the tSVD oracle (refuses production-scale inputs)
TSVD_ORACLE_CAP = 1 << 22


class ZeroSliceError(ValueError):
    """Normalization saw a numerically zero input (all faces below tolerance)."""


def _chol_upper(mat, what):
    """Upper-triangular Cholesky factor R with ``mat = R^H R``; HPD check."""
    scale = float(np.abs(mat).max())
    defect = float(np.abs(mat - mat.conj().T).max())
    if scale > 0.0 and defect > HERMITIAN_RTOL * scale:
        raise np.linalg.LinAlgError(f"{what}: Hermitian defect {defect / scale:.3e}")
    try:
        lower = np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"{what}: not positive definite ({exc})") from exc
    return lower.conj().T


class SpdOperator:
    """An SPD tensor with precomputed facewise factorizations.

    Construct via :meth:`identity`, :meth:`spatial` or :meth:`general`.
    Instances are immutable after construction and safe to share.

    The ``inverse`` property returns a view exposing the same interface for
    the inverse tensor (``apply``/``apply_inverse`` swapped, norms taken in
    the inverse-weighted sense); the underlying factors are shared.
    """

    def __init__(self, kind, m, n, first_face=None, tensor=None, fourier=None,
                 factors=None):
        self.kind = kind
        self.m = int(m)
        self.n = int(n)
        self._first_face = first_face      # spatial: (m, m) real SPD
        self._tensor = tensor              # general: (m, m, n) real
        self._fourier = fourier            # general: (m, m, n) complex faces
        self._factors = factors            # upper Cholesky per face (or single)

    # -- constructors ------------------------------------------------------

    @classmethod
    def identity(cls, m, n):
        """The identity tensor as a weight (plain Frobenius norms)."""
        if m <= 0 or n <= 0:
            raise ValueError("dimensions must be positive")
        return cls("identity", m, n)

    @classmethod
    def spatial(cls, first_face, n):
        """Weight whose frontal slices 2..n are zero: one real SPD face.

        Application of such an operator is equivalent in the spatial and
        Fourier domains — every Fourier face equals ``first_face`` — so all
        operations run face-by-face with one real matrix, no FFT.
        """
        face = np.asarray(first_face, dtype=np.float64)
        if face.ndim != 2 or face.shape[0] != face.shape[1]:
            raise ValueError(f"first face must be square, got {face.shape}")
        if n <= 0:
            raise ValueError("depth must be positive")
        r = _chol_upper(face, "spatial face").real
        return cls("spatial", face.shape[0], n, first_face=face.copy(), factors=r)

    @classmethod
    def general(cls, t):
        """Weight from a dense (m, m, n) SPD tensor, factored facewise."""
        t = _as_tensor3(t, "spd tensor")
        m, m2, n = t.shape
        if m != m2:
            raise ValueError(f"spd tensor must be square, got {t.shape}")
        fourier = fft_mode3(t)
        factors = np.empty_like(fourier)
        for i in range(n):
            factors[:, :, i] = _chol_upper(fourier[:, :, i], f"Fourier face {i}")
        return cls("general", m, n, tensor=t.copy(), fourier=fourier, factors=factors)

    # -- dense views -------------------------------------------------------

    def to_tensor(self):
        """The weight as a dense (m, m, n) tensor."""
        if self.kind == "identity":
            return identity_tensor(self.m, self.n)
        if self.kind == "spatial":
            t = np.zeros((self.m, self.m, self.n))
            t[:, :, 0] = self._first_face
            return t
        return self._tensor.copy()

    @property
    def inverse(self):
        """View of the inverse weight (shares the cached factors)."""
        return _InverseWeight(self)

    @property
    def shape(self):
        return (self.m, self.m, self.n)

    # -- application -------------------------------------------------------

    def _check_rows(self, x):
        x = _as_tensor3(x, "operand")
        if x.shape[0] != self.m or x.shape[2] != self.n:
            raise ValueError(f"operand shape {x.shape} incompatible with {self.shape}")
        return x

    def apply(self, x):
        """N * x."""
        x = self._check_rows(x)
        if self.kind == "identity":
            return x.copy()
        if self.kind == "spatial":
            return np.einsum("ij,jpk->ipk", self._first_face, x)
        fx = np.moveaxis(fft_mode3(x), 2, 0)
        fy = np.matmul(np.moveaxis(self._fourier, 2, 0), fx)
        return ifft_mode3(np.moveaxis(fy, 0, 2))

    def apply_inverse(self, x):
        """Solve N * y = x via the cached facewise Cholesky factors."""
        x = self._check_rows(x)
        if self.kind == "identity":
            return x.copy()
        if self.kind == "spatial":
            flat = x.reshape(self.m, -1)
            y = scipy.linalg.cho_solve((self._factors, False), flat)
            return np.ascontiguousarray(y.reshape(x.shape))
        fx = fft_mode3(x)
        fy = np.empty_like(fx)
        for i in range(self.n):
            r = self._factors[:, :, i]
            w = scipy.linalg.solve_triangular(r, fx[:, :, i], trans="C", lower=False)
            fy[:, :, i] = scipy.linalg.solve_triangular(r, w, lower=False)
        return ifft_mode3(fy)

    def norm(self, x):
        """Weighted Frobenius norm ||x||_N."""
        return weighted_norm(x, self)

    # -- facewise norms (used by normalize) --------------------------------

    def face_norms(self, vhat):
        """Weighted 2-norms of Fourier face vectors.

        ``vhat`` has one column per face ((m, n) complex); the result is the
        vector of ``||vhat[:, j]||`` under this weight's j-th Fourier face.
        """
        if self.kind == "identity":
            return np.linalg.norm(vhat, axis=0)
        if self.kind == "spatial":
            return np.linalg.norm(self._factors @ vhat, axis=0)
        out = np.empty(self.n)
        for j in range(self.n):
            out[j] = np.linalg.norm(self._factors[:, :, j] @ vhat[:, j])
        return out

    def face_norm(self, j, v):
        """Weighted 2-norm of one vector under the j-th Fourier face."""
        if self.kind == "identity":
            return float(np.linalg.norm(v))
        if self.kind == "spatial":
            return float(np.linalg.norm(self._factors @ v))
        return float(np.linalg.norm(self._factors[:, :, j] @ v))


class _InverseWeight:
    """Inverse view of an :class:`SpdOperator`; same interface, shared factors."""

    def __init__(self, base):
        self._base = base
        self.kind = base.kind
        self.m = base.m
        self.n = base.n

    @property
    def shape(self):
        return self._base.shape

    @property
    def inverse(self):
        return self._base

    def apply(self, x):
        return self._base.apply_inverse(x)

    def apply_inverse(self, x):
        return self._base.apply(x)

    def norm(self, x):
        return weighted_norm(x, self)

    def face_norms(self, vhat):
        base = self._base
        if base.kind == "identity":
            return np.linalg.norm(vhat, axis=0)
        if base.kind == "spatial":
            w = scipy.linalg.solve_triangular(base._factors, vhat, trans="T", lower=False)
            return np.linalg.norm(w, axis=0)
        out = np.empty(base.n)
        for j in range(base.n):
            w = scipy.linalg.solve_triangular(
                base._factors[:, :, j], vhat[:, j], trans="C", lower=False)
            out[j] = np.linalg.norm(w)
        return out

    def face_norm(self, j, v):
        base = self._base
        if base.kind == "identity":
            return float(np.linalg.norm(v))
        if base.kind == "spatial":
            w = scipy.linalg.solve_triangular(base._factors, v, trans="T", lower=False)
            return float(np.linalg.norm(w))
        w = scipy.linalg.solve_triangular(
            base._factors[:, :, j], v, trans="C", lower=False)
        return float(np.linalg.norm(w))


def tensor_cholesky(m):
    """Tensor Cholesky factor R with ``m = R^T * R``.

    ``m`` is an :class:`SpdOperator` or a dense SPD tensor.  The Fourier
    faces of R are upper triangular with positive real diagonal (the usual
    facewise Cholesky); the returned tensor lives in the spatial domain.
    A face that is not Hermitian positive definite raises, naming the face.
    """
    if isinstance(m, SpdOperator):
        if m.kind == "identity":
            return identity_tensor(m.m, m.n)
        if m.kind == "spatial":
            t = np.zeros((m.m, m.m, m.n))
            t[:, :, 0] = m._factors
            return t
        return ifft_mode3(m._factors)
    m = _as_tensor3(m, "spd tensor")
    return tensor_cholesky(SpdOperator.general(m))


class NormalizeInfo(NamedTuple):
    """Diagnostics of one weighted normalization."""

    replaced: list
    max_face_norm: float


def normalize(x, weight, rng=None, return_info=False, tol=0.0):
    """Factor a lateral slice as ``x = v * a`` with ``||v||_N = 1``.

    Works facewise in the Fourier domain: face j of the tube ``a`` is the
    weighted norm of face j of ``x``; faces above tolerance are divided
    through, faces at numerically zero are replaced by a random direction of
    unit weighted norm and their tube entry set to zero (so ``x = v * a``
    still holds).  The working tolerance is ``sqrt(eps)`` times the largest
    face norm, floored by the caller-supplied absolute ``tol`` (processes
    pass the scale of the largest normalization seen so far, which is what
    makes breakdown detectable).

    Random replacements come from ``rng`` (a ``numpy.random.Generator``;
    a fresh one is created when omitted) and are drawn conjugate-symmetric
    across mirrored face pairs so the output stays real.

    Returns ``(v, a)``, or ``(v, a, info)`` with a :class:`NormalizeInfo`
    when ``return_info`` is set.

    Raises :class:`ZeroSliceError` when every face is below tolerance
    (numerically zero input) — callers treat this as breakdown.
    """
    x = _as_tensor3(x, "lateral slice")
    m, p, n = x.shape
    if p != 1:
        raise ValueError(f"expected a lateral slice (m, 1, n), got {x.shape}")
    xhat = fft_mode3(x)[:, 0, :]
    a = weight.face_norms(xhat).astype(np.float64)
    amax = float(a.max())
    if not amax > max(tol, 0.0):
        raise ZeroSliceError("cannot normalize a numerically zero slice")
    tol = max(np.sqrt(np.finfo(float).eps) * amax, tol)

    vhat = xhat.astype(np.complex128, copy=True)
    replaced = []
    done = np.zeros(n, dtype=bool)
    for j in range(n):
        if done[j]:
            continue
        partner = (n - j) % n
        done[j] = done[partner] = True
        if max(a[j], a[partner]) > tol:
            vhat[:, j] = vhat[:, j] / a[j]
            if partner != j:
                vhat[:, partner] = vhat[:, partner] / a[partner]
        else:
            # degenerate face pair: random direction, tube entry zeroed
            if rng is None:
                rng = np.random.default_rng()
            if partner == j:
                g = rng.standard_normal(m).astype(np.complex128)
            else:
                g = rng.standard_normal(m) + 1j * rng.standard_normal(m)
            g = g / weight.face_norm(j, g)
            vhat[:, j] = g
            a[j] = 0.0
            replaced.append(j)
            if partner != j:
                vhat[:, partner] = g.conj()
                a[partner] = 0.0
                replaced.append(partner)

    v = ifft_mode3(vhat[:, None, :])
    tube = ifft_mode3(a[None, None, :].astype(np.complex128))
    if return_info:
        return v, tube, NormalizeInfo(sorted(replaced), amax)
    return v, tube


@dataclass(frozen=True)
class TensorBidiagonal:
    """Lower bidiagonal tensor of tubes, plus the starting tube.

    ``diag[i]`` holds the i-th diagonal tube (length-n data) and ``sub[i]``
    the i-th subdiagonal tube, with ``sub[0]`` being the starting tube of the
    bidiagonalization (the normalizer of the data slice — it sits outside the
    bidiagonal itself, which uses ``sub[1:]``).  Assembles to the
    (k+1, k, n) lower bidiagonal reduction of the tensor process.
    """

    diag: np.ndarray  # (k, n)
    sub: np.ndarray   # (k+1, n)

    def __post_init__(self):
        diag = np.asarray(self.diag, dtype=np.float64)
        sub = np.asarray(self.sub, dtype=np.float64)
        if diag.ndim != 2 or sub.ndim != 2 or sub.shape != (diag.shape[0] + 1, diag.shape[1]):
            raise ValueError(f"inconsistent tube stacks: diag {diag.shape}, sub {sub.shape}")
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "sub", sub)

    @property
    def k(self):
        return self.diag.shape[0]

    @property
    def depth(self):
        return self.diag.shape[1]

    @property
    def start_tube(self):
        """The starting tube as a (1, 1, n) tensor."""
        return np.ascontiguousarray(self.sub[0][None, None, :])

    def to_tensor(self):
        """Dense (k+1, k, n) lower bidiagonal tensor."""
        k, n = self.diag.shape
        t = np.zeros((k + 1, k, n))
        for i in range(k):
            t[i, i, :] = self.diag[i]
            t[i + 1, i, :] = self.sub[i + 1]
        return t

    def fourier_faces(self):
        """Faces of the dense bidiagonal in the Fourier domain, (n, k+1, k)."""
        return np.moveaxis(np.fft.fft(self.to_tensor(), axis=2), 2, 0)


def solve_tensor_tikhonov(pbar, rhs_tube, mu):
    """Regularized reduced least-squares solve of the tensor-bidiagonal path.

    Returns the (k, 1, n) lateral slice minimizing
    ``||pbar * z - e1 * rhs_tube||_F^2 + mu^{-1} ||z||_F^2``,
    computed facewise: per Fourier face the (2k+1, k) stacked system
    ``[pbar_face; mu^{-1/2} I]`` is solved by QR.  The result satisfies the
    normal equations ``(pbar^T*pbar + mu^{-1} I) * z = pbar^T * e1 * rhs_tube``.
    """
    if mu <= 0:
        raise ValueError("regularization parameter mu must be positive")
    k, n = pbar.diag.shape
    faces = pbar.fourier_faces()                       # (n, k+1, k)
    rhs_tube = _as_tensor3(rhs_tube, "rhs tube")
    if rhs_tube.shape != (1, 1, n):
        raise ValueError(f"rhs tube must be (1, 1, {n}), got {rhs_tube.shape}")
    z1h = np.fft.fft(rhs_tube[0, 0, :])

    stacked = np.zeros((n, 2 * k + 1, k), dtype=np.complex128)
    stacked[:, :k + 1, :] = faces
    stacked[:, k + 1:, :] = mu ** -0.5 * np.eye(k)
    rhs = np.zeros((n, 2 * k + 1), dtype=np.complex128)
    rhs[:, 0] = z1h

    q, r = np.linalg.qr(stacked)
    qtb = np.einsum("nij,ni->nj", q.conj(), rhs)
    y = np.linalg.solve(r, qtb[..., None])[..., 0]     # (n, k)
    return ifft_mode3(np.ascontiguousarray(y.T)[:, None, :])


def tsvd_oracle(a, cap=TSVD_ORACLE_CAP):
    """Tensor SVD ``a = u * s * ttranspose(v)`` — test oracle only.

    ``u`` (l, l, n) and ``v`` (m, m, n) are orthogonal tensors and ``s`` is
    f-diagonal with singular tubes ordered by decreasing Frobenius norm
    (facewise SVDs already sort their singular values, which makes the tube
    ordering automatic).  Faces are computed only for the canonical half of
    the Fourier indices and mirrored conjugate, keeping the factors exactly
    real after the inverse transform.
    """
    a = _as_tensor3(a)
    if a.size > cap:
        raise ValueError(f"tsvd oracle cap exceeded: {a.size} > {cap} elements")
    l, m, n = a.shape
    fa = fft_mode3(a)
    uhat = np.empty((l, l, n), dtype=np.complex128)
    shat = np.zeros((l, m, n), dtype=np.complex128)
    vhat = np.empty((m, m, n), dtype=np.complex128)
    for j in range(n // 2 + 1):
        partner = (n - j) % n
        face = fa[:, :, j]
        if partner == j:
            u, s, vh = np.linalg.svd(face.real, full_matrices=True)
        else:
            u, s, vh = np.linalg.svd(face, full_matrices=True)
        uhat[:, :, j] = u
        shat[:min(l, m), :min(l, m), j] = np.diag(s)
        vhat[:, :, j] = vh.conj().T
        if partner != j:
            uhat[:, :, partner] = u.conj()
            shat[:, :, partner] = shat[:, :, j]
            vhat[:, :, partner] = vhat[:, :, j].conj()
    return ifft_mode3(uhat), ifft_mode3(shat), ifft_mode3(vhat)


def singular_tube_norms(s):
    """Frobenius norms of the singular tubes of an f-diagonal (l, m, n) tensor."""
    s = _as_tensor3(s)
    r = min(s.shape[0], s.shape[1])
    return np.array([float(np.linalg.norm(s[i, i, :])) for i in range(r)])
