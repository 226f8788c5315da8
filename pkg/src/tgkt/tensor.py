"""Dense third-order tensor algebra under the t-product.

A third-order tensor is a real ``numpy.ndarray`` of shape ``(l, m, n)``.
``t[:, :, k]`` is the k-th frontal slice (face), a *lateral slice* (tensor
column) is an ``(m, 1, n)`` tensor, and a *tube* (tubal scalar) is
``(1, 1, n)``.  Tubes are the scalars of the algebra; the tube with a single
one in face 0 (``e1_tube``) is their multiplicative identity.  No separate
storage rules apply to slices and tubes — they are ordinary tensors.

The t-product ``fold(bcirc(a) @ unfold(b))`` is evaluated facewise in the
Fourier domain: FFT along the tubes (mode 3, unnormalized forward transform),
one matrix product per face, inverse FFT.  The literal block-circulant route
is kept as a brute-force test oracle (:func:`bcirc_oracle_prod`) and is
size-capped so it cannot be used at production scale by accident.

All operations are pure functions: inputs are never mutated and results never
alias inputs, so values can be shared freely across threads.  Facewise loops
use a fixed summation order, making results independent of any scheduling.
"""

from __future__ import annotations

import numpy as np

#: relative tolerance for the conjugate-symmetry defect accepted by ifft_mode3
CONJ_SYMMETRY_RTOL = 1e-8

#: relative magnitude of the imaginary residue discarded after an inverse FFT
IMAG_RESIDUE_RTOL = 1e-10

#: largest block dimension (rows or columns) bcirc materialization will accept
ORACLE_CAP = 64


def _as_tensor3(t, name="tensor"):
    t = np.asarray(t)
    if t.ndim != 3:
        raise ValueError(f"{name} must be a 3-d array, got shape {t.shape}")
    if t.size == 0:
        raise ValueError(f"{name} must have strictly positive dimensions, got {t.shape}")
    if np.iscomplexobj(t):
        raise ValueError(f"{name} must be real")
    return t.astype(np.float64, copy=False)


def fft_mode3(t):
    """Forward DFT along the tubes (mode 3).

    Face ``i`` of the result is the i-th diagonal block of the
    DFT-block-diagonalized ``bcirc(t)``.  The transform is unnormalized
    (the inverse carries the 1/n factor).
    """
    return np.fft.fft(_as_tensor3(t), axis=2)


def ifft_mode3(f):
    """Inverse DFT along mode 3, returning a real tensor.

    The input must be (numerically) the transform of a real tensor, i.e. its
    faces must satisfy the conjugate symmetry ``f[:, :, n-i] == conj(f[:, :, i])``.
    A symmetry defect above ``CONJ_SYMMETRY_RTOL`` (relative) signals corrupted
    Fourier data and raises.  The imaginary residue of the inverse transform is
    discarded when below ``IMAG_RESIDUE_RTOL`` (relative) and raises otherwise —
    this separates round-off from genuine logic bugs.
    """
    f = np.asarray(f)
    if f.ndim != 3 or f.size == 0:
        raise ValueError(f"expected a non-empty 3-d array, got shape {f.shape}")
    f = f.astype(np.complex128, copy=False)
    n = f.shape[2]
    scale = float(np.abs(f).max())
    if scale > 0.0:
        mirror = (n - np.arange(n)) % n
        defect = float(np.abs(f - f[:, :, mirror].conj()).max())
        if defect > CONJ_SYMMETRY_RTOL * scale:
            raise ValueError(
                "Fourier faces are not conjugate-symmetric "
                f"(relative defect {defect / scale:.3e}); not the transform of a real tensor"
            )
    z = np.fft.ifft(f, axis=2)
    znorm = float(np.linalg.norm(z))
    if znorm > 0.0 and float(np.linalg.norm(z.imag)) > IMAG_RESIDUE_RTOL * znorm:
        raise ValueError("imaginary residue of inverse FFT exceeds tolerance")
    return np.ascontiguousarray(z.real)


def tprod(a, b):
    """t-product of ``a`` (l, m, n) and ``b`` (m, p, n), an (l, p, n) tensor.

    Equals ``fold(bcirc(a) @ unfold(b))`` in exact arithmetic; computed as
    one complex matrix product per Fourier face.
    """
    a = _as_tensor3(a, "a")
    b = _as_tensor3(b, "b")
    if a.shape[1] != b.shape[0] or a.shape[2] != b.shape[2]:
        raise ValueError(f"t-product shape mismatch: {a.shape} * {b.shape}")
    fa = np.moveaxis(np.fft.fft(a, axis=2), 2, 0)
    fb = np.moveaxis(np.fft.fft(b, axis=2), 2, 0)
    fc = np.matmul(fa, fb)
    return ifft_mode3(np.moveaxis(fc, 0, 2))


def unfold(a):
    """Stack the frontal slices of ``a`` (l, m, n) into an (l*n, m) matrix."""
    a = _as_tensor3(a)
    l, m, n = a.shape
    return a.transpose(2, 0, 1).reshape(l * n, m).copy()


def fold(mat, l, n):
    """Inverse of :func:`unfold`: rebuild an (l, m, n) tensor from (l*n, m)."""
    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] != l * n:
        raise ValueError(f"cannot fold shape {mat.shape} into ({l}, ., {n})")
    return np.ascontiguousarray(mat.reshape(n, l, mat.shape[1]).transpose(1, 2, 0))


def bcirc(a):
    """Materialize the (l*n, m*n) block-circulant matrix of ``a``.

    Block (i, j) is the frontal slice ``a[:, :, (i - j) mod n]``; the first
    block column is ``unfold(a)``.  Test oracle only — O((l*n)*(m*n)) storage.
    """
    a = _as_tensor3(a)
    l, m, n = a.shape
    out = np.zeros((l * n, m * n))
    for i in range(n):
        for j in range(n):
            out[i * l:(i + 1) * l, j * m:(j + 1) * m] = a[:, :, (i - j) % n]
    return out


def bcirc_oracle_prod(a, b, cap=ORACLE_CAP):
    """Brute-force t-product via the literal fold/bcirc/unfold evaluation.

    Ground truth for :func:`tprod` on small instances.  Refuses inputs whose
    block-circulant dimensions exceed ``cap`` rather than thrash memory.
    """
    a = _as_tensor3(a, "a")
    b = _as_tensor3(b, "b")
    if a.shape[1] != b.shape[0] or a.shape[2] != b.shape[2]:
        raise ValueError(f"t-product shape mismatch: {a.shape} * {b.shape}")
    l, m, n = a.shape
    p = b.shape[1]
    if max(l * n, m * n, p * n) > cap:
        raise ValueError(
            f"bcirc oracle cap exceeded: block dims {(l * n, m * n, p * n)} > {cap}"
        )
    return fold(bcirc(a) @ unfold(b), l, n)


def ttranspose(a):
    """Tensor transpose: faces transposed, faces 2..n reversed in order.

    Satisfies ``ttranspose(tprod(a, b)) == tprod(ttranspose(b), ttranspose(a))``
    and corresponds to the conjugate transpose of each Fourier face.
    """
    a = _as_tensor3(a)
    n = a.shape[2]
    mirror = (n - np.arange(n)) % n
    return np.ascontiguousarray(a[:, :, mirror].transpose(1, 0, 2))


def identity_tensor(m, n):
    """Identity tensor: face 0 is the m-by-m identity, all other faces zero."""
    if m <= 0 or n <= 0:
        raise ValueError("dimensions must be positive")
    t = np.zeros((m, m, n))
    t[:, :, 0] = np.eye(m)
    return t


def e1_lateral(rows, n):
    """Lateral slice (rows, 1, n) with a single 1 at entry (0, 0, 0)."""
    if rows <= 0 or n <= 0:
        raise ValueError("dimensions must be positive")
    e = np.zeros((rows, 1, n))
    e[0, 0, 0] = 1.0
    return e


def e1_tube(n):
    """The unit tube (1, 1, n): identity element of the tube algebra."""
    return e1_lateral(1, n)


def fro_norm(t):
    """Frobenius norm of a tensor (2-norm of all entries)."""
    return float(np.linalg.norm(np.asarray(t, dtype=np.float64)))


def fro_norm_sq(t):
    """Squared Frobenius norm, summed directly (no sqrt round trip)."""
    t = np.asarray(t, dtype=np.float64)
    return float(np.sum(t * t))


def weighted_norm(t, weight):
    """Weighted Frobenius norm ``||t||_N`` induced by an SPD weight.

    For a lateral slice this is the square root of the (0, 0, 0) entry of
    ``t^T * N * t``; for a general (m, p, n) tensor the square root of the
    trace of the first frontal slice of ``t^T * N * t``.  Both reduce to the
    elementwise inner product ``<t, N*t>``, which is how it is evaluated.

    ``weight`` is an SPD operator (see :mod:`tgkt.linalg`) or its ``.inverse``
    view.  With the identity weight this is the plain Frobenius norm.

    Raises if the quadratic form comes out negative beyond round-off
    (a non-SPD weight); tiny negatives are clamped to zero.
    """
    t = _as_tensor3(t)
    val = float(np.sum(t * weight.apply(t)))
    tol = 1e-12 * max(1.0, float(np.sum(t * t)))
    if val < -tol:
        raise ValueError(f"negative weighted norm radicand {val:.3e}: weight is not SPD")
    return float(np.sqrt(max(val, 0.0)))


def circledast(blocks, y):
    """Linear combination of same-shaped tensor blocks: ``sum_j y[j] * blocks[j]``.

    Covers both block flavors (lateral slices and (m, p, n) blocks) of the
    circled-star product used by the global bidiagonalization variants.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise ValueError(f"coefficients must be a vector, got shape {y.shape}")
    if len(blocks) != y.shape[0]:
        raise ValueError(f"{len(blocks)} blocks but {y.shape[0]} coefficients")
    stack = np.stack([_as_tensor3(c, "block") for c in blocks])
    if stack.ndim != 4:
        raise ValueError("blocks must all share one shape")
    return np.tensordot(y, stack, axes=(0, 0))


def tdiamond(a_blocks, b_blocks, weight):
    """Weighted T-diamond Gram matrix: entry (i, j) is ``<A_i, N*B_j>``.

    ``a_blocks`` and ``b_blocks`` are sequences of same-shaped tensors and the
    result is a real ``len(a_blocks) x len(b_blocks)`` matrix.  For a
    weighted-orthonormal block set the Gram matrix is the identity.
    """
    a_blocks = [_as_tensor3(c, "a block") for c in a_blocks]
    b_blocks = [_as_tensor3(c, "b block") for c in b_blocks]
    shapes = {c.shape for c in a_blocks} | {c.shape for c in b_blocks}
    if len(shapes) != 1:
        raise ValueError(f"blocks must share one shape, got {sorted(shapes)}")
    wb = [weight.apply(c) for c in b_blocks]
    out = np.empty((len(a_blocks), len(b_blocks)))
    for i, ai in enumerate(a_blocks):
        for j in range(len(b_blocks)):
            out[i, j] = np.sum(ai * wb[j])
    return out
