"""Discrepancy-principle Tikhonov solvers on top of the bidiagonalizations.

Each solver grows the bidiagonalization step count ``k`` until the
unregularized reduced residual drops below ``eta * delta`` (``delta`` a bound
on the weighted noise norm, ``eta > 1`` a safety factor), then picks the
regularization parameter ``mu`` by bisection so that the regularized reduced
residual equals ``eta * delta``, and maps the reduced solution back through
the basis and the solution-side weight.  The regularization term enters with
weight ``mu^{-1}``, so larger ``mu`` means weaker regularization and ``mu``
grows as the noise shrinks.

By construction the reduced residual equals the full-space weighted residual
``||a * x - b||_{m^{-1}}`` (the bases are weighted-orthonormal); passing
``debug=True`` asserts that identity at solve time, at the cost of one extra
full-size operator apply.

Five front-ends are provided: ``wtgkt``/``wtgkt_p`` on the tensor
bidiagonalization, ``wg_tgkt``/``wg_tgkt_p`` on the global one, and
``wgg_tgkt`` on the generalized global one (all lateral slices at once,
one ``k`` and one ``mu`` for the whole tensor).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .bidiag import extend, wg_tgkb, wgg_tgkb, wtgkb
from .linalg import solve_tensor_tikhonov
from .tensor import _as_tensor3, circledast, tprod

#: hard cap on bisection iterations (the log-width tolerance stops it first)
BISECT_MAX_ITER = 100


class BracketError(ValueError):
    """The bisection target is not bracketed by the search interval.

    ``side == "high"`` means the function cannot get down to the target on
    the interval (discrepancy not attainable at this step count — callers
    grow k); ``side == "low"`` means the target exceeds the value at the
    left endpoint.
    """

    def __init__(self, side, message):
        super().__init__(message)
        self.side = side


class DiscrepancyNotMet(RuntimeError):
    """The discrepancy could not be met before k_max or breakdown."""


@dataclass
class DiscrepancyConfig:
    """Parameters of the discrepancy-principle solve.

    ``delta`` is the noise-norm bound (one value per lateral slice for the
    p-methods, or a scalar applied to every slice); ``mu_interval`` is the
    bisection bracket for the regularization parameter; ``bisect_tol`` the
    stopping width on log10(mu); ``k_init``/``k_max`` bound the number of
    bidiagonalization steps.
    """

    delta: float | tuple | list | np.ndarray
    eta: float = 1.1
    mu_interval: tuple = (1e1, 1e7)
    bisect_tol: float = 1e-3
    k_init: int = 2
    k_max: int = 150

    def __post_init__(self):
        if self.eta <= 1.0:
            raise ValueError("safety factor eta must exceed 1")
        lo, hi = self.mu_interval
        if not 0.0 < lo < hi:
            raise ValueError(f"invalid mu interval {self.mu_interval}")
        if self.k_init < 1:
            raise ValueError("k_init must be at least 1")
        if self.k_max < self.k_init:
            raise ValueError("k_max must be at least k_init")
        if self.bisect_tol <= 0.0:
            raise ValueError("bisect_tol must be positive")
        deltas = np.atleast_1d(np.asarray(self.delta, dtype=np.float64))
        if np.any(deltas <= 0.0):
            raise ValueError("noise bounds must be positive")

    def delta_for(self, j, p):
        """Noise bound for slice ``j`` of ``p`` (scalar deltas broadcast)."""
        deltas = np.atleast_1d(np.asarray(self.delta, dtype=np.float64))
        if deltas.size == 1:
            return float(deltas[0])
        if deltas.size != p:
            raise ValueError(f"{deltas.size} noise bounds for {p} slices")
        return float(deltas[j])

    @property
    def scalar_delta(self):
        deltas = np.atleast_1d(np.asarray(self.delta, dtype=np.float64))
        if deltas.size != 1:
            raise ValueError("this solver needs a single noise bound")
        return float(deltas[0])


@dataclass
class SliceRecord:
    """Outcome of one discrepancy-principle solve (one slice or one tensor)."""

    slice_index: int
    k: int
    mu: float
    discrepancy: float
    phi_value: float
    residual_history: list = field(default_factory=list)
    wall_time: float = 0.0
    error: str | None = None


@dataclass
class SolveReport:
    """Per-solve record: method tag, slice records, wall time, breakdown flag."""

    method: str
    records: list
    wall_time: float
    breakdown: bool = False


@dataclass
class BisectInfo:
    """Final bracket of a bisection run."""

    lo: float
    hi: float
    f_lo: float
    f_hi: float
    iterations: int


# -- discrepancy functions ---------------------------------------------------

def phi_k(pbar, rhs_tube, mu):
    """Squared regularized reduced residual of the tensor-bidiagonal path.

    Equals ``||pbar * z_mu - e1 * rhs_tube||_F^2`` for the regularized
    reduced solution ``z_mu``; evaluated through the resolvent identity as
    the quadratic form of ``(mu * pbar * pbar^T + I)^{-2}`` at ``e1 * rhs_tube``,
    one Hermitian solve per Fourier face.  Decreasing and convex in ``mu``;
    at ``mu = 0`` it equals the squared norm of the right-hand side
    (by continuity).
    """
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    tube = np.asarray(rhs_tube, dtype=np.float64).reshape(-1)
    if mu == 0:
        return float(np.sum(tube * tube))
    faces = pbar.fourier_faces()                      # (n, k+1, k)
    n = faces.shape[0]
    gram = mu * np.matmul(faces, faces.conj().transpose(0, 2, 1))
    gram += np.eye(faces.shape[1])
    rhs = np.zeros((n, faces.shape[1]), dtype=np.complex128)
    rhs[:, 0] = np.fft.fft(tube)
    w = np.linalg.solve(gram, rhs[..., None])[..., 0]
    return float(np.sum(w.conj() * w).real / n)


def psi_k(pbar, beta1, mu):
    """Matrix analogue of :func:`phi_k` for the global variants.

    ``beta1^2 * e1^T (mu * pbar @ pbar^T + I)^{-2} e1`` for a real
    (k+1, k) lower bidiagonal ``pbar``; equals the squared regularized
    reduced residual.  ``psi_k(pbar, beta1, 0) == beta1 ** 2``.
    """
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    if mu == 0:
        return float(beta1) ** 2
    pbar = np.asarray(pbar, dtype=np.float64)
    gram = mu * (pbar @ pbar.T) + np.eye(pbar.shape[0])
    rhs = np.zeros(pbar.shape[0])
    rhs[0] = beta1
    w = np.linalg.solve(gram, rhs)
    return float(w @ w)


def bisect_mu(f, target, cfg, full_output=False):
    """Solve ``f(mu) = target`` for a decreasing ``f`` by bisection on log10(mu).

    Requires the bracket ``f(lo) >= target >= f(hi)`` on ``cfg.mu_interval``
    and stops when the log10 interval width drops below ``cfg.bisect_tol``
    (or after ``BISECT_MAX_ITER`` halvings).  Returns the midpoint of the
    final bracket, plus a :class:`BisectInfo` when ``full_output`` is set.

    Raises :class:`BracketError` when there is no sign change: side "high"
    (``f(hi) > target``) means the discrepancy is not attainable at this
    step count and callers should grow k.
    """
    lo, hi = cfg.mu_interval
    f_lo = f(lo)
    f_hi = f(hi)
    if f_lo < target:
        raise BracketError("low", f"target {target:.6e} above f(lo) = {f_lo:.6e}")
    if f_hi > target:
        raise BracketError(
            "high", f"discrepancy not attainable on the interval: f(hi) = {f_hi:.6e}")
    ulo, uhi = np.log10(lo), np.log10(hi)
    iterations = 0
    while uhi - ulo > cfg.bisect_tol and iterations < BISECT_MAX_ITER:
        umid = 0.5 * (ulo + uhi)
        fm = f(10.0 ** umid)
        if fm > target:
            ulo, f_lo = umid, fm
        else:
            uhi, f_hi = umid, fm
        iterations += 1
    mu = 10.0 ** (0.5 * (ulo + uhi))
    if full_output:
        return mu, BisectInfo(10.0 ** ulo, 10.0 ** uhi, f_lo, f_hi, iterations)
    return mu


# -- reduced residuals -------------------------------------------------------

def tensor_reduced_residual(pbar):
    """Unregularized reduced residual ``min_z ||pbar * z - e1 * start_tube||_F``."""
    faces = pbar.fourier_faces()
    n, rows, _ = faces.shape
    z1h = np.fft.fft(pbar.sub[0])
    total = 0.0
    for j in range(n):
        rhs = np.zeros(rows, dtype=np.complex128)
        rhs[0] = z1h[j]
        sol = np.linalg.lstsq(faces[j], rhs, rcond=None)[0]
        r = rhs - faces[j] @ sol
        total += float(np.vdot(r, r).real)
    return float(np.sqrt(total / n))


def global_reduced_residual(pbar, beta1):
    """Unregularized reduced residual ``min_z ||pbar @ z - e1 * beta1||_2``."""
    rhs = np.zeros(pbar.shape[0])
    rhs[0] = beta1
    sol = np.linalg.lstsq(pbar, rhs, rcond=None)[0]
    return float(np.linalg.norm(rhs - pbar @ sol))


def _regularized_global_solution(pbar, beta1, mu):
    """Solve the stacked system ``[pbar; mu^{-1/2} I] z = [e1 beta1; 0]`` by QR."""
    rows, k = pbar.shape
    stacked = np.vstack([pbar, mu ** -0.5 * np.eye(k)])
    rhs = np.zeros(rows + k)
    rhs[0] = beta1
    q, r = np.linalg.qr(stacked)
    return np.linalg.solve(r, q.T @ rhs)


# -- solver front-ends -------------------------------------------------------

def _grow_and_select(state, residual_of, phi_of, grow, delta, cfg):
    """Shared discrepancy loop: grow k until the reduced residual allows the
    discrepancy, then bisect mu.

    ``state["run"]`` is the current bidiagonalization; ``residual_of``/
    ``phi_of`` read it and ``grow`` advances it by one step.  Returns
    ``(mu, residual_history)``.  Every pass either returns, raises, or
    strictly increases k, so the loop terminates.
    """
    target = (cfg.eta * delta) ** 2
    history = []
    while True:
        r = residual_of()
        history.append(r)
        if r < cfg.eta * delta:
            try:
                mu = bisect_mu(phi_of, target, cfg)
                return mu, history
            except BracketError as exc:
                if exc.side == "low":
                    raise
        if state["run"].breakdown is not None:
            raise DiscrepancyNotMet(
                f"bidiagonalization broke down at step {state['run'].breakdown} "
                f"with the discrepancy still unmet (residual {r:.6e}, "
                f"bound {cfg.eta * delta:.6e})")
        if state["run"].k >= cfg.k_max:
            raise DiscrepancyNotMet(
                f"discrepancy not met within k_max = {cfg.k_max} steps on the "
                f"mu interval (residual {r:.6e}, bound {cfg.eta * delta:.6e})")
        grow()


def wtgkt(a, b, l, m, cfg, seed=None, debug=False):
    """Weighted t-product Golub-Kahan-Tikhonov solve of one lateral slice.

    Returns ``(x, report)`` where ``x`` is the (m, 1, n) restored slice
    ``l * w_k * z_mu`` and the report carries the accepted ``k``, ``mu`` and
    achieved discrepancy.  Breakdown of the bidiagonalization is tolerated
    when the partial factorization already meets the discrepancy (flagged in
    the report) and raises :class:`DiscrepancyNotMet` otherwise.
    """
    t0 = time.perf_counter()
    delta = cfg.scalar_delta
    state = {"run": wtgkb(a, b, l, m, cfg.k_init, seed=seed)}

    def grow():
        state["run"] = extend(state["run"], 1, a, l, m)

    mu, history = _grow_and_select(
        state,
        residual_of=lambda: tensor_reduced_residual(state["run"].pbar),
        phi_of=lambda u: phi_k(state["run"].pbar, state["run"].z1, u),
        grow=grow, delta=delta, cfg=cfg)

    run = state["run"]
    z = solve_tensor_tikhonov(run.pbar, run.z1, mu)
    x = l.apply(tprod(run.w_basis(), z))
    phi_val = phi_k(run.pbar, run.z1, mu)
    disc = float(np.sqrt(phi_val))
    if debug:
        full = m.inverse.norm(tprod(a, x) - b)
        if abs(full - disc) > 1e-8 * max(disc, 1e-300):
            raise AssertionError(
                f"full-space residual {full:.12e} != reduced residual {disc:.12e}")
    wall = time.perf_counter() - t0
    rec = SliceRecord(0, run.k, mu, disc, phi_val, history, wall)
    return x, SolveReport("wtgkt", [rec], wall, run.breakdown is not None)


def wtgkt_p(a, b, l, m, cfg, seed=None, debug=False, allow_partial=False):
    """W-tGKT applied to each lateral slice of ``b`` independently.

    Every slice gets its own noise bound, step count and regularization
    parameter.  A failed slice fails the call unless ``allow_partial`` is
    set, in which case its slice comes back zero and the failure is recorded
    on its slice record.
    """
    t0 = time.perf_counter()
    b = _as_tensor3(b, "data tensor")
    p = b.shape[1]
    x = np.zeros((l.m, p, b.shape[2]))
    records = []
    breakdown = False
    for j in range(p):
        cfg_j = DiscrepancyConfig(
            delta=cfg.delta_for(j, p), eta=cfg.eta, mu_interval=cfg.mu_interval,
            bisect_tol=cfg.bisect_tol, k_init=cfg.k_init, k_max=cfg.k_max)
        try:
            xj, rep = wtgkt(a, b[:, j:j + 1, :], l, m, cfg_j, seed=seed, debug=debug)
        except (DiscrepancyNotMet, BracketError) as exc:
            if not allow_partial:
                raise type(exc)(f"slice {j}: {exc}") from exc
            records.append(SliceRecord(j, -1, float("nan"), float("nan"),
                                       float("nan"), [], 0.0, error=str(exc)))
            continue
        x[:, j:j + 1, :] = xj
        rec = rep.records[0]
        rec.slice_index = j
        records.append(rec)
        breakdown = breakdown or rep.breakdown
    return x, SolveReport("wtgkt-p", records, time.perf_counter() - t0, breakdown)


def _global_tgkt(a, b, l, m, cfg, method, debug):
    """Shared global-variant solve (one k, one mu for the given data)."""
    t0 = time.perf_counter()
    delta = cfg.scalar_delta
    state = {"run": wgg_tgkb(a, b, l, m, cfg.k_init)}

    def grow():
        state["run"] = extend(state["run"], 1, a, l, m)

    mu, history = _grow_and_select(
        state,
        residual_of=lambda: global_reduced_residual(state["run"].pbar,
                                                    state["run"].beta1),
        phi_of=lambda u: psi_k(state["run"].pbar, state["run"].beta1, u),
        grow=grow, delta=delta, cfg=cfg)

    run = state["run"]
    z = _regularized_global_solution(run.pbar, run.beta1, mu)
    x = l.apply(circledast(run.w_blocks, z))
    psi_val = psi_k(run.pbar, run.beta1, mu)
    disc = float(np.sqrt(psi_val))
    if debug:
        full = m.inverse.norm(tprod(a, x) - b)
        if abs(full - disc) > 1e-8 * max(disc, 1e-300):
            raise AssertionError(
                f"full-space residual {full:.12e} != reduced residual {disc:.12e}")
    wall = time.perf_counter() - t0
    rec = SliceRecord(0, run.k, mu, disc, psi_val, history, wall)
    return x, SolveReport(method, [rec], wall, run.breakdown is not None)


def wgg_tgkt(a, b, l, m, cfg, debug=False):
    """Weighted generalized global tGKT: all lateral slices of ``b`` at once.

    One bidiagonalization, one step count and one regularization parameter
    serve the whole (l, p, n) data tensor; the noise bound is a single value
    for the whole tensor.  Returns ``(x, report)`` with x of shape (m, p, n).
    """
    b = _as_tensor3(b, "data tensor")
    return _global_tgkt(a, b, l, m, cfg, "wgg-tgkt", debug)


def wg_tgkt(a, b, l, m, cfg, debug=False):
    """Weighted global tGKT on a single lateral slice (p = 1)."""
    b = _as_tensor3(b, "data slice")
    if b.shape[1] != 1:
        raise ValueError(f"expected a lateral slice (l, 1, n), got {b.shape}")
    return _global_tgkt(a, b, l, m, cfg, "wg-tgkt", debug)


def wg_tgkt_p(a, b, l, m, cfg, debug=False, allow_partial=False):
    """WG-tGKT applied to each lateral slice of ``b`` independently."""
    t0 = time.perf_counter()
    b = _as_tensor3(b, "data tensor")
    p = b.shape[1]
    x = np.zeros((l.m, p, b.shape[2]))
    records = []
    breakdown = False
    for j in range(p):
        cfg_j = DiscrepancyConfig(
            delta=cfg.delta_for(j, p), eta=cfg.eta, mu_interval=cfg.mu_interval,
            bisect_tol=cfg.bisect_tol, k_init=cfg.k_init, k_max=cfg.k_max)
        try:
            xj, rep = wg_tgkt(a, b[:, j:j + 1, :], l, m, cfg_j, debug=debug)
        except (DiscrepancyNotMet, BracketError) as exc:
            if not allow_partial:
                raise type(exc)(f"slice {j}: {exc}") from exc
            records.append(SliceRecord(j, -1, float("nan"), float("nan"),
                                       float("nan"), [], 0.0, error=str(exc)))
            continue
        x[:, j:j + 1, :] = xj
        rec = rep.records[0]
        rec.slice_index = j
        records.append(rec)
        breakdown = breakdown or rep.breakdown
    return x, SolveReport("wg-tgkt-p", records, time.perf_counter() - t0, breakdown)
