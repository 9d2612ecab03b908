"""Belief reconstruction: project the prior mean onto the constraint set.

The estimate solves

    minimize    || x - mu ||^2
    subject to  A x = o,   0 <= x <= 1

where (A, o) is the reduced measurement system. Only the prior mean
matters for the optimum, so the covariance is carried for API fidelity
but never consulted. Cells outside every constraint row stay at the
mean; pinned cells keep their exact values; the remaining footprint is
solved densely. An equality-only projection is tried first and accepted
when it lands inside the box, otherwise an ADMM splitting (box clamp
alternating with equality projection) runs, periodically polished by an
active-set refinement that certifies the KKT conditions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constraints import ConstraintStore

__all__ = [
    "PriorModel",
    "BeliefEstimate",
    "SolverOptions",
    "SolverStats",
    "SolverError",
    "KktReport",
    "estimate",
    "kkt_certificate",
    "saa_check",
]


class SolverError(RuntimeError):
    """The QP solver failed to reach the required residuals."""


@dataclass(frozen=True)
class PriorModel:
    """Prior over occupancy: mean (scalar or per-cell) and optional
    covariance. The estimate depends on the mean only."""

    mean: float | np.ndarray = 0.5
    covariance: np.ndarray | None = None

    def mean_vector(self, n: int) -> np.ndarray:
        if np.isscalar(self.mean):
            m = float(self.mean)
            if not 0.0 <= m <= 1.0:
                raise ValueError("prior mean must lie in [0, 1]")
            return np.full(n, m)
        mean = np.asarray(self.mean, dtype=float)
        if mean.shape != (n,):
            raise ValueError(f"prior mean has shape {mean.shape}, expected ({n},)")
        if mean.min() < 0.0 or mean.max() > 1.0:
            raise ValueError("prior mean must lie in [0, 1]")
        return mean.copy()


@dataclass(frozen=True)
class SolverOptions:
    step_tol: float = 1e-9
    max_iterations: int = 100_000
    rho: float = 2.0
    polish_every: int = 50
    box_tol: float = 1e-8
    equality_tol: float = 1e-6
    active_tol: float = 1e-7


@dataclass
class SolverStats:
    iterations: int
    equality_residual: float
    box_violation: float
    polished: bool


@dataclass(eq=False)
class BeliefEstimate:
    """Decoder output over all cells plus solve diagnostics."""

    values: np.ndarray
    objective: float
    known_mask: np.ndarray
    stats: SolverStats


@dataclass
class KktReport:
    stationarity_residual: float
    min_bound_multiplier: float
    equality_residual: float
    box_violation: float


DEFAULT_PRIOR = PriorModel()


def estimate(
    store: ConstraintStore,
    prior: PriorModel | None = None,
    *,
    warm_start: np.ndarray | None = None,
    options: SolverOptions | None = None,
) -> BeliefEstimate:
    """Unique minimizer of ||x - mu||^2 over the store's constraint set."""
    if store.pending_count:
        raise ValueError("store has unreduced rows; call reduce_independent first")
    prior = prior or DEFAULT_PRIOR
    opts = options or SolverOptions()
    n = store.n
    mu = prior.mean_vector(n)
    values = mu.copy()
    known_mask = np.zeros(n, dtype=bool)
    for cell, v in store.known.items():
        values[cell] = min(max(v, 0.0), 1.0)
        known_mask[cell] = True

    rows = store.multi_rows()
    iterations = 0
    eq_res = 0.0
    polished = True
    if rows:
        cols = sorted({c for coeffs, _ in rows for c in coeffs})
        col_of = {c: i for i, c in enumerate(cols)}
        m, f = len(rows), len(cols)
        A = np.zeros((m, f))
        b = np.empty(m)
        for i, (coeffs, rhs) in enumerate(rows):
            b[i] = rhs
            for c, w in coeffs.items():
                A[i, col_of[c]] = w
        # reduced rows never touch pinned cells, so mu is the only input
        mu_f = mu[np.asarray(cols, dtype=int)]
        warm_f = None
        if warm_start is not None:
            warm_f = np.asarray(warm_start, dtype=float)[np.asarray(cols, dtype=int)]
        y, iterations, eq_res, polished = _project_box_affine(A, b, mu_f, warm_f, opts)
        values[np.asarray(cols, dtype=int)] = y

    box_violation = float(max(0.0, (values - 1.0).max(), (-values).max()))
    if box_violation > opts.box_tol:
        raise SolverError(f"box violation {box_violation:.3e} exceeds tolerance")
    np.clip(values, 0.0, 1.0, out=values)
    diff = values - mu
    return BeliefEstimate(
        values=values,
        objective=float(diff @ diff),
        known_mask=known_mask,
        stats=SolverStats(
            iterations=iterations,
            equality_residual=eq_res,
            box_violation=box_violation,
            polished=polished,
        ),
    )


def _project_box_affine(
    A: np.ndarray,
    b: np.ndarray,
    mu: np.ndarray,
    warm: np.ndarray | None,
    opts: SolverOptions,
) -> tuple[np.ndarray, int, float, bool]:
    """Minimize ||y - mu||^2 subject to A y = b and 0 <= y <= 1."""
    gram = A @ A.T
    try:
        q = np.linalg.solve(gram, A)  # (A A^T)^-1 A
        c0 = np.linalg.solve(gram, b)
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(c0))):
            raise np.linalg.LinAlgError("non-finite projection factors")
    except np.linalg.LinAlgError:
        # nearly dependent reduced rows; fall back to a least-squares
        # pseudo-inverse so the projection stays well defined
        try:
            q, *_ = np.linalg.lstsq(gram, A, rcond=None)
            c0, *_ = np.linalg.lstsq(gram, b, rcond=None)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"equality projection failed: {exc}") from exc

    def project(v: np.ndarray) -> np.ndarray:
        return v - A.T @ (q @ v - c0)

    y0 = project(mu)
    if y0.min() >= -1e-12 and y0.max() <= 1.0 + 1e-12:
        return np.clip(y0, 0.0, 1.0), 0, _eq_res(A, b, y0), True

    rho = opts.rho
    z = np.clip(warm if warm is not None else y0, 0.0, 1.0)
    u = np.zeros_like(z)
    x_prev = np.full_like(z, np.inf)
    for it in range(1, opts.max_iterations + 1):
        x = np.clip((2.0 * mu + rho * (z - u)) / (2.0 + rho), 0.0, 1.0)
        z = project(x + u)
        u += x - z
        if not np.all(np.isfinite(z)):
            raise SolverError("equality projection diverged")
        step = float(np.max(np.abs(x - x_prev)))
        gap = float(np.max(np.abs(x - z)))
        x_prev = x
        if it == 1 or it % opts.polish_every == 0 or (
            step <= opts.step_tol and gap <= 10.0 * opts.step_tol
        ):
            polished = _polish(A, b, mu, x, opts)
            if polished is not None:
                return polished, it, _eq_res(A, b, polished), True
            if step <= opts.step_tol and gap <= 10.0 * opts.step_tol:
                break

    # unpolished fallback: accept the last iterate if it meets contract
    eq_res = _eq_res(A, b, x)
    if eq_res <= opts.equality_tol:
        return x, it, eq_res, False
    raise SolverError(
        f"no convergence in {it} iterations "
        f"(equality residual {eq_res:.3e}, step {step:.3e})"
    )


def _polish(
    A: np.ndarray,
    b: np.ndarray,
    mu: np.ndarray,
    x: np.ndarray,
    opts: SolverOptions,
) -> np.ndarray | None:
    """Active-set refinement; returns the exact optimum or None.

    Pins coordinates sitting at the box bounds, solves the least-norm
    correction on the free ones, and accepts only when feasibility and a
    multiplier fit with correct signs hold, which certifies optimality.
    """
    if not np.all(np.isfinite(x)):
        return None
    lo = x <= opts.active_tol
    hi = x >= 1.0 - opts.active_tol
    free = ~(lo | hi)
    y = np.where(hi, 1.0, 0.0)
    rhs = b - A[:, ~free] @ y[~free]
    Af = A[:, free]
    mu_f = mu[free]
    try:
        lam, *_ = np.linalg.lstsq(Af @ Af.T, rhs - Af @ mu_f, rcond=None)
    except np.linalg.LinAlgError:
        return None
    yf = mu_f + Af.T @ lam
    y[free] = yf
    if not np.all(np.isfinite(y)):
        return None
    if np.max(np.abs(A @ y - b), initial=0.0) > 1e-9:
        return None
    if yf.size and (yf.min() < -1e-12 or yf.max() > 1.0 + 1e-12):
        return None
    # certify: 2(y - mu) must be -A^T nu + eta_lo - eta_hi with eta >= 0
    g = 2.0 * (y - mu)
    blocks = [A.T]
    if lo.any():
        e = np.zeros((len(y), int(lo.sum())))
        e[np.flatnonzero(lo), np.arange(int(lo.sum()))] = 1.0
        blocks.append(e)
    if hi.any():
        e = np.zeros((len(y), int(hi.sum())))
        e[np.flatnonzero(hi), np.arange(int(hi.sum()))] = -1.0
        blocks.append(e)
    resid, min_mult = _fit_multipliers(np.hstack(blocks), g, A.shape[0])
    if resid > 1e-9 or min_mult < -1e-9:
        return None
    return np.clip(y, 0.0, 1.0)


def _eq_res(A: np.ndarray, b: np.ndarray, y: np.ndarray) -> float:
    return float(np.max(np.abs(A @ y - b))) if len(b) else 0.0


def _fit_multipliers(
    B: np.ndarray, g: np.ndarray, n_eq: int
) -> tuple[float, float]:
    """Least-squares multiplier fit with sign handling on bound columns.

    Equality multipliers are free; bound multipliers must be >= 0. A
    plain minimum-norm fit can split a gradient between collinear
    equality and bound normals with spurious negative signs, so bound
    columns with negative fitted multipliers are dropped greedily and
    the fit repeated. Returns (residual_inf, min_bound_multiplier); a
    valid certificate has a small residual and no negative multiplier.
    """
    active = list(range(B.shape[1]))
    while True:
        try:
            w, *_ = np.linalg.lstsq(B[:, active], g, rcond=None)
        except np.linalg.LinAlgError:
            return np.inf, 0.0
        resid = float(np.max(np.abs(B[:, active] @ w - g), initial=0.0))
        bound_idx = [j for j, col in enumerate(active) if col >= n_eq]
        if not bound_idx:
            return resid, 0.0
        mults = w[bound_idx]
        worst = float(mults.min())
        if worst >= -1e-9:
            return resid, worst
        drop = bound_idx[int(np.argmin(mults))]
        del active[drop]


def kkt_certificate(
    store: ConstraintStore,
    prior: PriorModel | None,
    values: np.ndarray,
    *,
    active_tol: float = 1e-7,
) -> KktReport:
    """Fit Lagrange multipliers at `values` and report the residuals.

    The objective gradient 2(x - mu) must be a combination of equality
    row normals and active-bound normals with nonnegative bound
    multipliers; the fit is least squares over the involved cells.
    """
    prior = prior or DEFAULT_PRIOR
    mu = prior.mean_vector(store.n)
    values = np.asarray(values, dtype=float)
    rows = store.equations()
    involved = sorted({c for coeffs, _ in rows for c in coeffs})
    box_violation = float(max(0.0, (values - 1.0).max(), (-values).max()))
    if not involved:
        g = 2.0 * (values - mu)
        return KktReport(float(np.max(np.abs(g), initial=0.0)), 0.0, 0.0, box_violation)
    col_of = {c: i for i, c in enumerate(involved)}
    n_inv = len(involved)
    eq_res = 0.0
    basis_cols = []
    for coeffs, rhs in rows:
        col = np.zeros(n_inv)
        acc = 0.0
        for c, w in coeffs.items():
            col[col_of[c]] = w
            acc += w * values[c]
        eq_res = max(eq_res, abs(acc - rhs))
        basis_cols.append(col)
    # pinned cells need no bound normals: their unit equality row absorbs
    # the gradient, and keeping both makes the multiplier split ambiguous
    lo = [c for c in involved if values[c] <= active_tol and c not in store.known]
    hi = [c for c in involved if values[c] >= 1.0 - active_tol and c not in store.known]
    for c in lo:
        col = np.zeros(n_inv)
        col[col_of[c]] = 1.0  # eta_lo contributes +e_c to the gradient
        basis_cols.append(col)
    for c in hi:
        col = np.zeros(n_inv)
        col[col_of[c]] = -1.0  # eta_hi contributes -e_c
        basis_cols.append(col)
    g = 2.0 * (values[np.asarray(involved, dtype=int)] - mu[np.asarray(involved, dtype=int)])
    resid, min_mult = _fit_multipliers(np.column_stack(basis_cols), g, len(rows))
    return KktReport(resid, min_mult, float(eq_res), box_violation)


def saa_check(
    store: ConstraintStore,
    prior: PriorModel | None,
    sample_count: int,
    rng: np.random.Generator | int | None = None,
) -> float:
    """Sample-average sanity check of the mean-projection estimate.

    Draws `sample_count` occupancy vectors uniformly from [0, 1]^N,
    minimizes the empirical average squared distance over the constraint
    set (equivalently, projects the sample mean), and returns the
    infinity-norm gap to the analytic estimate. Shrinks like 1/sqrt(m).
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(rng)
    n = store.n
    total = np.zeros(n)
    remaining = sample_count
    while remaining:
        chunk = min(remaining, 1024)
        total += rng.random((chunk, n)).sum(axis=0)
        remaining -= chunk
    sample_mean = total / sample_count
    base = estimate(store, prior)
    saa = estimate(store, PriorModel(mean=sample_mean))
    return float(np.max(np.abs(saa.values - base.values)))
