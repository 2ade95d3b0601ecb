"""Damped Gauss-Newton (Levenberg-Marquardt) least squares.

Numeric forward-difference Jacobians, box bounds by projection, and a full
record of accepted steps. Used by the peak/coherence fits and the circuit
parameter estimator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FitError

__all__ = ["LSQResult", "levenberg_marquardt", "numeric_jacobian"]


@dataclass
class LSQResult:
    x: np.ndarray
    residuals: np.ndarray
    jac: np.ndarray
    cost: float
    n_iter: int
    n_fev: int
    converged: bool
    message: str
    history: list = field(default_factory=list)  # cost after each accepted step
    at_bound: np.ndarray | None = None
    rank_deficient: bool = False

    def covariance(self, scale_by_residual: bool = True) -> np.ndarray:
        """Parameter covariance from the Jacobian at the optimum.

        Scaled by the reduced chi-square unless ``scale_by_residual`` is False
        (appropriate when residuals are already weighted by known errors).
        """
        j = self.jac
        m, n = j.shape
        jtj = j.T @ j
        cov = np.linalg.pinv(jtj)
        if scale_by_residual and m > n:
            cov = cov * (2 * self.cost / (m - n))
        return cov

    def stderr(self, scale_by_residual: bool = True) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance(scale_by_residual)), 0, None))


def numeric_jacobian(fun, x, f0=None, rel_step=1e-6, lower=None, upper=None):
    x = np.asarray(x, dtype=float)
    if f0 is None:
        f0 = np.asarray(fun(x), dtype=float)
    jac = np.empty((f0.size, x.size))
    for i in range(x.size):
        h = rel_step * max(abs(x[i]), 1e-8)
        xp = x.copy()
        xp[i] += h
        if upper is not None and xp[i] > upper[i]:
            h = -h
            xp[i] = x[i] + h
        jac[:, i] = (np.asarray(fun(xp), dtype=float) - f0) / h
    return jac


def levenberg_marquardt(
    fun,
    x0,
    bounds=None,
    max_iter: int = 200,
    ftol: float = 1e-10,
    xtol: float = 1e-14,
    rel_step: float = 1e-6,
    lam0: float = 1e-3,
) -> LSQResult:
    """Minimise 0.5 * ||fun(x)||^2.

    Stops when an accepted step changes the cost by less than ``ftol``
    relative, when the cost hits zero, or when the step becomes negligible.
    Raises FitError if the residuals are not finite at the start, or the
    iteration budget runs out.
    """
    x = np.asarray(x0, dtype=float).copy()
    n = x.size
    if bounds is None:
        lo, hi = np.full(n, -np.inf), np.full(n, np.inf)
    else:
        lo, hi = (np.broadcast_to(np.asarray(b, dtype=float), (n,)).copy() for b in bounds)
    x = np.clip(x, lo, hi)

    nfev = 0

    def f(z):
        nonlocal nfev
        nfev += 1
        return np.asarray(fun(z), dtype=float).ravel()

    r = f(x)
    if not np.all(np.isfinite(r)):
        raise FitError("residuals not finite at the initial point", {"x0": x.tolist()})
    cost = 0.5 * float(r @ r)
    history = [cost]
    lam = lam0
    converged, message = False, "maximum iterations reached"
    if n == 0:
        return LSQResult(x, r, np.zeros((r.size, 0)), cost, 0, nfev, True, "no free parameters",
                         history, np.zeros(0, bool))

    jac = numeric_jacobian(f, x, r, rel_step, lo, hi)
    it = 0
    while it < max_iter:
        it += 1
        if cost == 0.0:
            converged, message = True, "zero residual"
            break
        g = jac.T @ r
        jtj = jac.T @ jac
        diag = np.diag(jtj).copy()
        diag[diag <= 0] = 1.0
        accepted = False
        for _ in range(30):
            a = jtj + lam * np.diag(diag)
            try:
                step = -np.linalg.solve(a, g)
            except np.linalg.LinAlgError:
                step = -np.linalg.lstsq(a, g, rcond=None)[0]
            x_new = np.clip(x + step, lo, hi)
            r_new = f(x_new)
            cost_new = 0.5 * float(r_new @ r_new) if np.all(np.isfinite(r_new)) else np.inf
            if cost_new < cost:
                accepted = True
                lam = max(lam / 3.0, 1e-12)
                break
            lam *= 4.0
        if not accepted:
            converged, message = True, "no further decrease possible"
            break
        dx = np.abs(x_new - x)
        rel_change = (cost - cost_new) / max(cost, 1e-300)
        x, r, cost = x_new, r_new, cost_new
        history.append(cost)
        if rel_change < ftol:
            converged, message = True, "relative cost change below tolerance"
            break
        if np.all(dx <= xtol * (np.abs(x) + xtol)):
            converged, message = True, "step below tolerance"
            break
        jac = numeric_jacobian(f, x, r, rel_step, lo, hi)

    if not converged:
        raise FitError(
            f"no convergence after {max_iter} iterations",
            {"x": x.tolist(), "cost": cost, "n_fev": nfev},
        )
    jac = numeric_jacobian(f, x, r, rel_step, lo, hi)
    span = np.maximum(np.abs(x), 1e-12)
    at_bound = (np.abs(x - lo) <= 1e-9 * span) | (np.abs(hi - x) <= 1e-9 * span)
    sv = np.linalg.svd(jac, compute_uv=False) if jac.size else np.zeros(0)
    rank_def = bool(sv.size and sv[-1] <= 1e-10 * sv[0])
    return LSQResult(x, r, jac, cost, it, nfev, converged, message, history, at_bound, rank_def)
