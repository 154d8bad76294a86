"""Decay-model fitting and memory-error extraction.

Implements the randomized-benchmarking decay fit F(m) = (a p^m + 1)/2
with b fixed at 1, the interleaved/reference ratio estimator
eps_m = (1 - p_irb / p_ref)/2, the contrast-loss / 3 conversion, the
closed-form white+pink+static memory-error model, and decay-time fits
for Ramsey and echo contrast curves.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .noise import NoiseModel

PINK_LOG_CONSTANT = 0.4


class FitError(RuntimeError):
    """Raised when a fit cannot be performed or does not converge."""


@dataclass(frozen=True)
class RbDecayFit:
    """Result of fitting F(m) = (a p^m + 1)/2."""

    p: float
    a: float
    cov: np.ndarray
    residuals: np.ndarray
    points: tuple[tuple[float, float, float], ...]

    @property
    def epsilon(self) -> float:
        """Average error per step, (1 - p)/2."""
        return 0.5 * (1.0 - self.p)

    @property
    def epsilon_sigma(self) -> float:
        return 0.5 * self.p_sigma

    @property
    def p_sigma(self) -> float:
        return float(np.sqrt(self.cov[0, 0]))

    @property
    def a_sigma(self) -> float:
        return float(np.sqrt(self.cov[1, 1]))

    @property
    def eps_spam(self) -> float:
        """SPAM error implied by the intercept, (1 - a)/2."""
        return 0.5 * (1.0 - self.a)

    @property
    def eps_spam_sigma(self) -> float:
        return 0.5 * self.a_sigma


def _weights_from_sems(sems: np.ndarray) -> np.ndarray:
    if np.all(sems > 0):
        return 1.0 / sems
    positive = sems[sems > 0]
    if positive.size == 0:
        return np.ones_like(sems)
    # Deterministic points get the tightest observed weight.
    fill = positive.min()
    return 1.0 / np.where(sems > 0, sems, fill)


def fit_rb_decay(points) -> RbDecayFit:
    """Weighted least-squares fit of (m, mean fidelity, sem) points to
    F(m) = (a p^m + 1)/2.

    Parameters
    ----------
    points : iterable of (m, fidelity, sem)
        sem may be 0 for deterministic points; such points get uniform
        weight relative to the rest.

    Returns
    -------
    RbDecayFit
        With covariance of (p, a). When all sems are positive the
        covariance is absolute (chi^2 not rescaled); otherwise it is
        scaled by the reduced chi^2.

    Raises
    ------
    FitError
        On fewer than 3 distinct m values, fidelities outside [0, 1],
        or non-convergence.
    """
    pts = sorted((float(m), float(f), float(s)) for m, f, s in points)
    m = np.array([q[0] for q in pts])
    f = np.array([q[1] for q in pts])
    s = np.array([q[2] for q in pts])
    if len(np.unique(m)) < 3:
        raise FitError("need at least 3 distinct sequence lengths")
    if np.any((f < 0) | (f > 1)):
        raise FitError("fidelities must lie in [0, 1]")
    w = _weights_from_sems(s)

    y = 2.0 * f - 1.0  # a p^m in the ideal model
    # Starting values: intercept from the shortest sequences, decay from
    # the spread of log(2F - 1) where usable.
    a0 = float(np.clip(y[0], 1e-3, 1.0))
    pos = y > 1e-12
    if pos.sum() >= 2:
        slope = np.polyfit(m[pos], np.log(y[pos]), 1)[0]
        p0 = float(np.clip(np.exp(slope), 1e-6, 1.0))
    else:
        p0 = 0.5

    def resid(theta):
        p, a = theta
        return w * (0.5 * (a * np.power(p, m) + 1.0) - f)

    def jac(theta):
        p, a = theta
        pm = np.power(p, m)
        j = np.empty((len(m), 2))
        j[:, 0] = w * 0.5 * a * m * np.power(p, np.maximum(m - 1.0, 0.0))
        j[:, 1] = w * 0.5 * pm
        return j

    try:
        sol = least_squares(resid, x0=[p0, a0], jac=jac,
                            bounds=([0.0, 1e-6], [1.0, 1.0]),
                            xtol=1e-14, ftol=1e-14, gtol=1e-14)
    except ValueError as exc:
        raise FitError(f"RB decay fit failed: {exc}") from exc
    if not sol.success:
        raise FitError(f"RB decay fit did not converge: {sol.message}")

    jtj = sol.jac.T @ sol.jac
    try:
        cov = np.linalg.inv(jtj)
    except np.linalg.LinAlgError as exc:
        raise FitError("singular normal equations in RB decay fit") from exc
    if not np.all(s > 0):
        dof = max(len(m) - 2, 1)
        cov = cov * max(float(sol.fun @ sol.fun) / dof, np.finfo(float).tiny)
    return RbDecayFit(p=float(sol.x[0]), a=float(sol.x[1]), cov=cov,
                      residuals=np.asarray(sol.fun), points=tuple(pts))


def extract_memory_error(fit_irb: RbDecayFit, fit_ref: RbDecayFit) -> tuple[float, float]:
    """Memory error per interleaved step, (1 - p_irb / p_ref)/2.

    Uncertainty is first-order propagation from both fit covariances,
    treating the two fits as independent (a conservative reading when
    the two campaigns share randomizations).
    """
    if fit_ref.p == 0:
        raise FitError("reference decay parameter is zero")
    ratio = fit_irb.p / fit_ref.p
    eps = 0.5 * (1.0 - ratio)
    var = (0.5 / fit_ref.p) ** 2 * fit_irb.cov[0, 0] \
        + (0.5 * fit_irb.p / fit_ref.p ** 2) ** 2 * fit_ref.cov[0, 0]
    return float(eps), float(math.sqrt(var))


def contrast_loss_to_memory_error(loss: float) -> float:
    """Convert Ramsey contrast loss to an average memory error.

    The factor 1/3 averages a pure dephasing error over the Bloch
    sphere: the error spans [0, 1/2] on the equator (2/3 of the time)
    and vanishes at the poles.
    """
    if not (-0.1 <= loss <= 1.0):
        raise ValueError(f"contrast loss {loss} outside [-0.1, 1]")
    return loss / 3.0


def predict_memory_error(model: NoiseModel, tau: float, quiet: bool = False) -> float:
    """Closed-form memory error per idle window of length tau.

    eps_m(tau) = (pi/3) [ s_w tau / 2 + s_p tau^2 ln(0.4 / (f_c tau)) ]
                 + (2/3) sin^2(pi tau df)
                 + (1/3) [1 - exp(-(2 pi qs_sigma tau)^2 / 2)]

    where df is the model's constant detuning. The pink term is valid
    for f_c tau < 0.4; beyond that it is dropped and a warning is
    emitted (suppressed when quiet=True).
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    if tau == 0:
        return 0.0
    out = (math.pi / 3.0) * model.s_w * tau / 2.0
    if model.s_p > 0:
        x = PINK_LOG_CONSTANT / (model.f_c * tau)
        if x > 1.0:
            out += (math.pi / 3.0) * model.s_p * tau ** 2 * math.log(x)
        elif not quiet:
            warnings.warn(
                f"pink-noise term outside its validity range (f_c*tau = "
                f"{model.f_c * tau:.3g} >= {PINK_LOG_CONSTANT}); returning "
                "white + static terms only", stacklevel=2)
    df = model.constant_detuning
    if df != 0.0:
        out += (2.0 / 3.0) * math.sin(math.pi * tau * df) ** 2
    if model.qs_sigma > 0:
        out += (1.0 / 3.0) * (1.0 - math.exp(-0.5 * (2.0 * math.pi * model.qs_sigma * tau) ** 2))
    return out


@dataclass(frozen=True)
class MemoryErrorPoint:
    tau: float
    eps_m: float
    sigma: float
    method: str = "irb"


@dataclass(frozen=True)
class MemoryErrorCurve:
    points: tuple[MemoryErrorPoint, ...]

    def for_method(self, method: str) -> "MemoryErrorCurve":
        return MemoryErrorCurve(tuple(p for p in self.points if p.method == method))

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        tau = np.array([p.tau for p in self.points])
        eps = np.array([p.eps_m for p in self.points])
        sig = np.array([p.sigma for p in self.points])
        return tau, eps, sig


@dataclass(frozen=True)
class DecoherenceFit:
    s_w: float
    s_p: float
    f_c: float
    s_w_sigma: float
    s_p_sigma: float
    f_c_sigma: float
    cov_log: np.ndarray


def _curve_points(curve) -> list[tuple[float, float, float]]:
    if isinstance(curve, MemoryErrorCurve):
        return [(p.tau, p.eps_m, p.sigma) for p in curve.points]
    return [(float(t), float(e), float(s)) for t, e, s in curve]


def fit_decoherence_model(curve) -> DecoherenceFit:
    """Fit (s_w, s_p, f_c) of the closed-form memory-error model to
    (tau, eps_m, sigma) points.

    Positivity is enforced by fitting log-parameters. Requires at least
    4 points spanning at least two decades in tau.
    """
    pts = _curve_points(curve)
    if len(pts) < 4:
        raise FitError("need at least 4 points")
    tau = np.array([p[0] for p in pts])
    eps = np.array([p[1] for p in pts])
    sem = np.array([p[2] for p in pts])
    if tau.max() / tau.min() < 99.0:
        raise FitError("tau points must span at least two decades")
    w = _weights_from_sems(sem)

    def model_eps(theta):
        s_w, s_p, f_c = np.exp(theta)
        white = (math.pi / 3.0) * s_w * tau / 2.0
        logarg = PINK_LOG_CONSTANT / (f_c * tau)
        pink = (math.pi / 3.0) * s_p * tau ** 2 * np.log(np.maximum(logarg, 1.0))
        return white + pink

    def resid(theta):
        return w * (model_eps(theta) - eps)

    # Heuristic start: white from the smallest tau, pink from the
    # largest, cutoff placed to keep the log positive everywhere.
    t_lo, e_lo = tau.min(), eps[np.argmin(tau)]
    t_hi, e_hi = tau.max(), eps[np.argmax(tau)]
    s_w0 = max(e_lo / ((math.pi / 6.0) * t_lo), 1e-12)
    f_c0 = 0.1 / t_hi
    s_p0 = max((e_hi - (math.pi / 6.0) * s_w0 * t_hi), e_hi * 0.1) \
        / ((math.pi / 3.0) * t_hi ** 2 * math.log(PINK_LOG_CONSTANT / (f_c0 * t_hi)))
    s_p0 = max(s_p0, 1e-12)
    x0 = np.log([s_w0, s_p0, f_c0])

    sol = least_squares(resid, x0=x0, method="lm", xtol=1e-14, ftol=1e-14)
    if not sol.success:
        raise FitError(f"decoherence-model fit did not converge: {sol.message}")
    theta = sol.x
    if PINK_LOG_CONSTANT / (math.exp(theta[2]) * tau.max()) <= 1.0:
        raise FitError("fitted cutoff leaves the pink term invalid at the largest tau")
    jtj = sol.jac.T @ sol.jac
    try:
        cov = np.linalg.inv(jtj)
    except np.linalg.LinAlgError as exc:
        raise FitError("singular normal equations in decoherence fit") from exc
    if not np.all(sem > 0):
        dof = max(len(tau) - 3, 1)
        cov = cov * max(float(sol.fun @ sol.fun) / dof, np.finfo(float).tiny)
    s_w, s_p, f_c = np.exp(theta)
    sig = np.sqrt(np.diag(cov))
    return DecoherenceFit(
        s_w=float(s_w), s_p=float(s_p), f_c=float(f_c),
        s_w_sigma=float(s_w * sig[0]), s_p_sigma=float(s_p * sig[1]),
        f_c_sigma=float(f_c * sig[2]), cov_log=cov)


def fit_contrast_decay(points, shape: str = "exponential") -> tuple[float, float]:
    """Fit a decay-time constant to (tau, contrast_loss[, sem]) points.

    The model is loss(t) = 1 - exp(-t / T) (exponential) or
    1 - exp(-(t / T)^2) (gaussian); loss is pinned to 0 at t = 0 by the
    model form. Returns (T, sigma_T).
    """
    if shape not in ("exponential", "gaussian"):
        raise ValueError("shape must be 'exponential' or 'gaussian'")
    pts = [tuple(map(float, p)) for p in points]
    if len(pts) < 3:
        raise FitError("need at least 3 points")
    tau = np.array([p[0] for p in pts])
    loss = np.array([p[1] for p in pts])
    sem = np.array([p[2] if len(p) > 2 else 0.0 for p in pts])
    if np.any(tau <= 0):
        raise FitError("tau points must be positive")
    w = _weights_from_sems(sem)
    power = 1.0 if shape == "exponential" else 2.0

    def resid(theta):
        t2 = np.exp(theta[0])
        return w * (1.0 - np.exp(-((tau / t2) ** power)) - loss)

    # Start from the point closest to half decay.
    mid = np.argmin(np.abs(loss - 0.5))
    guess = tau[mid] / max((-np.log(max(1.0 - loss[mid], 1e-6))) ** (1.0 / power), 1e-6)
    sol = least_squares(resid, x0=[np.log(max(guess, 1e-12))], method="lm",
                        xtol=1e-14, ftol=1e-14)
    if not sol.success:
        raise FitError(f"contrast-decay fit did not converge: {sol.message}")
    t2 = float(np.exp(sol.x[0]))
    jtj = float(sol.jac.T @ sol.jac)
    if jtj <= 0:
        raise FitError("degenerate contrast-decay fit")
    var_log = 1.0 / jtj
    if not np.all(sem > 0):
        dof = max(len(tau) - 1, 1)
        var_log *= max(float(sol.fun @ sol.fun) / dof, np.finfo(float).tiny)
    return t2, float(t2 * math.sqrt(var_log))


def bootstrap_ci(records, statistic, resamples: int = 1000,
                 rng: np.random.Generator | None = None) -> tuple[float, float]:
    """Nonparametric bootstrap standard error of a statistic over records.

    Resampling is over whole records (e.g. sequence randomizations).
    Deterministic given the rng state. Returns (point estimate, sigma).
    """
    records = list(records)
    if len(records) < 2:
        raise ValueError("need at least 2 records")
    if resamples < 100:
        raise ValueError("need at least 100 resamples")
    if rng is None:
        rng = np.random.default_rng(0)
    point = float(statistic(records))
    n = len(records)
    stats = np.empty(resamples)
    for i in range(resamples):
        idx = rng.integers(0, n, size=n)
        stats[i] = statistic([records[j] for j in idx])
    return point, float(stats.std(ddof=1))


def aggregate_fidelities(fidelities_by_m: dict[int, list[float]]) -> list[tuple[float, float, float]]:
    """Collapse per-sequence fidelities into (m, mean, sem) points."""
    points = []
    for m in sorted(fidelities_by_m):
        vals = np.asarray(fidelities_by_m[m], dtype=float)
        sem = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
        points.append((float(m), float(vals.mean()), sem))
    return points
