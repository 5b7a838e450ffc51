"""End-to-end estimators, model selection, paths, and data simulators.

Three estimators, all run as alternating envelope updates:

* robust fused lasso (``rfl``): Huber data fit + first-difference l1
  penalty; the location shift ``u`` turns each step into an ordinary
  fused lasso on ``y - u``.
* quantile trend filtering (``qrtf``): check loss at quantile ``q`` +
  l1 on order-(k+1) differences; the variance-mean weights
  ``(omega, z)`` turn each step into weighted trend filtering.
* fused double-Pareto logit (``fdp``): binomial logit likelihood + a
  log penalty on first differences; the concave-penalty update gives
  per-edge weights for a logistic fused lasso.

Model selection is by the operational AIC (2*loss + 2*df with df the
count of distinct fitted levels, or knots + k + 1 for trend filtering)
or by K-fold cross validation with interleaved folds and interpolated
held-out predictions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import expit

from .errors import ValidationError
from .operators import diff_matrix
from .losses import (
    LossSpec,
    check_value,
    huber,
    location_envelope_update,
    loss_value,
    variance_mean_update,
)
from .solvers import (
    FitResult,
    SolverConfig,
    count_knots,
    distinct_levels,
    logistic_fused_lasso,
    mm_driver,
    weighted_fused_lasso,
    weighted_trend_filter,
)

__all__ = [
    "AppSpec",
    "SolutionPath",
    "Dataset",
    "fit_rfl",
    "fit_qrtf",
    "fit_fdp",
    "fused_lasso_gaussian",
    "binomial_fused_lasso",
    "aic",
    "app_loss",
    "solution_path",
    "kfold_cv",
    "simulate",
    "RFL_TRUE_LEVELS",
    "FDP_TRUE_LEVELS",
    "LOGIT_CAP",
]

APPS = ("rfl", "qrtf", "fdp")

# Canonical piecewise-constant truths for the simulators (levels on equal
# fifths of the unit interval); fixed so scores are reproducible.  The
# binomial truth uses widely separated log-odds levels: the comparison it
# anchors (l1 fusion vs the log penalty) turns on the non-diminishing
# shrinkage bias at large jumps.
RFL_TRUE_LEVELS = (0.0, 4.0, 1.0, -3.0, 0.0)
FDP_TRUE_LEVELS = (-4.0, 3.0, -3.0, 4.0, 0.0)

# |log odds| cap applied where the pointwise logit MLE diverges.
LOGIT_CAP = 36.0


@dataclass(frozen=True)
class AppSpec:
    """Which estimator to run and with what hyperparameters."""

    app: str
    lam: float = 1.0
    q: float = 0.9
    k: int = 2
    a: float = 1.0

    def __post_init__(self):
        if self.app not in APPS:
            raise ValidationError(f"unknown application {self.app!r}")
        if self.lam < 0:
            raise ValidationError("lam must be nonnegative")
        if self.app == "qrtf":
            if not 0.0 < self.q < 1.0:
                raise ValidationError("q must lie in (0, 1)")
            if self.k < 1:
                raise ValidationError("qrtf order k must be >= 1")
        if self.app == "fdp" and not self.a > 0:
            raise ValidationError("fdp scale a must be positive")

    def with_lam(self, lam: float) -> "AppSpec":
        return AppSpec(self.app, float(lam), self.q, self.k, self.a)


@dataclass
class SolutionPath:
    """Warm-started fits over a decreasing penalty grid."""

    lambdas: np.ndarray
    fits: list
    criterion_values: np.ndarray
    selected: int

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        if lam.ndim != 1 or len(self.fits) != lam.shape[0]:
            raise ValidationError("lambdas and fits must align")
        if lam.shape[0] > 1 and not np.all(np.diff(lam) < 0):
            raise ValidationError("lambdas must be strictly decreasing")

    @property
    def best_lambda(self) -> float:
        return float(self.lambdas[self.selected])

    @property
    def best_fit(self) -> FitResult:
        return self.fits[self.selected]


@dataclass(frozen=True)
class Dataset:
    """Simulated data with the generating truth attached."""

    app: str
    x: np.ndarray
    y: np.ndarray
    m: Optional[np.ndarray] = None
    truth: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Robust fused lasso


def fit_rfl(y, lam: float, cfg: Optional[SolverConfig] = None,
            init=None) -> FitResult:
    """Huber-loss fused lasso on an identity design.

    Alternates the location shift u = soft-threshold(y - beta, 1) with an
    ordinary fused lasso on the working response y - u; each step is an
    exact minimization, so the objective trace is monotone.
    """
    cfg = cfg or SolverConfig()
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.shape[0] < 2:
        raise ValidationError("y must be a vector of length >= 2")
    if lam < 0:
        raise ValidationError("lam must be nonnegative")
    loss = LossSpec("huber", y=y)
    n = y.shape[0]

    def objective(state):
        beta = state["beta"]
        return loss_value(loss, beta) + lam * float(np.sum(np.abs(np.diff(beta))))

    def u_step(state):
        return {"beta": state["beta"],
                "u": location_envelope_update(loss, state["beta"])}

    def beta_step(state):
        u = state["u"]
        beta = weighted_fused_lasso(y - u, np.ones(n), np.full(n - 1, lam))
        return {"beta": beta, "u": u}

    init_beta = y.copy() if init is None else np.array(init, dtype=float).copy()
    fit = mm_driver(objective, [("huber-shift", u_step), ("fused-lasso", beta_step)],
                    {"beta": init_beta, "u": np.zeros(n)}, cfg)
    fit.df = distinct_levels(fit.beta)
    fit.aux["u"] = location_envelope_update(loss, fit.beta)
    return fit


def fused_lasso_gaussian(y, lam: float) -> FitResult:
    """Ordinary (squared-error) fused lasso; exact in one DP call."""
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    beta = weighted_fused_lasso(y, np.ones(n), np.full(n - 1, lam))
    obj = 0.5 * float(np.sum((y - beta) ** 2)) + lam * float(np.sum(np.abs(np.diff(beta))))
    return FitResult(beta=beta, objective=obj, trace=np.asarray([obj]), iters=1,
                     converged=True, df=distinct_levels(beta))


# ---------------------------------------------------------------------------
# Quantile trend filtering


def fit_qrtf(y, q: float, k: int, lam: float,
             cfg: Optional[SolverConfig] = None, init=None,
             clamp: float = 1e6) -> FitResult:
    """Check-loss trend filtering at quantile ``q``, order ``k``.

    Each cycle forms the variance-mean weights/working responses and
    solves a weighted trend filter by ADMM (warm-started across cycles).
    The beta-step is safeguarded: a candidate that fails to decrease the
    true objective (possible from inexact inner solves or clamped
    weights at near-exact fits) is rejected, which simply freezes the
    iterate and triggers convergence.
    """
    cfg = cfg or SolverConfig()
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.shape[0] < k + 2:
        raise ValidationError("y must be a vector of length >= k + 2")
    loss = LossSpec("check", y=y, q=q)
    D = diff_matrix(y.shape[0], k)

    def true_objective(beta):
        return loss_value(loss, beta) + lam * float(np.sum(np.abs(D.apply(beta))))

    def objective(state):
        return true_objective(state["beta"])

    admm_state: dict = {}

    def weight_step(state):
        omega, z = variance_mean_update(loss, state["beta"], clamp=clamp)
        return {"beta": state["beta"], "omega": omega, "z": z}

    def beta_step(state):
        cand = weighted_trend_filter(state["z"], state["omega"], k, lam, cfg,
                                     state=admm_state)
        out = dict(state)
        if true_objective(cand) <= true_objective(state["beta"]):
            out["beta"] = cand
        return out

    if init is None:
        init_beta = weighted_trend_filter(y, np.ones_like(y), k, lam, cfg)
    else:
        init_beta = np.array(init, dtype=float).copy()
    omega0, z0 = variance_mean_update(loss, init_beta, clamp=clamp)
    fit = mm_driver(objective,
                    [("variance-mean-weights", weight_step),
                     ("weighted-trend-filter", beta_step)],
                    {"beta": init_beta, "omega": omega0, "z": z0}, cfg)
    # knots are resolved only down to the inner solver's primal residual
    scale = max(1.0, float(np.max(np.abs(fit.beta))))
    knot_tol = max(1e-6 * scale, 3.0 * admm_state.get("primal_res_inf", 0.0))
    fit.df = count_knots(fit.beta, k, rtol=knot_tol / scale) + k + 1
    fit.aux["knot_tol"] = knot_tol
    fit.aux["omega"], fit.aux["z"] = variance_mean_update(loss, fit.beta,
                                                          clamp=clamp)
    fit.aux["admm"] = {kk: admm_state.get(kk) for kk in
                       ("iters", "converged", "primal_res", "dual_res", "rho")}
    return fit


# ---------------------------------------------------------------------------
# Fused double-Pareto binomial smoothing


def _logit_nll(y, m, beta):
    return float(np.sum(m * np.logaddexp(0.0, beta) - y * beta))


def binomial_fused_lasso(y, m, lam: float, init=None,
                         cfg: Optional[SolverConfig] = None) -> FitResult:
    """Binomial logit fit with a constant l1 penalty on first differences."""
    y = np.asarray(y, dtype=float)
    m_arr = np.broadcast_to(np.asarray(m, dtype=float), y.shape).copy()
    n = y.shape[0]
    beta = logistic_fused_lasso(y, m_arr, np.full(n - 1, lam), init=init, cfg=cfg)
    obj = _logit_nll(y, m_arr, beta) + lam * float(np.sum(np.abs(np.diff(beta))))
    return FitResult(beta=beta, objective=obj, trace=np.asarray([obj]), iters=1,
                     converged=True, df=distinct_levels(beta))


def fit_fdp(y, m, lam: float, a: float = 1.0, init=None,
            cfg: Optional[SolverConfig] = None) -> FitResult:
    """Binomial smoothing with a log penalty on first differences.

    Objective: logit negative log likelihood +
    ``lam * sum_i log(1 + |beta_{i+1} - beta_i| / a)``.  The concave
    penalty is linearized at the current differences (u_i =
    lam / (a + |diff|), its exact derivative, keeping the majorizer
    tight), and the resulting logistic fused lasso is solved to inner
    tolerance.  When ``init`` is None the fit starts at the binomial
    fused-lasso solution at the same lam.
    """
    cfg = cfg or SolverConfig()
    y = np.asarray(y, dtype=float)
    m_arr = np.broadcast_to(np.asarray(m, dtype=float), y.shape).copy()
    if np.any(y < 0) or np.any(y > m_arr):
        raise ValidationError("need 0 <= y <= m")
    n = y.shape[0]
    if lam == 0.0:
        # decoupled pointwise logit MLE, capped where y/m hits {0, 1}
        with np.errstate(divide="ignore"):
            beta = np.log(y) - np.log(m_arr - y)
        beta = np.clip(beta, -LOGIT_CAP, LOGIT_CAP)
        obj = _logit_nll(y, m_arr, beta)
        return FitResult(beta=beta, objective=obj, trace=np.asarray([obj]),
                         iters=1, converged=True, df=distinct_levels(beta),
                         aux={"u": np.zeros(n - 1)})

    def objective(state):
        beta = state["beta"]
        return _logit_nll(y, m_arr, beta) + lam * float(
            np.sum(np.log1p(np.abs(np.diff(beta)) / a)))

    def u_step(state):
        u = lam / (a + np.abs(np.diff(state["beta"])))
        return {"beta": state["beta"], "u": u}

    inner_cfg = SolverConfig(max_iters=cfg.inner_max_iters, tol=cfg.inner_tol,
                             record_trace=False)

    def beta_step(state):
        beta = logistic_fused_lasso(y, m_arr, state["u"], init=state["beta"],
                                    cfg=inner_cfg)
        return {"beta": beta, "u": state["u"]}

    if init is None:
        init_beta = binomial_fused_lasso(y, m_arr, lam, cfg=cfg).beta
    else:
        init_beta = np.array(init, dtype=float).copy()
    fit = mm_driver(objective,
                    [("log-penalty-weights", u_step),
                     ("logistic-fused-lasso", beta_step)],
                    {"beta": init_beta, "u": np.zeros(n - 1)}, cfg)
    fit.df = distinct_levels(fit.beta)
    fit.aux["u"] = lam / (a + np.abs(np.diff(fit.beta)))
    return fit


# ---------------------------------------------------------------------------
# Model selection


def aic(fit: FitResult, loss_value_at_fit: float) -> float:
    """Operational AIC: twice the loss at the optimum plus twice the
    number of distinct fitted levels (df)."""
    return 2.0 * float(loss_value_at_fit) + 2.0 * fit.df


def app_loss(app: AppSpec, y, beta, m=None) -> float:
    """The data-fit part of an application objective at a fitted vector."""
    y = np.asarray(y, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if app.app == "rfl":
        return float(np.sum(huber(y - beta)))
    if app.app == "qrtf":
        return float(np.sum(check_value(y - beta, app.q)))
    m_arr = np.broadcast_to(np.asarray(m, dtype=float), y.shape)
    return _logit_nll(y, m_arr, beta)


def _fit_app(app: AppSpec, y, m, cfg, init, fl_init_fit=None):
    if app.app == "rfl":
        return fit_rfl(y, app.lam, cfg=cfg, init=init)
    if app.app == "qrtf":
        return fit_qrtf(y, app.q, app.k, app.lam, cfg=cfg, init=init)
    fl_beta = fl_init_fit.beta if fl_init_fit is not None else init
    return fit_fdp(y, m, app.lam, a=app.a, init=fl_beta, cfg=cfg)


def _ordinary_fit(app: AppSpec, y, m, init=None, cfg=None):
    """The convex comparator used for warm starts (fdp only)."""
    return binomial_fused_lasso(y, m, app.lam, init=init, cfg=cfg)


def solution_path(app: AppSpec, y, lambdas, m=None, criterion: str = "aic",
                  folds: int = 5, cfg: Optional[SolverConfig] = None,
                  init_mode: str = "auto") -> SolutionPath:
    """Warm-started fits along a strictly decreasing penalty grid.

    Each fit starts at the previous solution; for fdp the default
    ("fused-lasso-init") instead starts each fit at the binomial
    fused-lasso solution for the same lam, which guards the nonconvex
    path against propagating poor local optima.  ``criterion`` is "aic"
    or "cv"; ties select the larger lam.
    """
    lam_arr = np.asarray(lambdas, dtype=float)
    if lam_arr.ndim != 1 or lam_arr.size == 0:
        raise ValidationError("lambdas must be a nonempty vector")
    if lam_arr.shape[0] > 1 and not np.all(np.diff(lam_arr) < 0):
        raise ValidationError("lambdas must be strictly decreasing")
    if criterion not in ("aic", "cv"):
        raise ValidationError(f"unknown criterion {criterion!r}")
    if init_mode == "auto":
        init_mode = "fused-lasso-init" if app.app == "fdp" else "warm"
    if init_mode not in ("warm", "fused-lasso-init"):
        raise ValidationError(f"unknown init mode {init_mode!r}")
    if app.app == "fdp" and m is None:
        raise ValidationError("fdp requires trial counts m")

    y = np.asarray(y, dtype=float)
    fits = []
    prev_beta = None
    fl_prev = None
    for lam in lam_arr:
        spec = app.with_lam(lam)
        if app.app == "fdp" and init_mode == "fused-lasso-init":
            fl_fit = _ordinary_fit(spec, y, m, init=fl_prev, cfg=cfg)
            fl_prev = fl_fit.beta
            fit = _fit_app(spec, y, m, cfg, init=None, fl_init_fit=fl_fit)
        else:
            fit = _fit_app(spec, y, m, cfg, init=prev_beta)
        prev_beta = fit.beta
        fits.append(fit)

    if criterion == "aic":
        crit = np.asarray([
            aic(f, app_loss(app, y, f.beta, m=m)) for f in fits])
    else:
        _, crit = kfold_cv(app, y, lam_arr, folds, cfg=cfg, m=m)
    selected = int(np.argmin(crit))  # first minimum = largest lam on ties
    return SolutionPath(lambdas=lam_arr, fits=fits,
                        criterion_values=np.asarray(crit, dtype=float),
                        selected=selected)


def kfold_cv(app: AppSpec, y, lambdas, K: int,
             cfg: Optional[SolverConfig] = None, m=None):
    """Interleaved K-fold cross validation over a penalty grid.

    Fold r holds out indices with ``i mod K == r`` (preserving grid
    coverage); fits run on the retained subsequence and held-out points
    are predicted by linear interpolation of the fitted vector between
    the nearest retained indices (constant beyond the ends).  The CV
    loss is the application's data loss summed over held-out points.
    Returns ``(best_lambda, cv_table)`` with ties going to the larger
    lam.
    """
    if K < 2:
        raise ValidationError("K must be >= 2")
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    if K > n:
        raise ValidationError("K cannot exceed the number of observations")
    if app.app == "fdp" and m is None:
        raise ValidationError("fdp requires trial counts m")
    lam_arr = np.asarray(lambdas, dtype=float)
    m_arr = None if m is None else np.broadcast_to(np.asarray(m, dtype=float), y.shape)
    idx = np.arange(n)
    table = np.zeros(lam_arr.shape[0])
    for r in range(K):
        held = idx[idx % K == r]
        kept = idx[idx % K != r]
        y_kept = y[kept]
        m_kept = None if m_arr is None else m_arr[kept]
        prev_beta = None
        fl_prev = None
        for j, lam in enumerate(lam_arr):
            spec = app.with_lam(lam)
            if app.app == "fdp":
                fl_fit = _ordinary_fit(spec, y_kept, m_kept, init=fl_prev, cfg=cfg)
                fl_prev = fl_fit.beta
                fit = _fit_app(spec, y_kept, m_kept, cfg, None, fl_init_fit=fl_fit)
            else:
                fit = _fit_app(spec, y_kept, m_kept, cfg, init=prev_beta)
            prev_beta = fit.beta
            pred = np.interp(held.astype(float), kept.astype(float), fit.beta)
            if app.app == "rfl":
                table[j] += float(np.sum(huber(y[held] - pred)))
            elif app.app == "qrtf":
                table[j] += float(np.sum(check_value(y[held] - pred, app.q)))
            else:
                table[j] += float(np.sum(
                    m_arr[held] * np.logaddexp(0.0, pred) - y[held] * pred))
    best = float(lam_arr[int(np.argmin(table))])
    return best, table


# ---------------------------------------------------------------------------
# Simulators


def _piecewise_levels(x, levels):
    cell = np.minimum((x * len(levels)).astype(int), len(levels) - 1)
    return np.asarray(levels, dtype=float)[cell]


def simulate(app: str, n: int, seed: int, m: Optional[int] = None) -> Dataset:
    """Seeded dataset for one of the three applications.

    rfl: piecewise-constant truth (levels on equal fifths) plus t_3
    noise.  qrtf: mean ``5 sin(2 pi x)`` with noise scale
    ``0.5 + exp(1.5 sin(4 pi x))``.  fdp: binomial counts with a
    piecewise-constant log-odds truth.  The generator is PCG64 with the
    given 64-bit seed, recorded in the metadata; the same seed
    reproduces the dataset bit for bit.
    """
    if app not in APPS:
        raise ValidationError(f"unknown application {app!r}")
    if n < 5:
        raise ValidationError("n must be at least 5")
    rng = np.random.Generator(np.random.PCG64(seed))
    meta = {"generator": "pcg64", "seed": int(seed), "n": int(n)}
    if app == "rfl":
        x = (np.arange(n) + 0.5) / n
        truth = _piecewise_levels(x, RFL_TRUE_LEVELS)
        y = truth + rng.standard_t(3, size=n)
        return Dataset(app, x, y, truth={"truth": truth}, meta=meta)
    if app == "qrtf":
        x = (np.arange(n) + 1.0) / n
        mean = 5.0 * np.sin(2.0 * np.pi * x)
        sigma = 0.5 + np.exp(1.5 * np.sin(4.0 * np.pi * x))
        y = mean + sigma * rng.standard_normal(n)
        return Dataset(app, x, y,
                       truth={"truth_mean": mean, "truth_sigma": sigma},
                       meta=meta)
    m_val = 25 if m is None else int(m)
    if m_val < 1:
        raise ValidationError("m must be a positive trial count")
    x = (np.arange(n) + 0.5) / n
    logodds = _piecewise_levels(x, FDP_TRUE_LEVELS)
    y = rng.binomial(m_val, expit(logodds), size=n).astype(float)
    meta["m"] = m_val
    return Dataset(app, x, y, m=np.full(n, float(m_val)),
                   truth={"truth_logodds": logodds}, meta=meta)
