"""Least-squares estimation of the dense and pruning laws from measurement tables.

Every fit minimizes the plain sum of squared relative divergences
``delta = (estimated - actual) / actual``. Positive parameters are optimized in
log-space (``theta = exp(u)``), the high-error plateau as ``max eps_np + exp(u)``,
and the architecture exponents ``phi``/``psi`` directly. Each restart starts
from a log-uniform draw inside the configured ranges and runs Levenberg-
Marquardt with an analytic Jacobian; a restart whose Jacobian is unusable falls
back to Nelder-Mead on the same objective. The best restart (lowest objective,
then lowest index) wins.
"""

from __future__ import annotations

import logging
import math
import os
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import leastsq, minimize

from . import forms
from .errors import DomainError, IllPosedError
from .forms import (
    DenseMeasurement,
    DenseParams,
    Eps0Mode,
    PruneJointParams,
    PruneMeasurement,
    PruneParams,
)
from .rng import SplitMix64

log = logging.getLogger(__name__)

DEFAULT_INIT_RANGES: dict[str, tuple[float, float]] = {
    "alpha": (0.1, 2.0),
    "beta": (0.1, 2.0),
    "b": (1e-6, 10.0),
    "c_inf": (1e-15, 10.0),
    "eta": (0.1, 100.0),
    "eps0": (0.5, 20.0),
    "gamma": (0.5, 4.0),
    # multiples of the largest unpruned error in the data
    "eps_up": (1.0, 10.0),
    "p": (1e-4, 1e2),
    "p_prime": (1e-4, 1e2),
    "phi": (0.1, 4.0),
    "psi": (0.1, 4.0),
}

# residuals are replaced by this when the model overflows during a trial step
_BIG = 1e10
# log-space ceiling; exp(700) ~ 1e304 is finite with headroom for products
_LOG_HUGE = 700.0


def thread_count() -> int:
    """Worker cap from ``SCALELAW_THREADS`` (default 1, i.e. serial)."""
    raw = os.environ.get("SCALELAW_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def parallel_map(fn: Callable, items: Iterable, threads: int | None = None) -> list:
    """Order-preserving map, threaded when more than one worker is allowed."""
    items = list(items)
    workers = threads or thread_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class FitConfig:
    """Knobs for every fit.

    ``eps0_mode`` only matters for dense fits: with ``"fixed-from-classes"``
    ``n_classes`` must be given and ``eps0`` is not estimated.
    ``fixed_exponents`` lists ``"phi"``/``"psi"`` to omit from joint pruning fits
    (an omitted exponent is held at 0).
    """

    restarts: int = 100
    seed: int = 0
    init_ranges: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    max_iterations: int = 500
    objective_tolerance: float = 1e-10
    eps0_mode: Eps0Mode = "free-parameter"
    n_classes: int | None = None
    fixed_exponents: frozenset[str] = frozenset()
    threads: int | None = None

    def __post_init__(self):
        if self.restarts < 1:
            raise DomainError("restarts must be >= 1")
        if self.max_iterations < 1:
            raise DomainError("max_iterations must be >= 1")
        for name, (lo, hi) in self.init_ranges.items():
            if not (0 < lo <= hi < math.inf):
                raise DomainError(f"init range for {name} must have positive finite endpoints")
        if self.eps0_mode == "fixed-from-classes" and (self.n_classes is None or self.n_classes < 2):
            raise DomainError("fixed-from-classes needs n_classes >= 2")
        bad = set(self.fixed_exponents) - {"phi", "psi"}
        if bad:
            raise DomainError(f"only phi/psi can be fixed, got {sorted(bad)}")
        object.__setattr__(self, "fixed_exponents", frozenset(self.fixed_exponents))

    def range_for(self, name: str) -> tuple[float, float]:
        return tuple(self.init_ranges.get(name, DEFAULT_INIT_RANGES[name]))

    @property
    def fixed_eps0(self) -> float | None:
        if self.eps0_mode == "fixed-from-classes":
            return (self.n_classes - 1) / self.n_classes
        return None


@dataclass
class PointResult:
    config: dict
    actual: float
    estimated: float
    delta: float

    def as_dict(self) -> dict:
        return {**self.config, "actual": self.actual, "estimated": self.estimated, "delta": self.delta}


@dataclass
class FitReport:
    """Outcome of a fit (or of a cross-validation, when ``folds`` is set).

    For a plain fit ``per_point`` holds the in-sample divergences of ``params``.
    For cross-validation it holds each point's held-out divergence, while
    ``params`` is the fit on the full dataset.
    """

    params: DenseParams | PruneParams | PruneJointParams
    mu: float
    sigma: float
    per_point: list[PointResult]
    objective: float
    restarts_summary: list[float]
    folds: list[tuple[float, float]] | None = None
    fold_interval: float | None = None
    warnings: list[str] = field(default_factory=list)
    converged: bool = True

    @property
    def deltas(self) -> np.ndarray:
        return np.array([p.delta for p in self.per_point])

    def as_dict(self) -> dict:
        out = {
            "params": self.params.as_dict(),
            "mu": self.mu,
            "sigma": self.sigma,
            "objective": self.objective,
            "n_points": len(self.per_point),
            "converged": self.converged,
            "warnings": list(self.warnings),
            "restarts_summary": list(self.restarts_summary),
            "per_point": [p.as_dict() for p in self.per_point],
        }
        if self.folds is not None:
            out["folds"] = [{"mu": m, "sigma": s} for m, s in self.folds]
            out["fold_interval"] = self.fold_interval
        return out


def divergence(estimated, actual):
    """Relative difference ``(estimated - actual) / actual``."""
    actual_arr = np.asarray(actual, dtype=float)
    if np.any(actual_arr <= 0) or not np.all(np.isfinite(actual_arr)):
        raise DomainError(f"actual error must be positive, got {actual!r}")
    est = np.asarray(estimated, dtype=float)
    out = (est - actual_arr) / actual_arr
    return float(out) if out.ndim == 0 else out


def _stats(deltas: np.ndarray) -> tuple[float, float]:
    if deltas.size == 0:
        return math.nan, math.nan
    mean = math.fsum(deltas) / deltas.size
    centered = deltas - mean
    return mean, math.sqrt(math.fsum(centered * centered) / deltas.size)


# -- problem definitions ------------------------------------------------------


class _Problem:
    names: tuple[str, ...]
    y: np.ndarray

    def predict(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def dlog_pred(self, u: np.ndarray, est: np.ndarray) -> np.ndarray:
        """Jacobian of ``log(estimate)`` with respect to ``u``."""
        raise NotImplementedError

    def init_point(self, rng: SplitMix64) -> np.ndarray:
        raise NotImplementedError

    def residuals(self, u: np.ndarray) -> np.ndarray:
        with np.errstate(all="ignore"):
            r = self.predict(u) / self.y - 1.0
        return np.where(np.isfinite(r), r, _BIG)

    def jacobian(self, u: np.ndarray) -> np.ndarray:
        with np.errstate(all="ignore"):
            est = self.predict(u)
            jac = (est / self.y)[:, None] * self.dlog_pred(u, est)
        return np.where(np.isfinite(jac), jac, 0.0)

    def objective(self, u: np.ndarray) -> float:
        r = self.residuals(u)
        # exactly rounded, so the value (and the restart ranking) never depends on array alignment
        return math.fsum(r * r)


def _log_uniform(rng: SplitMix64, lo: float, hi: float) -> float:
    a, b = math.log(lo), math.log(hi)
    return a + (b - a) * rng.uniform()


class _DenseProblem(_Problem):
    def __init__(self, m, n, y, config: FitConfig):
        self.m = np.asarray(m, dtype=float)
        self.n = np.asarray(n, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.log_m = np.log(self.m)
        self.log_n = np.log(self.n)
        self.eps0 = config.fixed_eps0
        self.names = ("alpha", "beta", "b", "c_inf", "eta") + (("eps0",) if self.eps0 is None else ())
        self.ranges = [config.range_for(k) for k in self.names]
        self.config = config

    def _unpack(self, u):
        with np.errstate(over="ignore"):
            th = np.exp(np.asarray(u, dtype=float))
        eps0 = th[5] if self.eps0 is None else self.eps0
        return th[0], th[1], th[2], th[3], th[4], eps0

    def predict(self, u):
        a, be, b, c, eta, e0 = self._unpack(u)
        return forms._envelope(forms._core(a, be, b, c, self.m, self.n), eta, e0)

    def dlog_pred(self, u, est):
        a, be, b, c, eta, _ = self._unpack(u)
        n_term = self.n ** (-a)
        m_term = self.m ** (-be)
        t = n_term + b * m_term + c
        share = eta * eta / (t * t + eta * eta)
        dlog_t = share / t
        cols = [
            dlog_t * (-a * self.log_n * n_term),
            dlog_t * (-be * self.log_m * b * m_term),
            dlog_t * (b * m_term),
            dlog_t * c,
            -share,
        ]
        if self.eps0 is None:
            cols.append(np.ones_like(t))
        return np.column_stack(cols)

    def init_point(self, rng):
        return np.array([_log_uniform(rng, *r) for r in self.ranges])

    def to_params(self, u) -> DenseParams:
        a, be, b, c, eta, e0 = (float(v) for v in self._unpack(u))
        if self.eps0 is None:
            return DenseParams(a, be, b, c, eta, e0, eps0_mode="free-parameter")
        return DenseParams.for_classes(a, be, b, c, eta, self.config.n_classes)


class _PruneProblem(_Problem):
    """Joint pruning law; the single-curve law is the case with both exponents held at 0."""

    def __init__(self, depth, width, density, eps_np, y, free_exponents: Sequence[str], config: FitConfig, single: bool):
        self.log_l = np.log(np.asarray(depth, dtype=float))
        self.log_w = np.log(np.asarray(width, dtype=float))
        self.d = np.asarray(density, dtype=float)
        self.eps_np = np.asarray(eps_np, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.base = float(self.eps_np.max())
        self.single = single
        self.free_exponents = tuple(free_exponents)
        pole = "p" if single else "p_prime"
        self.names = ("eps_up", "gamma", pole) + self.free_exponents
        self.ranges = [config.range_for(k) for k in self.names]

    def _unpack(self, u):
        # numpy scalars so overflow and underflow become inf/0 instead of raising
        with np.errstate(all="ignore"):
            eps_up = self.base + np.exp(np.float64(u[0]))
            gamma = np.exp(np.float64(u[1]))
            pole = np.exp(np.float64(u[2]))
        exps = {"phi": 0.0, "psi": 0.0}
        exps.update(zip(self.free_exponents, (float(v) for v in u[3:])))
        return eps_up, gamma, pole, exps["phi"], exps["psi"]

    def _x(self, phi, psi):
        if phi == 0.0 and psi == 0.0:
            return self.d
        return np.exp(phi * self.log_l + psi * self.log_w) * self.d

    def predict(self, u):
        eps_up, gamma, pole, phi, psi = self._unpack(u)
        with np.errstate(all="ignore"):
            return forms._rational(self._x(phi, psi), self.eps_np, eps_up, gamma, pole)

    def dlog_pred(self, u, est):
        eps_up, gamma, pole, phi, psi = self._unpack(u)
        x = self._x(phi, psi)
        log_k = np.log(eps_up / self.eps_np)
        a = pole * np.exp(log_k / gamma)
        x2, a2, p2 = x * x, a * a, pole * pole
        wa = a2 / (x2 + a2)
        wp = p2 / (x2 + p2)
        log_ratio = np.log((x2 + a2) / (x2 + p2))
        cols = [
            wa / eps_up * (eps_up - self.base),
            0.5 * gamma * log_ratio - wa * log_k,
            gamma * (wa - wp),
        ]
        dlog_x = gamma * ((1.0 - wa) - (1.0 - wp))
        for name in self.free_exponents:
            cols.append(dlog_x * (self.log_l if name == "phi" else self.log_w))
        return np.column_stack(cols)

    def init_point(self, rng):
        u = []
        for name, (lo, hi) in zip(self.names, self.ranges):
            if name == "eps_up":
                ratio = math.exp(_log_uniform(rng, lo, hi))
                # keep strictly above the largest unpruned error
                excess = max(self.base * (ratio - 1.0), 1e-9 * self.base)
                u.append(math.log(excess))
            elif name in ("phi", "psi"):
                u.append(math.exp(_log_uniform(rng, lo, hi)))
            else:
                u.append(_log_uniform(rng, lo, hi))
        return np.array(u)

    def to_params(self, u):
        eps_up, gamma, pole, phi, psi = (float(v) for v in self._unpack(u))
        if self.single:
            return PruneParams(eps_up, gamma, pole)
        return PruneJointParams(eps_up, gamma, pole, phi, psi)


# -- multi-start driver -------------------------------------------------------


@dataclass
class _RestartResult:
    index: int
    u: np.ndarray | None
    objective: float
    converged: bool
    method: str


def _lm(problem: _Problem, u0: np.ndarray, ftol: float, maxfev: int):
    """MINPACK Levenberg-Marquardt with column scaling and a small first step.

    ``factor=0.01`` bounds the initial step; larger steps from log-space starts
    tend to throw ``c_inf`` or ``b`` to overflow and into the flat random-guess basin.
    """
    # the covariance estimate MINPACK returns is unused and may overflow
    with np.errstate(all="ignore"):
        x, _cov, _info, _msg, ier = leastsq(
            problem.residuals, u0, Dfun=problem.jacobian, full_output=True,
            ftol=ftol, xtol=1e-15, gtol=0.0, maxfev=maxfev, factor=0.01,
        )
    return x, ier in (1, 2, 3, 4)


def _representable(problem: _Problem, u) -> bool:
    # overflow saturates the envelope without being a usable fit; underflow is fine where the
    # parameter may be 0 (c_inf, the exponents) and rejected by to_params where it may not
    if not (np.all(np.isfinite(u)) and np.all(u <= _LOG_HUGE)):
        return False
    try:
        problem.to_params(u)
    except DomainError:
        return False
    return True


def _simplex(problem: _Problem, u0: np.ndarray, config: FitConfig, index: int) -> _RestartResult:
    res = minimize(
        problem.objective,
        u0,
        method="Nelder-Mead",
        options={"maxiter": config.max_iterations * len(u0), "xatol": 1e-12, "fatol": 1e-16},
    )
    obj = problem.objective(res.x)
    if not math.isfinite(obj) or not _representable(problem, res.x):
        return _RestartResult(index, None, math.inf, False, "nelder-mead")
    return _RestartResult(index, res.x, obj, bool(res.success), "nelder-mead")


def _local_fit(problem: _Problem, u0: np.ndarray, config: FitConfig, index: int) -> _RestartResult:
    jac0 = problem.jacobian(u0)
    norms = np.linalg.norm(jac0, axis=0)
    # rank is judged after column scaling, which LM applies too; a tiny c_inf alone is not degenerate
    usable = bool(np.all(np.isfinite(jac0)) and np.all(norms > 0))
    usable = usable and np.linalg.matrix_rank(jac0 / norms) == jac0.shape[1]
    if usable:
        try:
            x, converged = _lm(problem, u0, config.objective_tolerance, config.max_iterations)
            obj = problem.objective(x)
            if math.isfinite(obj) and obj < _BIG and not _representable(problem, x):
                # LM ran a parameter off inside a saturated region; pin it at a large finite value,
                # which keeps that poor local minimum and its objective
                x = np.minimum(x, _LOG_HUGE)
                obj = problem.objective(x)
            if math.isfinite(obj) and obj < _BIG and _representable(problem, x):
                return _RestartResult(index, x, obj, converged, "lm")
            # the simplex is reserved for ill-conditioned starts; a start LM cannot use is spent
            return _RestartResult(index, None, math.inf, False, "lm-diverged")
        except (ValueError, TypeError, np.linalg.LinAlgError) as exc:
            log.debug("restart %d: LM failed (%s); falling back to simplex", index, exc)
    return _simplex(problem, u0, config, index)


def _restart_inits(problem: _Problem, config: FitConfig) -> list[np.ndarray]:
    return [problem.init_point(SplitMix64(config.seed, "restart", r)) for r in range(config.restarts)]


def _run_restarts(problem: _Problem, config: FitConfig) -> list[_RestartResult]:
    inits = _restart_inits(problem, config)
    return parallel_map(
        lambda item: _local_fit(problem, item[1], config, item[0]),
        list(enumerate(inits)),
        config.threads,
    )


def _best(results: list[_RestartResult]) -> _RestartResult:
    ok = [r for r in results if r.u is not None]
    if not ok:
        raise IllPosedError("every restart failed to produce a finite objective")
    return min(ok, key=lambda r: (r.objective, r.index))


def _polish(problem: _Problem, best: _RestartResult, config: FitConfig) -> _RestartResult:
    """Tighten the winning restart; only accepted if it lowers the objective."""
    try:
        x, converged = _lm(problem, best.u, 1e-15, config.max_iterations)
    except (ValueError, TypeError, np.linalg.LinAlgError):
        return best
    obj = problem.objective(x)
    if obj < best.objective and _representable(problem, x):
        return _RestartResult(best.index, x, obj, best.converged or converged, best.method)
    return best


def _solve(problem: _Problem, config: FitConfig):
    results = _run_restarts(problem, config)
    best = _polish(problem, _best(results), config)
    warnings = []
    if not best.converged:
        warnings.append("best restart stopped at the iteration cap before meeting the tolerance")
    summary = [r.objective for r in results]
    return best, summary, warnings


# -- dense --------------------------------------------------------------------


def _dense_arrays(data: Sequence[DenseMeasurement]):
    if not data:
        raise IllPosedError("empty dataset")
    m = np.array([r.m for r in data], dtype=float)
    n = np.array([r.n for r in data], dtype=float)
    y = np.array([r.error for r in data], dtype=float)
    return m, n, y


def check_dense_identifiable(data: Sequence[DenseMeasurement], config: FitConfig) -> None:
    """Raise :class:`IllPosedError` unless the distinct-point and per-axis minimums hold."""
    free = 5 if config.fixed_eps0 is not None else 6
    keys = {r.key for r in data}
    if len(keys) < free:
        raise IllPosedError(
            f"{len(keys)} distinct (m, n) points cannot identify {free} free parameters"
        )
    if len({k[0] for k in keys}) < 2 or len({k[1] for k in keys}) < 2:
        raise IllPosedError("need at least two distinct values on each of the m and n axes")


def dense_report(params: DenseParams, data: Sequence[DenseMeasurement]) -> tuple[list[PointResult], float]:
    m, n, y = _dense_arrays(data)
    est = np.asarray(forms.eval_dense_envelope(params, m, n), dtype=float)
    delta = np.asarray(divergence(est, y))
    points = [
        PointResult({"m": r.m, "n": r.n}, r.error, float(e), float(dl))
        for r, e, dl in zip(data, est, delta)
    ]
    return points, math.fsum(delta * delta)


def fit_dense(data: Sequence[DenseMeasurement], config: FitConfig = FitConfig()) -> FitReport:
    """Fit the dense envelope law to every record (replicates count as separate points)."""
    data = list(data)
    check_dense_identifiable(data, config)
    m, n, y = _dense_arrays(data)
    problem = _DenseProblem(m, n, y, config)
    best, summary, warnings = _solve(problem, config)
    params = problem.to_params(best.u)
    points, objective = dense_report(params, data)
    mu, sigma = _stats(np.array([p.delta for p in points]))
    return FitReport(params, mu, sigma, points, objective, summary, warnings=warnings, converged=best.converged)


# -- pruning ------------------------------------------------------------------


def _prune_arrays(data: Sequence[PruneMeasurement]):
    cols = np.array([(r.depth, r.width, r.density, r.eps_np, r.error) for r in data], dtype=float)
    return cols.T


def prune_report(params, data: Sequence[PruneMeasurement]) -> tuple[list[PointResult], float]:
    l, w, d, enp, y = _prune_arrays(data)
    if isinstance(params, PruneParams):
        est = np.asarray(forms.eval_prune_single(enp, d, params), dtype=float)
    else:
        ns = np.array([r.n for r in data], dtype=float)
        est = np.asarray(forms.eval_prune_joint(enp, l, w, d, ns, params), dtype=float)
    delta = np.asarray(divergence(est, y))
    points = [
        PointResult(
            {"depth": r.depth, "width_scale": r.width, "density": r.density, "n": r.n},
            r.error, float(e), float(dl),
        )
        for r, e, dl in zip(data, est, delta)
    ]
    return points, math.fsum(delta * delta)


def _flat(y: np.ndarray, eps_np: np.ndarray) -> bool:
    return bool(np.all(np.abs(y / eps_np - 1.0) <= 1e-12))


def fit_prune_single(
    curve: Sequence[PruneMeasurement],
    eps_np: float | None = None,
    config: FitConfig = FitConfig(),
) -> FitReport:
    """Fit ``(eps_up, gamma, p)`` to one density curve of a single configuration.

    ``eps_np`` defaults to the records' own unpruned error and is never fitted.
    """
    curve = list(curve)
    if not curve:
        raise IllPosedError("empty curve")
    if len({r.config for r in curve}) != 1:
        raise DomainError("single-curve fits need every record to share one (depth, width, n)")
    if eps_np is None:
        values = {r.eps_np for r in curve}
        if len(values) != 1:
            raise DomainError("records disagree on eps_np; pass it explicitly")
        eps_np = values.pop()
    if len({r.density for r in curve}) < 4:
        raise IllPosedError("a single-curve fit needs at least 4 distinct densities")
    curve = [replace(r, eps_np=eps_np) for r in curve]
    l, w, d, enp, y = _prune_arrays(curve)
    warnings = []
    if _flat(y, enp):
        warnings.append("degenerate fit: every error equals eps_np, so gamma and p are unidentifiable")
    problem = _PruneProblem(l, w, d, enp, y, (), config, single=True)
    best, summary, solve_warnings = _solve(problem, config)
    params = problem.to_params(best.u)
    points, objective = prune_report(params, curve)
    mu, sigma = _stats(np.array([p.delta for p in points]))
    return FitReport(params, mu, sigma, points, objective, summary,
                     warnings=warnings + solve_warnings, converged=best.converged)


def prune_axis_warnings(data: Sequence[PruneMeasurement], config: FitConfig) -> list[str]:
    warnings = []
    if "phi" not in config.fixed_exponents and len({r.depth for r in data}) < 2:
        warnings.append("single depth in data but phi is being estimated; it is confounded with p_prime")
    if "psi" not in config.fixed_exponents and len({r.width for r in data}) < 2:
        warnings.append("single width in data but psi is being estimated; it is confounded with p_prime")
    return warnings


def check_prune_identifiable(data: Sequence[PruneMeasurement], config: FitConfig) -> None:
    free = 3 + len({"phi", "psi"} - config.fixed_exponents)
    keys = {r.key for r in data}
    if len(keys) < free:
        raise IllPosedError(f"{len(keys)} distinct points cannot identify {free} free parameters")
    if len({r.density for r in data}) < 3:
        raise IllPosedError("need at least 3 distinct densities to resolve the density transition")


def fit_prune_joint(data: Sequence[PruneMeasurement], config: FitConfig = FitConfig()) -> FitReport:
    """Fit ``(eps_up, gamma, p_prime, phi, psi)`` shared across every configuration.

    Exponents listed in ``config.fixed_exponents`` are omitted (held at 0).
    """
    data = list(data)
    if not data:
        raise IllPosedError("empty dataset")
    check_prune_identifiable(data, config)
    warnings = prune_axis_warnings(data, config)
    l, w, d, enp, y = _prune_arrays(data)
    free = [e for e in ("phi", "psi") if e not in config.fixed_exponents]
    problem = _PruneProblem(l, w, d, enp, y, free, config, single=False)
    best, summary, solve_warnings = _solve(problem, config)
    params = problem.to_params(best.u)
    points, objective = prune_report(params, data)
    mu, sigma = _stats(np.array([p.delta for p in points]))
    return FitReport(params, mu, sigma, points, objective, summary,
                     warnings=warnings + solve_warnings, converged=best.converged)


# -- replicates and cross-validation ------------------------------------------


def average_replicates(data):
    """Collapse records sharing a configuration into their mean error.

    The sample standard deviation of the replicates is kept on ``error_std``
    (``None`` for configurations seen once). Pruning records also average
    ``eps_np``. Output order follows first appearance.
    """
    groups: dict[tuple, list] = defaultdict(list)
    for r in data:
        groups[r.key].append(r)
    out = []
    for recs in groups.values():
        if len(recs) == 1:
            out.append(recs[0])
            continue
        errors = np.array([r.error for r in recs])
        std = float(np.std(errors, ddof=1))
        if isinstance(recs[0], PruneMeasurement):
            eps_np = float(np.mean([r.eps_np for r in recs]))
            out.append(replace(recs[0], error=float(errors.mean()), eps_np=eps_np, replicate=None, error_std=std))
        else:
            out.append(replace(recs[0], error=float(errors.mean()), replicate=None, error_std=std))
    return out


def assign_folds(keys: Sequence[tuple], k: int, seed: int) -> dict[tuple, int]:
    """Shuffle distinct configuration keys with a seeded permutation, then deal round-robin."""
    distinct = sorted(set(keys))
    order = SplitMix64(seed, "folds").permutation(len(distinct))
    return {distinct[j]: pos % k for pos, j in enumerate(order)}


def _fit_any(data, config: FitConfig, model: str) -> FitReport:
    if model == "dense":
        return fit_dense(data, config)
    if model == "prune-joint":
        return fit_prune_joint(data, config)
    if model == "prune-single":
        return fit_prune_single(data, None, config)
    raise DomainError(f"unknown model {model!r}")


def _report_points(params, data):
    if isinstance(params, DenseParams):
        return dense_report(params, data)
    return prune_report(params, data)


def _infer_model(data) -> str:
    if all(isinstance(r, DenseMeasurement) for r in data):
        return "dense"
    if all(isinstance(r, PruneMeasurement) for r in data):
        return "prune-joint"
    raise DomainError("dataset mixes record types")


def cross_validate(data, k: int = 10, config: FitConfig = FitConfig(), model: str | None = None) -> FitReport:
    """k-fold cross-validation over distinct configurations.

    Every configuration's records are held out together. ``per_point`` carries
    the held-out divergences in input order; ``folds`` the per-fold (mu, sigma);
    ``fold_interval`` the std of the fold means (the +-1 std band).
    """
    data = list(data)
    model = model or _infer_model(data)
    if k < 2:
        raise IllPosedError("cross-validation needs k >= 2")
    keys = [r.key for r in data]
    if len(set(keys)) < k:
        raise IllPosedError(f"only {len(set(keys))} distinct configurations for {k} folds")
    fold_of = assign_folds(keys, k, config.seed)

    def run_fold(fold: int):
        train = [r for r in data if fold_of[r.key] != fold]
        test_idx = [i for i, r in enumerate(data) if fold_of[r.key] == fold]
        try:
            fit = _fit_any(train, config, model)
        except IllPosedError as exc:
            raise IllPosedError(f"fold {fold}: {exc}") from exc
        points, _ = _report_points(fit.params, [data[i] for i in test_idx])
        return test_idx, points, fit.warnings

    outcomes = parallel_map(run_fold, range(k), config.threads)
    held: list[PointResult | None] = [None] * len(data)
    fold_stats = []
    warnings: list[str] = []
    for fold, (idx, points, fold_warnings) in enumerate(outcomes):
        for i, pt in zip(idx, points):
            held[i] = pt
        fold_stats.append(_stats(np.array([p.delta for p in points])))
        warnings.extend(f"fold {fold}: {w}" for w in fold_warnings)
    full = _fit_any(data, config, model)
    per_point = [p for p in held if p is not None]
    deltas = np.array([p.delta for p in per_point])
    mu, sigma = _stats(deltas)
    fold_mus = np.array([f[0] for f in fold_stats])
    return FitReport(
        full.params, mu, sigma, per_point, math.fsum(deltas * deltas), full.restarts_summary,
        folds=fold_stats, fold_interval=float(np.std(fold_mus)),
        warnings=warnings + full.warnings, converged=full.converged,
    )
