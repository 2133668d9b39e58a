"""Corner-fit extrapolation: fit on small configurations, predict larger ones.

For dense data a corner ``(m_i, n_j)`` splits the grid into the fitted block
``m <= m_i, n <= n_j``, the predicted block ``m > m_i, n > n_j``, and the
excluded remainder (larger on one axis only). For pruning families the fitted
set is chosen by a predicate on ``(depth, width)`` and every configuration at
least as deep and as wide as the largest fitted one is predicted.

Each restart of the fit yields its own predictions. The reported band is the
standard deviation of those predictions over the restarts that reached the best
basin (objective within ``BASIN_RTOL`` of the best restart), so restarts stranded in
unrelated local minima do not masquerade as prediction uncertainty.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import forms
from .errors import IllPosedError, ScaleLawError
from .fitting import (
    FitConfig,
    PointResult,
    _best,
    _DenseProblem,
    _polish,
    _PruneProblem,
    _run_restarts,
    _stats,
    check_dense_identifiable,
    check_prune_identifiable,
    divergence,
    prune_axis_warnings,
)
from .forms import DenseMeasurement, PruneMeasurement

# restarts whose objective is within this relative margin of the best count toward the band
BASIN_RTOL = 1e-2


@dataclass
class ExtrapolationReport:
    corner: dict
    fitted_points: int
    predicted_points: int
    excluded_points: int
    mu: float
    sigma: float
    band: list[float]
    mean_prediction: list[float]
    per_point: list[PointResult]
    params: object
    band_restarts: int
    warnings: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "corner": dict(self.corner),
            "fitted_points": self.fitted_points,
            "predicted_points": self.predicted_points,
            "excluded_points": self.excluded_points,
            "mu": self.mu,
            "sigma": self.sigma,
            "band_restarts": self.band_restarts,
            "params": self.params.as_dict(),
            "warnings": list(self.warnings),
            "per_point": [
                {**p.as_dict(), "mean_prediction": mp, "band": b}
                for p, mp, b in zip(self.per_point, self.mean_prediction, self.band)
            ],
        }


def _basin(results, best_objective: float):
    limit = best_objective * (1.0 + BASIN_RTOL) + 1e-12
    return [r for r in results if r.u is not None and r.objective <= limit]


def _run(problem, config: FitConfig, predict: Callable, targets: Sequence, actual: np.ndarray):
    results = _run_restarts(problem, config)
    raw = _best(results)
    best = _polish(problem, raw, config)
    params = problem.to_params(best.u)
    est = np.asarray(predict(params), dtype=float)
    # measured against the unpolished winner so the basin always holds at least that restart
    basin = _basin(results, raw.objective)
    spread = np.array([predict(problem.to_params(r.u)) for r in basin], dtype=float).reshape(len(basin), -1)
    band = spread.std(axis=0) if len(targets) else np.zeros(0)
    mean = spread.mean(axis=0) if len(targets) else np.zeros(0)
    delta = np.asarray(divergence(est, actual)) if len(targets) else np.zeros(0)
    warnings = [] if best.converged else ["best restart stopped at the iteration cap"]
    return params, est, delta, band, mean, len(basin), warnings


def partition_dense(data: Sequence[DenseMeasurement], corner: tuple[float, float]):
    """Split records into (fitted, predicted, excluded) lists for a corner."""
    m_i, n_j = corner
    fitted, predicted, excluded = [], [], []
    for r in data:
        if r.m <= m_i and r.n <= n_j:
            fitted.append(r)
        elif r.m > m_i and r.n > n_j:
            predicted.append(r)
        else:
            excluded.append(r)
    return fitted, predicted, excluded


def extrapolate_dense(
    data: Sequence[DenseMeasurement],
    corner: tuple[float, float],
    config: FitConfig = FitConfig(),
) -> ExtrapolationReport:
    """Fit on the block below ``corner`` and score predictions strictly beyond it."""
    fitted, predicted, excluded = partition_dense(list(data), corner)
    check_dense_identifiable(fitted, config)
    problem = _DenseProblem(
        [r.m for r in fitted], [r.n for r in fitted], [r.error for r in fitted], config,
    )
    m = np.array([r.m for r in predicted], dtype=float)
    n = np.array([r.n for r in predicted], dtype=float)
    actual = np.array([r.error for r in predicted], dtype=float)
    params, est, delta, band, mean, basin, warnings = _run(
        problem, config, lambda p: forms.eval_dense_envelope(p, m, n), predicted, actual,
    )
    points = [
        PointResult({"m": r.m, "n": r.n}, r.error, float(e), float(dl))
        for r, e, dl in zip(predicted, est, delta)
    ]
    if not predicted:
        warnings.append("no configuration is larger than the corner on both axes")
    mu, sigma = _stats(delta)
    return ExtrapolationReport(
        {"m": float(corner[0]), "n": float(corner[1])}, len(fitted), len(predicted), len(excluded),
        mu, sigma, band.tolist(), mean.tolist(), points, params, basin, warnings,
    )


@dataclass
class SweepEntry:
    i: int
    j: int
    corner: tuple[float, float]
    report: ExtrapolationReport | None
    reason: str | None = None

    @property
    def ok(self) -> bool:
        return self.report is not None


def interior_corners(data: Sequence[DenseMeasurement]) -> list[tuple[int, int, tuple[float, float]]]:
    """Every grid corner that leaves at least one larger value on both axes."""
    ms = sorted({r.m for r in data})
    ns = sorted({r.n for r in data})
    return [(i, j, (ms[i], ns[j])) for i in range(len(ms) - 1) for j in range(len(ns) - 1)]


def extrapolation_sweep(
    data: Sequence[DenseMeasurement],
    corners: Sequence[tuple[float, float]] | None = None,
    config: FitConfig = FitConfig(),
) -> list[SweepEntry]:
    """One extrapolation per corner; failures are kept in place with their reason.

    Without explicit ``corners`` every interior corner of the grid is used,
    indexed by its position on the sorted m and n ladders.
    """
    data = list(data)
    if corners is None:
        plan = interior_corners(data)
    else:
        ms = sorted({r.m for r in data})
        ns = sorted({r.n for r in data})
        plan = [
            (ms.index(c[0]) if c[0] in ms else -1, ns.index(c[1]) if c[1] in ns else -1, tuple(c))
            for c in corners
        ]
    entries = []
    for i, j, corner in plan:
        try:
            entries.append(SweepEntry(i, j, corner, extrapolate_dense(data, corner, config)))
        except ScaleLawError as exc:
            entries.append(SweepEntry(i, j, corner, None, f"{exc.code}: {exc}"))
    return entries


def sweep_table(entries: Sequence[SweepEntry]) -> str:
    """Plot-ready CSV with one row per corner."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["i", "j", "corner_m", "corner_n", "status", "fitted", "predicted", "mu", "sigma", "reason"])
    for e in entries:
        if e.ok:
            r = e.report
            writer.writerow([e.i, e.j, repr(e.corner[0]), repr(e.corner[1]), "ok",
                             r.fitted_points, r.predicted_points, repr(r.mu), repr(r.sigma), ""])
        else:
            writer.writerow([e.i, e.j, repr(e.corner[0]), repr(e.corner[1]), "skipped",
                             "", "", "", "", e.reason])
    return buf.getvalue()


def partition_prune(
    data: Sequence[PruneMeasurement],
    subset: Callable[[float, float], bool],
):
    """Split records by ``subset(depth, width)``; predict those at least as deep and wide."""
    fitted = [r for r in data if subset(r.depth, r.width)]
    if not fitted:
        return [], [], list(data)
    l_max = max(r.depth for r in fitted)
    w_max = max(r.width for r in fitted)
    predicted, excluded = [], []
    for r in data:
        if subset(r.depth, r.width):
            continue
        if r.depth >= l_max and r.width >= w_max:
            predicted.append(r)
        else:
            excluded.append(r)
    return fitted, predicted, excluded


def extrapolate_prune(
    data: Sequence[PruneMeasurement],
    subset: Callable[[float, float], bool],
    config: FitConfig = FitConfig(),
) -> ExtrapolationReport:
    """Joint pruning fit on ``subset`` architectures, predicting larger ones at every density."""
    fitted, predicted, excluded = partition_prune(list(data), subset)
    if not fitted:
        raise IllPosedError("the subset selects no records")
    check_prune_identifiable(fitted, config)
    warnings = prune_axis_warnings(fitted, config)
    l, w, d, enp, y = (np.array(c, dtype=float) for c in zip(
        *[(r.depth, r.width, r.density, r.eps_np, r.error) for r in fitted]))
    free = [e for e in ("phi", "psi") if e not in config.fixed_exponents]
    problem = _PruneProblem(l, w, d, enp, y, free, config, single=False)
    cols = np.array([(r.depth, r.width, r.density, r.eps_np, r.n) for r in predicted], dtype=float).reshape(-1, 5)
    actual = np.array([r.error for r in predicted], dtype=float)

    def predict(params):
        if not len(cols):
            return np.zeros(0)
        return forms.eval_prune_joint(cols[:, 3], cols[:, 0], cols[:, 1], cols[:, 2], cols[:, 4], params)

    params, est, delta, band, mean, basin, run_warnings = _run(problem, config, predict, predicted, actual)
    points = [
        PointResult({"depth": r.depth, "width_scale": r.width, "density": r.density, "n": r.n},
                    r.error, float(e), float(dl))
        for r, e, dl in zip(predicted, est, delta)
    ]
    mu, sigma = _stats(delta)
    corner = {
        "max_fitted_depth": max(r.depth for r in fitted),
        "max_fitted_width": max(r.width for r in fitted),
    }
    return ExtrapolationReport(
        corner, len(fitted), len(predicted), len(excluded), mu, sigma,
        band.tolist(), mean.tolist(), points, params, basin, warnings + run_warnings,
    )
