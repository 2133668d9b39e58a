"""Design queries on fitted laws: useful-size limits, compute-optimal pairs,
iso-error contours, and minimal pruned parameter counts.

Dense answers use closed forms where they exist and check themselves by plugging
the solution back in. Contours solve the full envelope numerically in ``log n``.
Pruning answers invert the joint law for the invariant ``m*`` and search
architectures for the cheapest one that reaches a target error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.optimize import brentq

from . import forms
from .errors import DomainError, InfeasibleError
from .forms import DenseParams, PruneJointParams

Kind = Literal["max_model", "max_data", "optimal_pair", "contour", "prune_config", "prune_envelope"]

# ratio core/eta below which the power-law region approximation is called valid
POWER_REGION_RATIO = 0.1


@dataclass
class DesignAnswer:
    kind: Kind
    values: dict
    achieved_error: float
    feasible: bool
    note: str = ""
    inputs: dict = field(default_factory=dict)
    formula: str = ""
    residuals: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "values": dict(self.values),
            "achieved_error": self.achieved_error,
            "feasible": self.feasible,
            "note": self.note,
            "inputs": dict(self.inputs),
            "formula": self.formula,
            "residuals": dict(self.residuals),
        }


def _power_region(params: DenseParams, m: float, n: float) -> tuple[float, bool]:
    ratio = float(forms.eval_dense_core(params, m, n)) / params.eta
    return ratio, ratio < POWER_REGION_RATIO


def _require_exponents(params: DenseParams) -> None:
    if params.alpha <= 0 or params.beta <= 0:
        raise DomainError("size-limit formulas need alpha > 0 and beta > 0")


def max_useful_model(params: DenseParams, n_lim: float, T: float) -> DesignAnswer:
    """Largest model worth training on ``n_lim`` data at data/model term ratio ``T``.

    Solves ``n_lim^-alpha / (b m^-beta) = T`` for ``m``.
    """
    _require_exponents(params)
    forms._check_positive("n_lim", n_lim)
    forms._check_positive("T", T)
    a, be, b = params.alpha, params.beta, params.b
    m = (b * T) ** (1.0 / be) * n_lim ** (a / be)
    t_back = n_lim ** (-a) / (b * m ** (-be))
    ratio, valid = _power_region(params, m, n_lim)
    return DesignAnswer(
        "max_model", {"m": m, "n": float(n_lim)}, float(forms.eval_dense_envelope(params, m, n_lim)), True,
        note="" if valid else "outside the power-law region: core/eta is not small",
        inputs={"n_lim": n_lim, "T": T, "params": params.as_dict()},
        formula="m_max = (b*T)^(1/beta) * n_lim^(alpha/beta)",
        residuals={"T_relative": t_back / T - 1.0, "core_over_eta": ratio, "power_region_valid": valid},
    )


def max_useful_data(params: DenseParams, m_lim: float, T: float) -> DesignAnswer:
    """Largest dataset worth collecting for model size ``m_lim`` at threshold ``T``.

    ``T`` is the same data-term to model-term ratio as in :func:`max_useful_model`;
    this solves ``n^-alpha / (b m_lim^-beta) = T`` for ``n``.
    """
    _require_exponents(params)
    forms._check_positive("m_lim", m_lim)
    forms._check_positive("T", T)
    a, be, b = params.alpha, params.beta, params.b
    n = (1.0 / (b * T)) ** (1.0 / a) * m_lim ** (be / a)
    t_back = n ** (-a) / (b * m_lim ** (-be))
    ratio, valid = _power_region(params, m_lim, n)
    return DesignAnswer(
        "max_data", {"m": float(m_lim), "n": n}, float(forms.eval_dense_envelope(params, m_lim, n)), True,
        note="" if valid else "outside the power-law region: core/eta is not small",
        inputs={"m_lim": m_lim, "T": T, "params": params.as_dict()},
        formula="n_max = (1/(b*T))^(1/alpha) * m_lim^(beta/alpha)",
        residuals={"T_relative": t_back / T - 1.0, "core_over_eta": ratio, "power_region_valid": valid},
    )


def optimal_compute_pair(params: DenseParams, c: float) -> DesignAnswer:
    """The ``(m, n)`` minimizing ``m * n`` on the power-law contour ``n^-alpha + b m^-beta = c``."""
    _require_exponents(params)
    if not (c > 0 and math.isfinite(c)):
        raise InfeasibleError(f"core level c must be positive, got {c!r}")
    a, be, b = params.alpha, params.beta, params.b
    n = ((1.0 + a / be) / c) ** (1.0 / a)
    m = (b * be / a * n**a) ** (1.0 / be)
    ratio_residual = (b * be / a) * n**a / m**be - 1.0
    contour_residual = (n ** (-a) + b * m ** (-be)) / c - 1.0
    return DesignAnswer(
        "optimal_pair", {"m": m, "n": n, "mn": m * n, "core": c + params.c_inf},
        float(forms.eval_dense_envelope(params, m, n)), True,
        inputs={"c": c, "params": params.as_dict()},
        formula="n = ((1+alpha/beta)/c)^(1/alpha); b*m^-beta = (alpha/beta)*n^-alpha",
        residuals={"ratio": ratio_residual, "contour_relative": contour_residual},
    )


def contour_n_on_core(params: DenseParams, c: float, m: float) -> float:
    """``n`` on the power-law contour ``n^-alpha + b m^-beta = c``; ``inf`` when unreachable."""
    rest = c - params.b * m ** (-params.beta)
    return rest ** (-1.0 / params.alpha) if rest > 0 else math.inf


def core_for_error(params: DenseParams, target: float) -> float:
    """Core value whose envelope equals ``target`` (the envelope inverted exactly)."""
    if not 0 < target < params.eps0:
        raise InfeasibleError(f"target {target!r} must lie strictly between 0 and eps0={params.eps0!r}")
    q = target / params.eps0
    return params.eta * q / math.sqrt((1.0 - q) * (1.0 + q))


@dataclass
class ContourResult:
    target: float
    points: list[tuple[float, float]]
    omitted: list[float]
    method: str
    note: str = ""
    max_relative_residual: float = 0.0

    def as_dict(self) -> dict:
        return {
            "kind": "contour",
            "target": self.target,
            "method": self.method,
            "points": [{"m": m, "n": n} for m, n in self.points],
            "omitted_m": list(self.omitted),
            "max_relative_residual": self.max_relative_residual,
            "note": self.note,
        }


def _solve_n(params: DenseParams, m: float, target: float, max_iter: int) -> float | None:
    def g(u):
        return float(forms.eval_dense_envelope(params, m, math.exp(u))) / target - 1.0

    # the envelope falls from eps0 (n -> 0) to its n -> inf floor at this m
    floor = float(forms._envelope(params.b * m ** (-params.beta) + params.c_inf, params.eta, params.eps0))
    if floor >= target:
        return None
    lo, hi = -1.0, 1.0
    while g(lo) <= 0:
        lo *= 2.0
        if lo < -1400:
            return None
    while g(hi) > 0:
        hi *= 2.0
        if hi > 1400:
            return None
    u = brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=max_iter)
    return math.exp(u)


def error_contour(
    params: DenseParams,
    target: float,
    m_range: tuple[float, float],
    points: int = 25,
    method: Literal["envelope", "power"] = "envelope",
    max_iter: int = 200,
) -> ContourResult:
    """Iso-error curve ``eps_hat(m, n) = target`` over a geometric sweep of ``m``.

    ``method="envelope"`` root-finds the full law in ``log n``. ``"power"`` is a
    fast path that replaces the envelope by its small-core approximation
    ``eps0 * core / eta``; it flags itself invalid when the core is not small.
    Model sizes whose ``n -> inf`` floor is still above ``target`` are omitted.
    """
    irreducible = forms.irreducible_error(params).exact
    if not irreducible < target < params.eps0:
        raise InfeasibleError(
            f"target {target!r} must lie strictly between the irreducible error "
            f"{irreducible!r} and eps0 {params.eps0!r}"
        )
    lo, hi = m_range
    forms._check_positive("m_range", m_range)
    if points < 1 or hi < lo:
        raise DomainError("m_range must be (low, high) with low <= high and points >= 1")
    ms = np.geomspace(lo, hi, points) if points > 1 else np.array([lo])
    found, omitted, worst = [], [], 0.0
    notes = []
    if method == "power":
        core = params.eta * target / params.eps0
        if core / params.eta >= POWER_REGION_RATIO:
            notes.append("power-region approximation is not valid at this target")
        for m in ms:
            n = contour_n_on_core(params, core - params.c_inf, float(m))
            if math.isinf(n):
                omitted.append(float(m))
            else:
                found.append((float(m), n))
    elif method == "envelope":
        for m in ms:
            n = _solve_n(params, float(m), target, max_iter)
            if n is None:
                omitted.append(float(m))
                continue
            found.append((float(m), n))
            worst = max(worst, abs(float(forms.eval_dense_envelope(params, m, n)) / target - 1.0))
    else:
        raise DomainError(f"unknown contour method {method!r}")
    if omitted:
        notes.append(f"{len(omitted)} model sizes cannot reach the target at any data size")
    return ContourResult(target, found, omitted, method, "; ".join(notes), worst)


# -- pruning design -----------------------------------------------------------


def invert_prune_for_mstar(eps_np: float, target: float, params: PruneJointParams) -> float:
    """Invariant value ``m*`` at which the joint law equals ``target``."""
    forms._check_positive("eps_np", eps_np)
    forms._check_plateaus(eps_np, params.eps_up)
    if not eps_np < target < params.eps_up:
        raise InfeasibleError(
            f"target {target!r} is outside the open interval (eps_np={eps_np!r}, eps_up={params.eps_up!r}); "
            "no finite positive m* reaches it"
        )
    g = 2.0 / params.gamma
    # r - 1 and K - r via expm1 keep the ratio accurate as target nears either plateau
    r_minus_1 = math.expm1(g * math.log(target / eps_np))
    r = r_minus_1 + 1.0
    k_minus_r = r * math.expm1(g * math.log(params.eps_up / target))
    mstar = params.p_prime * math.sqrt(k_minus_r / r_minus_1)
    if not (math.isfinite(mstar) and mstar > 0):
        raise InfeasibleError("m* is not finite at this target")
    return mstar


def resnet_count(depth: float, width: float, density: float) -> float:
    """Parameter count proportional to ``l * w**2 * d``."""
    return depth * width * width * density


class TableFamily:
    """Unpruned errors measured on a rectilinear (depth, width) grid.

    Between grid nodes ``log eps_np`` is interpolated bilinearly in
    ``(log l, log w)``; outside the grid the family is undefined.
    """

    def __init__(self, table: dict[tuple[float, float], float]):
        depths = sorted({k[0] for k in table})
        widths = sorted({k[1] for k in table})
        missing = [(l, w) for l in depths for w in widths if (l, w) not in table]
        if missing:
            raise DomainError(f"table is not a full grid; missing {missing[:3]}")
        forms._check_positive("eps_np", list(table.values()))
        self.depths, self.widths = depths, widths
        values = np.log([[table[(l, w)] for w in widths] for l in depths])
        self._interp = None
        if len(depths) > 1 and len(widths) > 1:
            self._interp = RegularGridInterpolator((np.log(depths), np.log(widths)), values)
        self._table = dict(table)

    @property
    def l_range(self) -> tuple[float, float]:
        return self.depths[0], self.depths[-1]

    @property
    def w_range(self) -> tuple[float, float]:
        return self.widths[0], self.widths[-1]

    def __call__(self, depth: float, width: float) -> float:
        if (depth, width) in self._table:
            return self._table[(depth, width)]
        if self._interp is None:
            raise DomainError("a single-row table only answers at its own nodes")
        if not (self.depths[0] <= depth <= self.depths[-1] and self.widths[0] <= width <= self.widths[-1]):
            raise DomainError(f"({depth}, {width}) is outside the measured grid")
        return float(np.exp(self._interp([[math.log(depth), math.log(width)]])[0]))


class DenseModelFamily:
    """Unpruned errors from a dense law, mapping ``(l, w)`` to a model size by ``size_rule``."""

    def __init__(self, params: DenseParams, n: float, size_rule: Callable[[float, float], float]):
        forms._check_positive("n", n)
        self.params, self.n, self.size_rule = params, n, size_rule

    def __call__(self, depth: float, width: float) -> float:
        return float(forms.eval_dense_envelope(self.params, self.size_rule(depth, width), self.n))


@dataclass(frozen=True)
class SearchDomain:
    """Where to look for architectures.

    With ``depths`` and ``widths`` given, exactly those values are enumerated.
    Otherwise a geometric ``grid x grid`` lattice spans ``l_range x w_range`` and
    is zoomed ``refine`` times around the best cell.
    """

    l_range: tuple[float, float] = (8.0, 98.0)
    w_range: tuple[float, float] = (2.0**-4, 4.0)
    grid: int = 25
    refine: int = 4
    depths: tuple[float, ...] | None = None
    widths: tuple[float, ...] | None = None

    @classmethod
    def discrete(cls, depths: Sequence[float], widths: Sequence[float]) -> "SearchDomain":
        return cls(depths=tuple(depths), widths=tuple(widths), refine=0)


def _candidate(family, params, eps_k, l, w, count_rule):
    try:
        eps_np = family(l, w)
    except DomainError:
        return None
    if eps_np >= params.eps_up:
        # flat law: density has no predicted effect, so the unpruned network is the answer
        return (count_rule(l, w, 1.0), l, w, 1.0, l**params.phi * w**params.psi, eps_np) if eps_np <= eps_k else None
    if eps_np >= eps_k:
        return None
    if eps_k >= params.eps_up:
        raise DomainError("eps_k is at or above eps_up; every density qualifies and no minimum exists")
    mstar = invert_prune_for_mstar(eps_np, eps_k, params)
    d = mstar / (l**params.phi * w**params.psi)
    if not 0 < d <= 1:
        return None
    return count_rule(l, w, d), l, w, d, mstar, eps_np


def _scan(family, params, eps_k, ls, ws, count_rule):
    best = None
    for l in ls:
        for w in ws:
            cand = _candidate(family, params, eps_k, float(l), float(w), count_rule)
            if cand is not None and (best is None or cand[0] < best[0]):
                best = cand
    return best


def prune_min_params(
    family: Callable[[float, float], float],
    params: PruneJointParams,
    eps_k: float,
    domain: SearchDomain = SearchDomain(),
    count_rule: Callable[[float, float, float], float] = resnet_count,
) -> DesignAnswer:
    """Cheapest ``(l, w, d)`` whose predicted error equals ``eps_k``.

    For every candidate architecture with ``eps_np(l, w) < eps_k`` the density
    follows from inverting the joint law; candidates that would need ``d > 1``
    cannot reach ``eps_k`` and are skipped rather than clamped. A flat law
    (``eps_up <= eps_np``) predicts no change from pruning, so such candidates
    stay unpruned.
    """
    if domain.depths is not None and domain.widths is not None:
        best = _scan(family, params, eps_k, domain.depths, domain.widths, count_rule)
    else:
        (l_lo, l_hi), (w_lo, w_hi) = domain.l_range, domain.w_range
        ls, ws = np.geomspace(l_lo, l_hi, domain.grid), np.geomspace(w_lo, w_hi, domain.grid)
        best = _scan(family, params, eps_k, ls, ws, count_rule)
        for _ in range(domain.refine if best is not None else 0):
            _, l0, w0, *_ = best
            fl, fw = (l_hi / l_lo) ** (1.0 / (domain.grid - 1)), (w_hi / w_lo) ** (1.0 / (domain.grid - 1))
            l_lo, l_hi = max(domain.l_range[0], l0 / fl), min(domain.l_range[1], l0 * fl)
            w_lo, w_hi = max(domain.w_range[0], w0 / fw), min(domain.w_range[1], w0 * fw)
            ls, ws = np.geomspace(l_lo, l_hi, domain.grid), np.geomspace(w_lo, w_hi, domain.grid)
            refined = _scan(family, params, eps_k, ls, ws, count_rule)
            if refined is not None and refined[0] < best[0]:
                best = refined
    inputs = {"eps_k": eps_k, "params": params.as_dict()}
    if best is None:
        raise InfeasibleError(f"no architecture in the search domain reaches eps_k={eps_k!r}")
    count, l, w, d, mstar, eps_np = best
    # a flat-law winner is unpruned and keeps its own error
    flat = eps_np >= params.eps_up
    achieved = float(eps_np if flat else forms.eval_prune_joint(eps_np, l, w, d, 1.0, params))
    return DesignAnswer(
        "prune_config",
        {"depth": l, "width_scale": w, "density": d, "m_star": mstar, "parameter_count": count, "eps_np": eps_np},
        achieved, True, inputs=inputs,
        formula="min l*w^2*d s.t. joint law(eps_np(l, w), l, w, d) = eps_k",
        residuals={"error_relative": achieved / eps_k - 1.0},
        note="flat law: pruning has no predicted effect" if flat else "",
    )


@dataclass
class EnvelopePoint:
    eps_k: float
    answer: DesignAnswer | None
    reason: str = ""

    def as_dict(self) -> dict:
        return {"eps_k": self.eps_k, "answer": self.answer.as_dict() if self.answer else None, "reason": self.reason}


def prune_min_param_envelope(
    family: Callable[[float, float], float],
    params: PruneJointParams,
    eps_grid: Sequence[float],
    domain: SearchDomain = SearchDomain(),
    count_rule: Callable[[float, float, float], float] = resnet_count,
) -> list[EnvelopePoint]:
    """Minimal parameter count at each error level; infeasible levels keep their reason."""
    out = []
    for eps_k in eps_grid:
        try:
            out.append(EnvelopePoint(float(eps_k), prune_min_params(family, params, eps_k, domain, count_rule)))
        except (InfeasibleError, DomainError) as exc:
            out.append(EnvelopePoint(float(eps_k), None, f"{exc.code}: {exc}"))
    return out
