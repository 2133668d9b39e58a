"""Closed-form error landscapes: dense (model size x data size) and pruned.

All evaluators are pure and vectorized: scalars in, float out; arrays in,
``ndarray`` out. Dense sizes ``m`` and ``n`` are in whatever units the
parameters were fitted in (the published presets use fractions of the full
model and dataset, so ``m = n = 1`` is the full-scale configuration).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, NamedTuple, Sequence

import numpy as np

from .errors import DomainError

Eps0Mode = Literal["fixed-from-classes", "free-parameter"]


def _check_positive(name: str, value) -> None:
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError(f"{name} must be positive and finite, got {value!r}")


def _check_density(d) -> None:
    arr = np.asarray(d, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0) or np.any(arr > 1):
        raise DomainError(f"density must lie in (0, 1], got {d!r}")


def _out(x):
    arr = np.asarray(x, dtype=float)
    return float(arr) if arr.ndim == 0 else arr


@dataclass(frozen=True)
class DenseParams:
    """Parameters of the dense envelope law (the data coefficient is fixed at 1).

    ``eps0`` is the random-guess error. In ``"fixed-from-classes"`` mode it must
    equal ``(n_classes - 1) / n_classes``; use :meth:`for_classes` to build it.
    """

    alpha: float
    beta: float
    b: float
    c_inf: float
    eta: float
    eps0: float
    eps0_mode: Eps0Mode = "free-parameter"
    n_classes: int | None = None

    def __post_init__(self):
        values = {
            "alpha": self.alpha,
            "beta": self.beta,
            "b": self.b,
            "c_inf": self.c_inf,
            "eta": self.eta,
            "eps0": self.eps0,
        }
        for name, v in values.items():
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite, got {v!r}")
        if self.alpha < 0 or self.beta < 0:
            raise DomainError("exponents alpha and beta must be >= 0")
        if self.b <= 0:
            raise DomainError(f"b must be > 0, got {self.b!r}")
        if self.c_inf < 0:
            raise DomainError(f"c_inf must be >= 0, got {self.c_inf!r}")
        if self.eta <= 0 or self.eps0 <= 0:
            raise DomainError("eta and eps0 must be > 0")
        if self.eps0_mode == "fixed-from-classes":
            if self.n_classes is None or self.n_classes < 2:
                raise DomainError("fixed-from-classes mode needs n_classes >= 2")
            expected = (self.n_classes - 1) / self.n_classes
            if abs(self.eps0 - expected) > 1e-15:
                raise DomainError(
                    f"eps0={self.eps0!r} does not match (N-1)/N={expected!r} for N={self.n_classes}"
                )
        elif self.eps0_mode != "free-parameter":
            raise DomainError(f"unknown eps0_mode {self.eps0_mode!r}")

    @classmethod
    def for_classes(cls, alpha, beta, b, c_inf, eta, n_classes: int) -> "DenseParams":
        return cls(
            alpha, beta, b, c_inf, eta,
            eps0=(n_classes - 1) / n_classes,
            eps0_mode="fixed-from-classes",
            n_classes=n_classes,
        )

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "b": self.b,
            "c_inf": self.c_inf,
            "eta": self.eta,
            "eps0": self.eps0,
            "eps0_mode": self.eps0_mode,
            "n_classes": self.n_classes,
        }


@dataclass(frozen=True)
class PruneParams:
    """Single-curve pruning law: high plateau ``eps_up``, slope ``gamma``, transition density ``p``."""

    eps_up: float
    gamma: float
    p: float

    def __post_init__(self):
        for name in ("eps_up", "gamma", "p"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be positive and finite, got {v!r}")

    def as_dict(self) -> dict:
        return {"eps_up": self.eps_up, "gamma": self.gamma, "p": self.p}


@dataclass(frozen=True)
class PruneJointParams:
    """Joint pruning law over depth, width, density and data size."""

    eps_up: float
    gamma: float
    p_prime: float
    phi: float
    psi: float

    def __post_init__(self):
        for name in ("eps_up", "gamma", "p_prime"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be positive and finite, got {v!r}")
        if not (math.isfinite(self.phi) and math.isfinite(self.psi)):
            raise DomainError("phi and psi must be finite")

    def as_dict(self) -> dict:
        return {
            "eps_up": self.eps_up,
            "gamma": self.gamma,
            "p_prime": self.p_prime,
            "phi": self.phi,
            "psi": self.psi,
        }


@dataclass(frozen=True)
class DenseMeasurement:
    m: float
    n: float
    error: float
    replicate: int | None = None
    error_std: float | None = field(default=None, compare=False)

    def __post_init__(self):
        _check_positive("m", self.m)
        _check_positive("n", self.n)
        _check_positive("error", self.error)

    @property
    def key(self) -> tuple[float, float]:
        return (self.m, self.n)


@dataclass(frozen=True)
class PruneMeasurement:
    """One pruned network: depth, width factor, density, data size and its error.

    ``eps_np`` is the error of the same configuration at density 1.
    """

    depth: float
    width: float
    density: float
    n: float
    error: float
    eps_np: float
    replicate: int | None = None
    error_std: float | None = field(default=None, compare=False)

    def __post_init__(self):
        _check_positive("depth", self.depth)
        _check_positive("width", self.width)
        _check_density(self.density)
        _check_positive("n", self.n)
        _check_positive("error", self.error)
        _check_positive("eps_np", self.eps_np)

    @property
    def config(self) -> tuple[float, float, float]:
        return (self.depth, self.width, self.n)

    @property
    def key(self) -> tuple[float, float, float, float]:
        return (self.depth, self.width, self.density, self.n)


# -- dense forms --------------------------------------------------------------


def _core(alpha, beta, b, c_inf, m, n):
    return n ** (-alpha) + b * m ** (-beta) + c_inf


def _envelope(core, eta, eps0):
    # eps0 * t / |t - i eta|, written so that t -> inf gives eps0 rather than nan
    with np.errstate(over="ignore", divide="ignore"):
        return eps0 / np.sqrt(1.0 + (eta / core) ** 2)


def eval_dense_core(params: DenseParams, m, n):
    """Saturating power law ``n^-alpha + b m^-beta + c_inf`` before the envelope."""
    _check_positive("m", m)
    _check_positive("n", n)
    m = np.asarray(m, dtype=float)
    n = np.asarray(n, dtype=float)
    return _out(_core(params.alpha, params.beta, params.b, params.c_inf, m, n))


def eval_dense_envelope(params: DenseParams, m, n):
    """Predicted error: the core law passed through the rational envelope.

    Equals the modulus of ``eps0 * t / (t - i*eta)`` where ``t`` is the core
    value, so it rises to ``eps0`` for tiny models or datasets and decays to
    ``eps0 * c_inf / sqrt(c_inf^2 + eta^2)`` at infinite scale.
    """
    core = eval_dense_core(params, m, n)
    return _out(_envelope(np.asarray(core), params.eta, params.eps0))


class IrreducibleError(NamedTuple):
    exact: float
    approx: float


def irreducible_error(params: DenseParams) -> IrreducibleError:
    """Large-scale floor of the envelope, and the first-order ``eps0*c_inf/eta`` approximation."""
    c, eta, e0 = params.c_inf, params.eta, params.eps0
    return IrreducibleError(exact=e0 * c / math.hypot(c, eta), approx=e0 * c / eta)


# -- pruning forms ------------------------------------------------------------


def _upper_pole(p, eps_np, eps_up, gamma):
    return p * (eps_up / eps_np) ** (1.0 / gamma)


def _rational(x, eps_np, eps_up, gamma, p):
    a = _upper_pole(p, eps_np, eps_up, gamma)
    return eps_np * ((x * x + a * a) / (x * x + p * p)) ** (gamma / 2.0)


def _check_plateaus(eps_np, eps_up) -> None:
    _check_positive("eps_np", eps_np)
    if np.any(np.asarray(eps_np, dtype=float) > eps_up):
        raise DomainError(f"eps_up={eps_up!r} is below eps_np; plateaus are inverted")


def eval_prune_single(eps_np, d, params: PruneParams):
    """Error of one network pruned to density ``d`` given its unpruned error ``eps_np``."""
    _check_density(d)
    _check_plateaus(eps_np, params.eps_up)
    d = np.asarray(d, dtype=float)
    eps_np = np.asarray(eps_np, dtype=float)
    return _out(_rational(d, eps_np, params.eps_up, params.gamma, params.p))


def eval_prune_single_complex(eps_np, d, params: PruneParams):
    """Same quantity as :func:`eval_prune_single`, via ``|(d - jA)/(d - jp)|^gamma``."""
    _check_density(d)
    _check_plateaus(eps_np, params.eps_up)
    d = np.asarray(d, dtype=float)
    eps_np = np.asarray(eps_np, dtype=float)
    a = _upper_pole(params.p, eps_np, params.eps_up, params.gamma)
    ratio = (d - 1j * a) / (d - 1j * params.p)
    return _out(eps_np * np.abs(ratio) ** params.gamma)


def invariant_mstar(l, w, d, phi, psi):
    """Error-preserving invariant ``l^phi * w^psi * d``."""
    _check_positive("depth", l)
    _check_positive("width", w)
    _check_density(d)
    l = np.asarray(l, dtype=float)
    w = np.asarray(w, dtype=float)
    d = np.asarray(d, dtype=float)
    return _out(l**phi * w**psi * d)


def eval_prune_joint(eps_np, l, w, d, n, params: PruneJointParams):
    """Joint pruning law; depends on depth, width and density only through ``m*``.

    ``n`` enters only via ``eps_np`` and is validated but otherwise unused.
    """
    _check_positive("n", n)
    _check_plateaus(eps_np, params.eps_up)
    x = np.asarray(invariant_mstar(l, w, d, params.phi, params.psi))
    eps_np = np.asarray(eps_np, dtype=float)
    return _out(_rational(x, eps_np, params.eps_up, params.gamma, params.p_prime))


def eval_dense_adapted_density(b_x, beta_x, eps_np, d):
    """Dense-law transition shape rewritten in density, pinned to ``eps_np`` at ``d = 1``."""
    _check_positive("b_x", b_x)
    _check_density(d)
    d = np.asarray(d, dtype=float)
    return _out(b_x * d ** (-beta_x) + eps_np - b_x)


def eval_prune_lower_transition(eps_np, d, params: PruneParams):
    """Pruning law with the high-error plateau dropped (valid for ``d >> p``)."""
    _check_density(d)
    _check_plateaus(eps_np, params.eps_up)
    d = np.asarray(d, dtype=float)
    eps_np = np.asarray(eps_np, dtype=float)
    a = _upper_pole(params.p, eps_np, params.eps_up, params.gamma)
    return _out(eps_np * ((d * d + a * a) / (d * d)) ** (params.gamma / 2.0))


# -- criteria checks ----------------------------------------------------------


@dataclass
class CriteriaReport:
    """Numeric checks of the limiting-behaviour criteria on a sampled grid."""

    random_guess_limit: bool
    irreducible_limit: bool
    monotone: bool
    finite: bool
    violations: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.random_guess_limit and self.irreducible_limit and self.monotone and self.finite


def _approaches(seq: np.ndarray, target: float, increasing: bool, rtol: float) -> bool:
    steps = np.diff(seq)
    ordered = np.all(steps >= -1e-15 * abs(target)) if increasing else np.all(steps <= 1e-15 * max(abs(target), seq[0]))
    scale = abs(target) if target != 0 else 1.0
    return bool(ordered and abs(seq[-1] - target) <= rtol * scale)


def validate_criteria(
    params: DenseParams,
    m_grid: Sequence[float],
    n_grid: Sequence[float],
    rtol: float = 1e-3,
) -> CriteriaReport:
    """Check random-guess limit, irreducible limit, monotonicity and finiteness.

    The limits are probed by walking outward from the grid's extreme scales by
    factors of ``10^12`` (up to ``10^96``) and requiring a monotone approach that
    ends within ``rtol`` of the limiting value.
    """
    m_grid = np.sort(np.asarray(m_grid, dtype=float))
    n_grid = np.sort(np.asarray(n_grid, dtype=float))
    if m_grid.size < 3 or n_grid.size < 3:
        raise DomainError("criteria checks need at least 3 grid points per axis")
    _check_positive("m grid", m_grid)
    _check_positive("n grid", n_grid)
    violations: list[str] = []
    M, N = np.meshgrid(m_grid, n_grid, indexing="ij")
    with np.errstate(all="ignore"):
        surface = eval_dense_envelope(params, M, N)
    finite = bool(np.all(np.isfinite(surface)))
    if not finite:
        violations.append("non-finite error on grid")
    tol = 1e-15 * params.eps0
    mono_m = bool(np.all(np.diff(surface, axis=0) <= tol))
    mono_n = bool(np.all(np.diff(surface, axis=1) <= tol))
    if not mono_m:
        violations.append("error increases with model size somewhere on the grid")
    if not mono_n:
        violations.append("error increases with data size somewhere on the grid")

    shrink = 10.0 ** (-12.0 * np.arange(9))
    rg_ok = True
    with np.errstate(all="ignore"):
        for n in n_grid:
            seq = eval_dense_envelope(params, m_grid[0] * shrink, np.full(shrink.shape, n))
            if not _approaches(seq, params.eps0, increasing=True, rtol=rtol):
                rg_ok = False
                violations.append(f"m -> 0 does not approach eps0 at n={n:g}")
                break
        for m in m_grid:
            seq = eval_dense_envelope(params, np.full(shrink.shape, m), n_grid[0] * shrink)
            if not _approaches(seq, params.eps0, increasing=True, rtol=rtol):
                rg_ok = False
                violations.append(f"n -> 0 does not approach eps0 at m={m:g}")
                break
        grow = 1.0 / shrink
        limit = irreducible_error(params).exact
        seq = eval_dense_envelope(params, m_grid[-1] * grow, n_grid[-1] * grow)
        floor_ok = _approaches(seq, limit, increasing=False, rtol=rtol)
        if limit == 0:
            floor_ok = bool(np.all(np.diff(seq) <= 0) and seq[-1] <= rtol * params.eps0)
    if not floor_ok:
        violations.append("large-scale limit does not approach the irreducible error")
    return CriteriaReport(
        random_guess_limit=rg_ok,
        irreducible_limit=bool(floor_ok),
        monotone=mono_m and mono_n,
        finite=finite,
        violations=violations,
    )
