"""Seeded synthetic landscapes and pruning families, plus resampling stability runs.

Every random draw comes from a :class:`~scalelaw.rng.SplitMix64` stream keyed by
``(seed, kind, grid indices, replicate)``, so a dataset is a pure function of
its inputs and is identical across platforms and execution orders.

Noise is multiplicative and median-one: ``error * exp(sigma * z)`` with ``z``
standard normal. This is a testing convention, not a model of real training
noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Literal, Sequence

import numpy as np

from . import forms
from .errors import DomainError, IllPosedError
from .fitting import FitConfig, _stats, fit_prune_joint, parallel_map, prune_report
from .forms import DenseMeasurement, DenseParams, PruneJointParams, PruneMeasurement
from .presets import get_preset
from .rng import SplitMix64

NoiseKind = Literal["none", "multiplicative-lognormal", "dip-injection"]

# fraction of each density ladder (densest end) that dip injection touches
DIP_FRACTION = 0.25


@dataclass(frozen=True)
class NoiseModel:
    """Measurement-noise convention for generated data.

    ``dip-injection`` applies the lognormal factor too when ``sigma > 0``, then
    lowers errors in the densest quarter of each curve by a factor
    ``1 - u`` with ``u ~ U[0, dip_depth]``.
    """

    kind: NoiseKind = "none"
    sigma: float = 0.0
    dip_depth: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("none", "multiplicative-lognormal", "dip-injection"):
            raise DomainError(f"unknown noise kind {self.kind!r}")
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise DomainError("sigma must be >= 0")
        if not 0 <= self.dip_depth <= 0.05:
            raise DomainError("dip_depth must lie in [0, 0.05]")

    @classmethod
    def lognormal(cls, sigma: float, seed: int = 0) -> "NoiseModel":
        return cls("multiplicative-lognormal", sigma=sigma, seed=seed)

    @classmethod
    def dips(cls, dip_depth: float, seed: int = 0, sigma: float = 0.0) -> "NoiseModel":
        return cls("dip-injection", sigma=sigma, dip_depth=dip_depth, seed=seed)

    def factor(self, rng: SplitMix64) -> float:
        if self.kind == "none" or self.sigma == 0.0:
            return 1.0
        return math.exp(self.sigma * rng.normal())

    def as_dict(self) -> dict:
        return {"kind": self.kind, "sigma": self.sigma, "dip_depth": self.dip_depth, "seed": self.seed}


def imp_ladder(steps: int = 40) -> list[float]:
    """Iterative-magnitude-pruning densities ``0.8**i`` for ``i = 0..steps``."""
    if steps < 0:
        raise DomainError("steps must be >= 0")
    return [0.8**i for i in range(steps + 1)]


def generate_dense_grid(
    truth: DenseParams,
    m_scales: Sequence[float],
    n_scales: Sequence[float],
    noise: NoiseModel = NoiseModel(),
    replicates: int = 1,
) -> list[DenseMeasurement]:
    """Sample the envelope on the ``m_scales x n_scales`` grid, row-major in ``m``.

    Noisy errors are clamped to ``eps0``; ``replicate`` is set only when more
    than one replicate is requested.
    """
    if replicates < 1:
        raise DomainError("replicates must be >= 1")
    forms._check_positive("m_scales", m_scales)
    forms._check_positive("n_scales", n_scales)
    out = []
    for rep in range(replicates):
        for i, m in enumerate(m_scales):
            for j, n in enumerate(n_scales):
                clean = forms.eval_dense_envelope(truth, m, n)
                rng = SplitMix64(noise.seed, "dense", i, j, rep)
                err = min(clean * noise.factor(rng), truth.eps0)
                out.append(DenseMeasurement(float(m), float(n), err, rep if replicates > 1 else None))
    return out


def preset_grid(name: str, noise: NoiseModel = NoiseModel(), replicates: int = 1) -> list[DenseMeasurement]:
    """Synthetic grid on a preset's published scale ladders."""
    preset = get_preset(name)
    return generate_dense_grid(preset.params, preset.m_scales, preset.n_scales, noise, replicates)


def _dipped_densities(densities: Sequence[float]) -> set[float]:
    ladder = sorted(set(densities), reverse=True)
    top = ladder[: max(1, math.ceil(DIP_FRACTION * len(ladder)))]
    return {d for d in top if d < 1.0}


def generate_prune_family(
    truth: PruneJointParams,
    eps_np_rule: Callable[[float, float, float], float],
    configs: Sequence[tuple[float, float, float]],
    densities: Sequence[float],
    noise: NoiseModel = NoiseModel(),
    replicates: int = 1,
) -> list[PruneMeasurement]:
    """Evaluate the joint pruning law over ``configs x densities``.

    ``configs`` holds ``(depth, width, n)`` triples and ``eps_np_rule`` maps
    each to its noiseless unpruned error. Every density, ``d = 1`` included, is
    drawn from the joint form, so noiseless families lie exactly in the model.
    The ``eps_np`` stored on each record is the rule's value times one noise
    draw per configuration and replicate, standing in for a measured unpruned
    error.
    """
    if replicates < 1:
        raise DomainError("replicates must be >= 1")
    forms._check_density(densities)
    dipped = _dipped_densities(densities) if noise.kind == "dip-injection" else set()
    out = []
    for rep in range(replicates):
        for ci, (l, w, n) in enumerate(configs):
            base = float(eps_np_rule(l, w, n))
            eps_np = min(base * noise.factor(SplitMix64(noise.seed, "prune-np", ci, rep)), truth.eps_up)
            for di, d in enumerate(densities):
                clean = forms.eval_prune_joint(base, l, w, d, n, truth)
                rng = SplitMix64(noise.seed, "prune", ci, di, rep)
                err = clean * noise.factor(rng)
                if d in dipped:
                    err *= 1.0 - noise.dip_depth * rng.uniform()
                out.append(PruneMeasurement(
                    float(l), float(w), float(d), float(n), min(err, truth.eps_up), eps_np,
                    replicate=rep if replicates > 1 else None,
                ))
    return out


# -- a CIFAR-like reference family --------------------------------------------

CIFAR_DEPTHS = (8, 14, 20, 26, 50, 98)
CIFAR_WIDTHS = tuple(2.0**i for i in range(-4, 3))
CIFAR_DATA = (1.0, 0.5, 0.25, 0.125)
# ground truth for the reference family; the unpruned errors follow the CIFAR10 preset
CIFAR_TRUTH = PruneJointParams(eps_up=0.9, gamma=1.5, p_prime=0.05, phi=0.9, psi=1.6)


def resnet_params(depth: float, width: float) -> float:
    """Parameter count proportional to ``l * w**2``, normalized to depth 20 at width 1."""
    return depth / 20.0 * width * width


def cifar_eps_np(depth: float, width: float, n: float) -> float:
    """Unpruned error from the CIFAR10 dense preset with ``m = resnet_params(l, w)``."""
    return forms.eval_dense_envelope(get_preset("CIFAR10").params, resnet_params(depth, width), n)


def cifar_configs(
    depths: Sequence[float] = CIFAR_DEPTHS,
    widths: Sequence[float] = CIFAR_WIDTHS,
    data: Sequence[float] = CIFAR_DATA,
) -> list[tuple[float, float, float]]:
    return [(float(l), float(w), float(n)) for l in depths for w in widths for n in data]


def cifar_like_family(
    noise: NoiseModel = NoiseModel(),
    replicates: int = 1,
    ladder_steps: int = 23,
    truth: PruneJointParams = CIFAR_TRUTH,
    configs: Sequence[tuple[float, float, float]] | None = None,
) -> list[PruneMeasurement]:
    """168 configurations (6 depths, 7 widths, 4 subsamples) on the IMP ladder."""
    return generate_prune_family(
        truth, cifar_eps_np, configs if configs is not None else cifar_configs(),
        imp_ladder(ladder_steps), noise, replicates,
    )


# -- stability experiments ----------------------------------------------------


@dataclass
class StabilityPoint:
    T: int
    mus: list[float]
    sigmas: list[float]
    failures: int = 0

    @property
    def mu_mean(self) -> float:
        return float(np.mean(self.mus))

    @property
    def mu_std(self) -> float:
        return float(np.std(self.mus))

    @property
    def sigma_mean(self) -> float:
        return float(np.mean(self.sigmas))

    @property
    def sigma_std(self) -> float:
        return float(np.std(self.sigmas))

    def as_dict(self) -> dict:
        return {
            "T": self.T,
            "mu_mean": self.mu_mean, "mu_std": self.mu_std,
            "sigma_mean": self.sigma_mean, "sigma_std": self.sigma_std,
            "repeats": len(self.mus), "failures": self.failures,
            "mus": list(self.mus), "sigmas": list(self.sigmas),
        }


@dataclass
class StabilityReport:
    mode: str
    points: list[StabilityPoint] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"mode": self.mode, "points": [p.as_dict() for p in self.points]}


def _units(data: Sequence[PruneMeasurement], mode: str) -> list[list[PruneMeasurement]]:
    if mode == "networks":
        return [[r] for r in data]
    if mode == "configurations":
        groups: dict[tuple, list] = {}
        for r in data:
            groups.setdefault(r.config, []).append(r)
        return list(groups.values())
    raise DomainError(f"mode must be 'networks' or 'configurations', got {mode!r}")


def stability_experiment(
    data: Sequence[PruneMeasurement],
    T: int | Sequence[int],
    mode: str = "configurations",
    repeats: int = 30,
    config: FitConfig = FitConfig(),
    max_retries: int = 10,
) -> StabilityReport:
    """Fit on random subsets of ``T`` units and score each fit on the full data.

    A unit is one measurement (``mode="networks"``) or one ``(l, w, n)``
    configuration with all its densities (``mode="configurations"``). Draws
    whose fit is ill-posed are redrawn up to ``max_retries`` times each and
    counted in ``failures``.
    """
    data = list(data)
    if repeats < 2:
        raise DomainError("repeats must be >= 2")
    units = _units(data, mode)
    sizes = [T] if isinstance(T, int) else list(T)
    report = StabilityReport(mode)
    for size in sizes:
        if not 1 <= size <= len(units):
            raise DomainError(f"T={size} outside 1..{len(units)} available units")

        def one(rep: int, size=size):
            failures = 0
            for attempt in range(max_retries + 1):
                rng = SplitMix64(config.seed, "stability", mode, size, rep, attempt)
                chosen = sorted(rng.sample(len(units), size))
                subset = [r for i in chosen for r in units[i]]
                sub_config = replace(config, seed=rng.next_u64())
                try:
                    fit = fit_prune_joint(subset, sub_config)
                except IllPosedError:
                    failures += 1
                    continue
                points, _ = prune_report(fit.params, data)
                mu, sigma = _stats(np.array([p.delta for p in points]))
                return mu, sigma, failures
            return None, None, failures

        outcomes = parallel_map(one, range(repeats), config.threads)
        done = [(m, s) for m, s, _ in outcomes if m is not None]
        if not done:
            raise IllPosedError(f"every draw at T={size} was ill-posed")
        report.points.append(StabilityPoint(
            size, [m for m, _ in done], [s for _, s in done], sum(f for *_, f in outcomes),
        ))
    return report
