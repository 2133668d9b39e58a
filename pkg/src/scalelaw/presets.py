"""Published fitted dense-law parameters for nine benchmarks.

Values are kept as the literal strings from the published table and parsed on
load, so the catalog can be audited digit-for-digit. Sizes are normalized: the
law expects ``m`` and ``n`` as fractions of each benchmark's full model and
training set. Vision entries fix ``eps0`` from the class count; language
entries carry a fitted ``eps0`` in cross-entropy units "as published".
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DomainError
from .forms import DenseParams


@dataclass(frozen=True)
class Preset:
    name: str
    params: DenseParams
    task: str
    units: str
    literal: dict[str, str]
    # log-spaced scale ladders of the published measurement grid, in normalized units
    m_scales: tuple[float, ...]
    n_scales: tuple[float, ...]

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "task": self.task,
            "units": self.units,
            "params": self.params.as_dict(),
            "literal": dict(self.literal),
            "m_scales": list(self.m_scales),
            "n_scales": list(self.n_scales),
        }


_FIELDS = ("alpha", "beta", "b", "c_inf", "eta")

# name: (alpha, beta, b, c_inf, eta, n_classes)
_VISION = {
    "ImageNet": ("0.75403879", "0.61131518", "0.75575083", "3.62934233", "18.50376969", 1000),
    "CIFAR10": ("0.655043783", "0.534102925", "5.87E-02", "7.14E-14", "19.7701518", 10),
    "CIFAR100": ("0.70403326", "0.50562759", "0.14727227", "0.70969734", "6.92618391", 100),
    "DTD": ("0.400319211", "1.16231333", "4.30E-05", "1.27E-09", "0.846839835", 47),
    "Aircraft": ("1.10233368", "0.831731092", "3.47E-03", "5.16E-10", "1.12529537", 100),
    "UCF101": ("0.933547255", "0.537578077", "4.68E-02", "1.16E-09", "2.98124532", 101),
}

# name: (alpha, beta, b, c_inf, eta, eps0)
_LANGUAGE = {
    "PTB": ("0.80962791", "0.34315027", "0.14690378", "4.99807364", "6.27494232", "6.09699692"),
    "WikiText-2": ("1.00822978", "0.21667458", "0.99145936", "8.23497095", "10.37612973", "6.21205331"),
    "WikiText-103": ("0.73505031", "0.55718887", "0.32914295", "9.03598661", "16.33563873", "6.59633058"),
}


def _ladder(base: float, ks: range) -> tuple[float, ...]:
    return tuple(base ** (-k) for k in ks)


# model scales 4^-k M and data scales 2^-k N of the published experiments
_GRIDS = {
    "ImageNet": (range(0, 7), range(0, 7)),
    "CIFAR10": (range(-3, 5), range(0, 6)),
    "CIFAR100": (range(-2, 5), range(0, 6)),
    "DTD": (range(-2, 5), range(0, 6)),
    "Aircraft": (range(-2, 5), range(0, 6)),
    "UCF101": (range(-2, 5), range(0, 6)),
    "PTB": (range(0, 7), range(0, 6)),
    "WikiText-2": (range(0, 7), range(0, 6)),
    "WikiText-103": (range(0, 7), range(0, 6)),
}


def _build() -> dict[str, Preset]:
    catalog: dict[str, Preset] = {}
    for name, row in _VISION.items():
        *vals, n_classes = row
        literal = dict(zip(_FIELDS, vals))
        params = DenseParams.for_classes(*(float(v) for v in vals), n_classes=n_classes)
        mk, nk = _GRIDS[name]
        catalog[name] = Preset(
            name, params, "image-classification", "top-1 error fraction", literal,
            _ladder(4.0, mk), _ladder(2.0, nk),
        )
    for name, row in _LANGUAGE.items():
        literal = dict(zip(_FIELDS + ("eps0",), row))
        a, be, b, c, eta, e0 = (float(v) for v in row)
        params = DenseParams(a, be, b, c, eta, e0, eps0_mode="free-parameter")
        mk, nk = _GRIDS[name]
        catalog[name] = Preset(
            name, params, "language-modeling", "cross-entropy (as published)", literal,
            _ladder(4.0, mk), _ladder(2.0, nk),
        )
    return catalog


PRESETS: dict[str, Preset] = _build()

_ALIASES = {"UFC101": "UCF101"}


def get_preset(name: str) -> Preset:
    """Case-insensitive lookup; ``UFC101`` (the table's spelling) maps to ``UCF101``."""
    key = _ALIASES.get(name, name)
    for candidate, preset in PRESETS.items():
        if candidate.lower() == key.lower():
            return preset
    raise DomainError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
