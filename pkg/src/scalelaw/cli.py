"""Command-line front end: ``scalelaw <command> ...``.

Every command builds one JSON report. With ``--out DIR`` the report is written
to ``DIR/report.json`` next to any plot tables; otherwise it goes to stdout.
Errors print as ``<code>: <message>`` on stderr and exit with 2 (bad input),
3 (ill-posed fit) or 4 (infeasible design query).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path
from typing import Sequence

from . import design, extrapolation, fitting, io, synthetic
from .errors import DomainError, ParseError, ScaleLawError
from .fitting import FitConfig
from .forms import DenseParams, PruneJointParams
from .presets import PRESETS, get_preset

log = logging.getLogger("scalelaw")


class UsageError(ScaleLawError):
    code = "usage"
    exit_code = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _eps0(text: str) -> tuple[str, int | None]:
    if text == "free":
        return "free-parameter", None
    if text.startswith("fixed:"):
        try:
            return "fixed-from-classes", int(text[6:])
        except ValueError:
            pass
    raise argparse.ArgumentTypeError("expected 'free' or 'fixed:<classes>'")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="root seed for every random draw")
    p.add_argument("--restarts", type=int, default=100)
    p.add_argument("--out", type=Path, help="directory for report.json and plot tables")
    p.add_argument("--format", choices=("json", "csv"), default="json", help="stdout format when --out is absent")


def _fit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eps0", type=_eps0, default=("free-parameter", None), help="free | fixed:<classes>")
    p.add_argument("--fix-phi", action="store_true", help="omit the depth exponent (single depth)")
    p.add_argument("--fix-psi", action="store_true", help="omit the width exponent (single width)")


def _params_source(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", help="preset name, see `scalelaw presets`")
    src.add_argument("--params", type=Path, help="JSON file with dense params (or a fit-dense report)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="scalelaw", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("presets", help="list the published parameter catalog")
    _common(p)

    for name, help_ in (
        ("fit-dense", "fit the dense law to a m,n,error table"),
        ("fit-prune", "fit the single-curve pruning law to one configuration"),
        ("fit-prune-joint", "fit the joint pruning law across configurations"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("data", type=Path)
        _common(p)
        _fit_flags(p)
        if name == "fit-prune":
            p.add_argument("--eps-np", type=float, help="unpruned error (defaults to the file's)")
        if name != "fit-dense":
            p.add_argument("--average-replicates", action="store_true")

    p = sub.add_parser("cv", help="k-fold cross-validation")
    p.add_argument("data", type=Path)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--model", choices=("dense", "prune-joint"), default="dense")
    _common(p)
    _fit_flags(p)

    p = sub.add_parser("extrapolate", help="fit small configurations, predict larger ones")
    p.add_argument("data", type=Path)
    p.add_argument("--corner-m", type=float)
    p.add_argument("--corner-n", type=float)
    p.add_argument("--sweep", action="store_true", help="every interior corner of a dense grid")
    p.add_argument("--prune", action="store_true", help="data is a pruning table")
    p.add_argument("--max-depth", type=float, help="pruning: fit depths <= this")
    p.add_argument("--max-width", type=float, help="pruning: fit widths <= this")
    _common(p)
    _fit_flags(p)

    p = sub.add_parser("design", help="design queries on fitted laws")
    dsub = p.add_subparsers(dest="query", required=True, parser_class=_Parser)
    q = dsub.add_parser("max-model")
    _params_source(q)
    q.add_argument("--n-lim", type=float, required=True)
    q.add_argument("--T", type=float, required=True)
    q = dsub.add_parser("max-data")
    _params_source(q)
    q.add_argument("--m-lim", type=float, required=True)
    q.add_argument("--T", type=float, required=True)
    q = dsub.add_parser("optimal-pair")
    _params_source(q)
    q.add_argument("--c", type=float, required=True, help="power-law core level")
    q = dsub.add_parser("contour")
    _params_source(q)
    q.add_argument("--target", type=float, required=True)
    q.add_argument("--m-min", type=float, required=True)
    q.add_argument("--m-max", type=float, required=True)
    q.add_argument("--points", type=int, default=25)
    q.add_argument("--method", choices=("envelope", "power"), default="envelope")
    q = dsub.add_parser("prune-min")
    q.add_argument("--params", type=Path, required=True, help="JSON with joint pruning params (or a fit report)")
    q.add_argument("--table", type=Path, required=True, help="pruning CSV; its d=1 rows define eps_np(l, w)")
    q.add_argument("--n", type=float, help="data size to use from the table (default: the largest)")
    q.add_argument("--eps-k", type=_floats, required=True, help="target error(s), comma-separated")
    for q in dsub.choices.values():
        _common(q)

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    p.add_argument("--preset", help="dense grid on this preset's published scales")
    p.add_argument("--family", choices=("cifar-like",), help="pruning family")
    p.add_argument("--sigma", type=float, default=0.0, help="lognormal relative noise")
    p.add_argument("--dip-depth", type=float, default=0.0)
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--ladder-steps", type=int, default=23)
    _common(p)

    p = sub.add_parser("stability", help="resampling stability of the joint pruning fit")
    p.add_argument("data", type=Path)
    p.add_argument("--T", type=_ints, required=True, help="sample sizes, comma-separated")
    p.add_argument("--mode", choices=("networks", "configurations"), default="configurations")
    p.add_argument("--repeats", type=int, default=30)
    _common(p)
    _fit_flags(p)
    return parser


def _config(args) -> FitConfig:
    mode, classes = getattr(args, "eps0", ("free-parameter", None))
    fixed = set()
    if getattr(args, "fix_phi", False):
        fixed.add("phi")
    if getattr(args, "fix_psi", False):
        fixed.add("psi")
    return FitConfig(restarts=args.restarts, seed=args.seed, eps0_mode=mode, n_classes=classes,
                     fixed_exponents=frozenset(fixed))


def _load_json(path: Path) -> dict:
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not JSON: {exc}") from exc
    return doc.get("params", doc) if isinstance(doc, dict) else {}


def _dense_params(args) -> DenseParams:
    if args.preset:
        return get_preset(args.preset).params
    doc = _load_json(args.params)
    try:
        return DenseParams(**{k: doc[k] for k in ("alpha", "beta", "b", "c_inf", "eta", "eps0")},
                           eps0_mode=doc.get("eps0_mode", "free-parameter"), n_classes=doc.get("n_classes"))
    except (KeyError, TypeError) as exc:
        raise ParseError(f"{args.params} lacks dense parameter {exc}") from exc


def _joint_params(path: Path) -> PruneJointParams:
    doc = _load_json(path)
    try:
        return PruneJointParams(**{k: doc[k] for k in ("eps_up", "gamma", "p_prime", "phi", "psi")})
    except (KeyError, TypeError) as exc:
        raise ParseError(f"{path} lacks joint pruning parameter {exc}") from exc


class _Output:
    def __init__(self, args):
        self.args = args
        self.tables: dict[str, str] = {}
        self.stdout_csv: str | None = None

    def table(self, name: str, text: str, primary: bool = False) -> None:
        self.tables[name] = text
        if primary:
            self.stdout_csv = text

    def finish(self, command: str, payload: dict) -> None:
        text = io.report_json(command, payload)
        out = self.args.out
        if out is not None:
            for name, table in self.tables.items():
                io.atomic_write_text(Path(out) / name, table)
            io.atomic_write_text(Path(out) / "report.json", text)
            print(f"wrote {Path(out) / 'report.json'}")
        elif self.args.format == "csv" and self.stdout_csv is not None:
            sys.stdout.write(self.stdout_csv)
        else:
            sys.stdout.write(text)


def _cmd_presets(args, out: _Output):
    rows = []
    for preset in PRESETS.values():
        lit = preset.literal
        rows.append((preset.name, preset.task, lit["alpha"], lit["beta"], lit["b"], lit["c_inf"], lit["eta"],
                     lit.get("eps0", repr(preset.params.eps0)), preset.params.eps0_mode,
                     preset.params.n_classes or ""))
    out.table("presets.csv", io.table_csv(
        ("name", "task", "alpha", "beta", "b", "c_inf", "eta", "eps0", "eps0_mode", "n_classes"), rows,
    ), primary=True)
    return {"presets": [p.as_dict() for p in PRESETS.values()]}


def _cmd_fit_dense(args, out):
    data = io.load_dense_csv(args.data)
    report = fitting.fit_dense(data, _config(args))
    out.table("landscape.csv", io.landscape_csv(report.per_point), primary=True)
    return report.as_dict()


def _load_prune(args):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", io.LadderWarning)
        data = io.load_prune_csv(args.data)
    notes = [str(w.message) for w in caught if issubclass(w.category, io.LadderWarning)]
    if getattr(args, "average_replicates", False):
        data = fitting.average_replicates(data)
    return data, notes


def _cmd_fit_prune(args, out):
    data, notes = _load_prune(args)
    report = fitting.fit_prune_single(data, args.eps_np, _config(args))
    report.warnings[:0] = notes
    return report.as_dict()


def _cmd_fit_prune_joint(args, out):
    data, notes = _load_prune(args)
    report = fitting.fit_prune_joint(data, _config(args))
    report.warnings[:0] = notes
    return report.as_dict()


def _cmd_cv(args, out):
    if args.model == "dense":
        data, notes = io.load_dense_csv(args.data), []
    else:
        data, notes = _load_prune(args)
    report = fitting.cross_validate(data, args.folds, _config(args), args.model)
    report.warnings[:0] = notes
    if args.model == "dense":
        out.table("landscape.csv", io.landscape_csv(report.per_point), primary=True)
    return {"folds_k": args.folds, **report.as_dict()}


def _cmd_extrapolate(args, out):
    config = _config(args)
    if args.prune:
        if args.max_depth is None or args.max_width is None:
            raise UsageError("--prune needs --max-depth and --max-width")
        data, notes = _load_prune(args)
        report = extrapolation.extrapolate_prune(
            data, lambda l, w: l <= args.max_depth and w <= args.max_width, config)
        report.warnings[:0] = notes
        return report.as_dict()
    data = io.load_dense_csv(args.data)
    if args.sweep:
        entries = extrapolation.extrapolation_sweep(data, None, config)
        out.table("extrapolation_grid.csv", extrapolation.sweep_table(entries), primary=True)
        return {"corners": [
            {"i": e.i, "j": e.j, "corner": {"m": e.corner[0], "n": e.corner[1]},
             "status": "ok" if e.ok else "skipped", "reason": e.reason,
             "report": e.report.as_dict() if e.ok else None}
            for e in entries
        ]}
    if args.corner_m is None or args.corner_n is None:
        raise UsageError("give --corner-m and --corner-n, or --sweep")
    report = extrapolation.extrapolate_dense(data, (args.corner_m, args.corner_n), config)
    out.table("extrapolation_points.csv", io.table_csv(
        ("m", "n", "actual", "predicted", "delta", "band"),
        ((p.config["m"], p.config["n"], p.actual, p.estimated, p.delta, b)
         for p, b in zip(report.per_point, report.band)),
    ), primary=True)
    return report.as_dict()


def _prune_family(args):
    data = io.load_prune_csv(args.table)
    ns = sorted({r.n for r in data})
    n = args.n if args.n is not None else ns[-1]
    unpruned = {}
    for r in data:
        if r.n == n and r.density == 1.0:
            unpruned.setdefault((r.depth, r.width), []).append(r.error)
    if not unpruned:
        raise DomainError(f"table has no unpruned rows at n={n!r}")
    table = {k: sum(v) / len(v) for k, v in unpruned.items()}
    family = design.TableFamily(table)
    depths, widths = sorted({k[0] for k in table}), sorted({k[1] for k in table})
    return family, design.SearchDomain.discrete(depths, widths)


def _cmd_design(args, out):
    q = args.query
    if q == "max-model":
        return design.max_useful_model(_dense_params(args), args.n_lim, args.T).as_dict()
    if q == "max-data":
        return design.max_useful_data(_dense_params(args), args.m_lim, args.T).as_dict()
    if q == "optimal-pair":
        return design.optimal_compute_pair(_dense_params(args), args.c).as_dict()
    if q == "contour":
        result = design.error_contour(_dense_params(args), args.target, (args.m_min, args.m_max),
                                      args.points, args.method)
        out.table("contour.csv", io.table_csv(("m", "n"), result.points), primary=True)
        return result.as_dict()
    params = _joint_params(args.params)
    family, domain = _prune_family(args)
    if len(args.eps_k) == 1:
        return design.prune_min_params(family, params, args.eps_k[0], domain).as_dict()
    curve = design.prune_min_param_envelope(family, params, args.eps_k, domain)
    out.table("prune_envelope.csv", io.table_csv(
        ("eps_k", "parameter_count", "depth", "width_scale", "density"),
        ((p.eps_k, *(p.answer.values[k] for k in ("parameter_count", "depth", "width_scale", "density")))
         if p.answer else (p.eps_k, "", "", "", "") for p in curve),
    ), primary=True)
    return {"kind": "prune_envelope", "points": [p.as_dict() for p in curve]}


def _cmd_simulate(args, out):
    if (args.preset is None) == (args.family is None):
        raise UsageError("give exactly one of --preset or --family")
    if args.dip_depth > 0:
        noise = synthetic.NoiseModel.dips(args.dip_depth, args.seed, args.sigma)
    elif args.sigma > 0:
        noise = synthetic.NoiseModel.lognormal(args.sigma, args.seed)
    else:
        noise = synthetic.NoiseModel(seed=args.seed)
    if args.preset:
        preset = get_preset(args.preset)
        data = synthetic.generate_dense_grid(preset.params, preset.m_scales, preset.n_scales, noise,
                                             args.replicates)
        out.table("data.csv", io.dense_csv(data), primary=True)
        truth = preset.params.as_dict()
    else:
        data = synthetic.cifar_like_family(noise, args.replicates, args.ladder_steps)
        out.table("data.csv", io.prune_csv(data), primary=True)
        truth = synthetic.CIFAR_TRUTH.as_dict()
    return {"truth": truth, "noise": noise.as_dict(), "records": len(data),
            "noise_convention": "multiplicative lognormal, a testing assumption"}


def _cmd_stability(args, out):
    data, notes = _load_prune(args)
    report = synthetic.stability_experiment(data, args.T, args.mode, args.repeats, _config(args))
    out.table("stability.csv", io.table_csv(
        ("T", "mu_mean", "mu_std", "sigma_mean", "sigma_std", "failures"),
        ((p.T, p.mu_mean, p.mu_std, p.sigma_mean, p.sigma_std, p.failures) for p in report.points),
    ), primary=True)
    return {**report.as_dict(), "warnings": notes}


_COMMANDS = {
    "presets": _cmd_presets,
    "fit-dense": _cmd_fit_dense,
    "fit-prune": _cmd_fit_prune,
    "fit-prune-joint": _cmd_fit_prune_joint,
    "cv": _cmd_cv,
    "extrapolate": _cmd_extrapolate,
    "design": _cmd_design,
    "simulate": _cmd_simulate,
    "stability": _cmd_stability,
}


def run_command(argv: Sequence[str] | None = None) -> int:
    """Run one command; returns the process exit code."""
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        out = _Output(args)
        payload = _COMMANDS[args.command](args, out)
        name = args.command + (f" {args.query}" if args.command == "design" else "")
        out.finish(name, payload)
    except ScaleLawError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
