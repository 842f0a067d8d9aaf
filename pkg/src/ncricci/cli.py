"""Command-line experiment runner.

Subcommands: ``ricci``, ``scalar``, ``verify-identity``, ``spectral-check``
and ``b2-report``.  Each prints or writes a JSON report that embeds the
configuration hash and the tolerance set; reports contain no timings or other
run-dependent data, so a fixed configuration gives a byte-identical report.

Exit codes: 0 success, 1 internal failure, 2 tolerance violation, 3 input error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
from math import pi
from pathlib import Path
from typing import Callable

import numpy as np

from .algebra import delta_word, element_to_records, exp_sa
from .config import ConfigError, ExperimentConfig, build_config, load_config_file, parse_tolerance
from .integrator import (
    LITERAL_IMAGINARY_TERM_SIGN,
    angular_integrate,
    r_gamma,
    radial_words_to_json,
    ricci_density,
    ricci_functional,
    ricci_functional_scale,
    s_identity_residual,
    to_polar,
)
from .modular import eigen_nabla
from .spectral import (
    FIT_TERMS,
    TruncationGrid,
    fit_a2,
    heat_trace,
    lebesgue_factor,
    relative_discrepancy,
    ricci_spectral_data,
    write_samples_csv,
    zeta_ricci,
)
from .symbols import Term, b2_doubleprime, expand_terms, golden_b2_terms, load_golden, multiset_diff

EXIT_OK, EXIT_INTERNAL, EXIT_TOLERANCE, EXIT_INPUT = 0, 1, 2, 3
THREADS_ENV = "NCG_RICCI_THREADS"


class _Parser(argparse.ArgumentParser):
    """Usage errors are input errors (exit 3), not argparse's default 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


class Outcome:
    """Results, named checks and side tables of one command."""

    def __init__(self):
        self.results: dict = {}
        self.checks: list[dict] = []
        self.tables: dict[str, tuple[list[float], list[complex]]] = {}

    def check(self, name: str, value: float, tolerance: float, passed: bool | None = None) -> None:
        ok = bool(value <= tolerance) if passed is None else bool(passed)
        self.checks.append({"name": name, "value": float(value), "tolerance": float(tolerance), "passed": ok})

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)


def _ric_report(ric) -> dict:
    return {"diagonal": element_to_records(ric.diagonal_part), "offdiagonal": element_to_records(ric.offdiag_part)}


def cmd_ricci(cfg: ExperimentConfig, threads: int) -> Outcome:
    out = Outcome()
    h = cfg.dilaton
    spec = eigen_nabla(h, cfg.spectrum_radius)
    closed = ricci_density(h, spec, method="closed", cheb_n=cfg.cheb_n)
    pipe = ricci_density(h, spec, method="pipeline", cheb_n=cfg.cheb_n, threads=threads)
    literal = ricci_density(h, spec, method="closed", cheb_n=cfg.cheb_n,
                            imaginary_sign=LITERAL_IMAGINARY_TERM_SIGN)
    diff = closed.max_difference(pipe)
    out.results = {
        "spectrum": spec.to_report(),
        "closed": _ric_report(closed),
        "pipeline": _ric_report(pipe),
        "max_difference": diff,
        "offdiagonal_max_abs": closed.offdiag_part.max_abs(),
        "literal_sign_max_difference": literal.max_difference(pipe),
    }
    out.check("closed_vs_pipeline", diff, cfg.tolerances["ricci_agreement"])
    return out


def cmd_scalar(cfg: ExperimentConfig, threads: int) -> Outcome:
    out = Outcome()
    h = cfg.dilaton
    spec = eigen_nabla(h, cfg.spectrum_radius)
    closed = r_gamma(h, spec, cheb_n=cfg.cheb_n)
    pipe = ricci_density(h, spec, method="pipeline", cheb_n=cfg.cheb_n, threads=threads)
    from_pipeline = pipe.diagonal_part * (4 * pi**2 / h.ctx.tau2)
    diff = (closed - from_pipeline).max_abs()
    out.results = {
        "spectrum": spec.to_report(),
        "scalar_curvature": element_to_records(closed),
        "scalar_curvature_pipeline": element_to_records(from_pipeline),
        "max_difference": diff,
    }
    out.check("closed_vs_pipeline", diff, cfg.tolerances["ricci_agreement"])
    return out


def cmd_verify_identity(cfg: ExperimentConfig, threads: int) -> Outcome:
    out = Outcome()
    res = s_identity_residual(cfg.identity_n, cfg.identity_limit)
    out.results = res.to_report()
    out.check("identity_residual", res.max_error, cfg.tolerances["identity"])
    return out


def cmd_spectral_check(cfg: ExperimentConfig, threads: int) -> Outcome:
    out = Outcome()
    h = cfg.dilaton
    tol = cfg.tolerances
    data = ricci_spectral_data(h, TruncationGrid(cfg.grid_n, cfg.guard))
    ts = list(cfg.t_grid) if cfg.t_grid is not None else data.window().tolist()
    ric = ricci_density(h, eigen_nabla(h, cfg.spectrum_radius), method="closed", cheb_n=cfg.cheb_n)
    norm = lebesgue_factor()
    out.results = {
        "grid": {"N": cfg.grid_n, "guard": cfg.guard},
        "restriction_loss": data.scalar.restriction_loss,
        "kernel_dimensions": [data.scalar.kernel_dimension, data.form.kernel_dimension],
        "lambda_edge": data.lam_edge,
        "t_grid": ts,
        "fit_terms": FIT_TERMS,
        "smearings": {},
    }
    for sm in cfg.smearings:
        vals = data.trace_difference(sm.matrix, ts)
        fit = fit_a2(ts, vals, FIT_TERMS)
        zeta = zeta_ricci(sm.matrix, data, ts)
        local = norm * ricci_functional(sm.matrix, ric, h)
        scale = norm * ricci_functional_scale(sm.matrix, ric, h)
        values = {"fit": fit.a2_estimate, "zeta": zeta, "local": local}
        pairs = {}
        for a, b in (("fit", "local"), ("zeta", "local"), ("fit", "zeta")):
            absdiff = abs(values[a] - values[b])
            rel = relative_discrepancy(values[a], values[b], scale)
            pairs[f"{a}_vs_{b}"] = {"abs": absdiff, "rel": rel if np.isfinite(rel) else None}
            # both values negligible (flat case): the relative error carries no information
            if absdiff <= tol["spectral_abs"]:
                out.check(f"{sm.name}:{a}_vs_{b}:abs", absdiff, tol["spectral_abs"])
            else:
                out.check(f"{sm.name}:{a}_vs_{b}", rel, tol["spectral_rel"])
        # relative to the traces whose difference is fitted; the difference itself may cancel to ~0
        magnitude = float(np.abs(heat_trace(sm.matrix.trace(), data.scalar, ts)).max())
        fit_rel = fit.residual / max(magnitude, 1e-300)
        out.check(f"{sm.name}:fit_residual", fit_rel, tol["fit_residual"])
        out.results["smearings"][sm.name] = {
            "fit": fit.to_report(),
            "zeta": [zeta.real, zeta.imag],
            "local": [local.real, local.imag],
            "scale": scale,
            "differences": pairs,
        }
        out.tables[f"spectral_{sm.name}"] = (ts, list(vals))
    return out


def _vanishing_tags(cfg: ExperimentConfig, expr) -> set:
    h = cfg.dilaton
    bases = {"K": exp_sa(h), "k": exp_sa(h * 0.5)}
    tags = {w.body[i] for w in expr for i in range(1, len(w.body), 2)}
    return {t for t in tags if delta_word(t[1], bases[t[0]]).is_zero()}


def cmd_b2_report(cfg: ExperimentConfig, threads: int) -> Outcome:
    out = Outcome()
    expr = b2_doubleprime()
    engine = expand_terms(expr)
    if cfg.golden_expansion is not None:
        try:
            with open(cfg.golden_expansion, encoding="utf-8") as fh:
                golden = sorted(Term.from_json(d) for d in json.load(fh))
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"cannot load golden expansion: {exc}") from exc
    else:
        golden = golden_b2_terms()
    only_engine, only_golden = multiset_diff(engine, golden)
    angular = radial_words_to_json(angular_integrate(to_polar(expr)))
    angular_golden = sorted(load_golden("b2_sigma_angular.json"),
                            key=lambda d: (d["body"], d["r"], d["tau1"], d["tau2"], d["coef"]))
    dead = _vanishing_tags(cfg, expr)
    surviving = expr.filter(lambda w: not any(w.body[i] in dead for i in range(1, len(w.body), 2)))
    out.results = {
        "expansion": [t.to_json() for t in engine],
        "n_terms": len(engine),
        "diff": {"only_engine": [t.to_json() for t in only_engine],
                 "only_golden": [t.to_json() for t in only_golden]},
        "angular": angular,
        "angular_matches_golden": angular == angular_golden,
        "expansion_at_dilaton": [t.to_json() for t in expand_terms(surviving)],
    }
    out.check("expansion_diff_terms", len(only_engine) + len(only_golden), 0)
    out.check("angular_mismatch", 0 if angular == angular_golden else 1, 0)
    return out


COMMANDS: dict[str, tuple[Callable[[ExperimentConfig, int], Outcome], str]] = {
    "ricci": (cmd_ricci, "Ricci density from the closed forms and from the raw symbol pipeline"),
    "scalar": (cmd_scalar, "scalar curvature term only"),
    "verify-identity": (cmd_verify_identity, "residual of the two-variable rearrangement identity on a grid"),
    "spectral-check": (cmd_spectral_check, "spectral heat-trace oracle against the local functional"),
    "b2-report": (cmd_b2_report, "expanded sigma part of b2 and its angular integral against golden files"),
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON experiment configuration")
    common.add_argument("--out", metavar="DIR", help="directory for the JSON report and CSV tables")
    common.add_argument("--grid-n", type=int, metavar="INT",
                        help="truncation N (spectral-check) or points per axis (verify-identity)")
    common.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE", help="override a tolerance")
    common.add_argument("--threads", type=int, metavar="INT",
                        help=f"worker threads (default: ${THREADS_ENV} or 1)")
    parser = _Parser(prog="ncg-ricci", description="Ricci curvature of curved noncommutative two-tori")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text, description=help_text)
    return parser


def _threads(arg: int | None) -> int:
    if arg is None:
        env = os.environ.get(THREADS_ENV, "").strip()
        if not env:
            return 1
        try:
            arg = int(env)
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV} must be an integer") from exc
    if arg < 1:
        raise ConfigError("thread count must be at least 1")
    return arg


def _config(args) -> ExperimentConfig:
    raw = load_config_file(args.config) if args.config else {}
    tols = dict(parse_tolerance(t) for t in args.tol)
    if args.command == "verify-identity" and args.grid_n is not None:
        raw = {**raw, "identity_grid": {**dict(raw.get("identity_grid", {})), "n": args.grid_n}}
        return build_config(raw, tolerances=tols)
    return build_config(raw, grid_n=args.grid_n, tolerances=tols)


def make_report(command: str, cfg: ExperimentConfig, outcome: Outcome) -> dict:
    return {
        "command": command,
        "config_hash": cfg.config_hash,
        "tolerances": cfg.tolerances,
        "config": cfg.normalized,
        "results": outcome.results,
        "checks": outcome.checks,
        "status": "pass" if outcome.passed else "fail",
    }


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if hasattr(obj, "tolist"):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _provenance(exc: BaseException) -> str:
    mods = [f.filename for f in traceback.extract_tb(exc.__traceback__) if "ncricci" in f.filename]
    return f"ncricci.{Path(mods[-1]).stem}" if mods else "ncricci"


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    fn = COMMANDS[args.command][0]
    try:
        threads = _threads(args.threads)
        cfg = _config(args)
        outcome = fn(cfg, threads)
        report = make_report(args.command, cfg, outcome)
        text = dumps_report(report)
    except ConfigError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # surfaced with the module that raised it
        print(f"error in {_provenance(exc)}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"{args.command}.json").write_text(text, encoding="utf-8")
        for name, (ts, vals) in outcome.tables.items():
            write_samples_csv(out_dir / f"{name}.csv", ts, vals)
        for c in outcome.checks:
            print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {c['value']:.3e} (tol {c['tolerance']:.1e})")
    else:
        sys.stdout.write(text)
    return EXIT_OK if outcome.passed else EXIT_TOLERANCE


if __name__ == "__main__":
    sys.exit(main())
