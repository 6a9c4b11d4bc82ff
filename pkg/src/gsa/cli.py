"""Command-line front end.

    gsa run CONFIG
    gsa sample   --config CONFIG --method {monte_carlo,lhs,saltelli,morris} ...
    gsa evaluate DESIGN_CSV (--config CONFIG | --model NAME [--fix NAME=VALUE ...])
    gsa analyze  EVAL_CSV --method {morris,regression,sobol,metamodel} ...
    gsa report   EVAL_CSV --kind {scatter,main_effects,cobweb,all} ...

Exit status: 0 success, 2 configuration / artefact / schema error, 3 model
evaluation failure, 4 analysis error. Failures print one line on stderr::

    gsa-error code=2 kind=config field=inputs[3].dist.kind msg="..."
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import warnings
from pathlib import Path
from typing import Sequence

import numpy as np

from . import models as mdl
from . import report as rep
from .config import ConfigError, ProblemConfig, load_config
from .distributions import InputSpace
from .errors import (CollinearityError, DesignError, ExternalModelError, GSAError,
                     IncompleteDesignError, ModelDomainError, ParameterError, ProtocolError,
                     SchemaError, UndefinedIndexError)
from .metamodel import fit_polynomial, sobol_via_metamodel
from .persist import ArtifactError, dump_json, read_design, read_eval, write_design, write_eval
from .regression import regression_indices
from .sampling import (LHS, MONTE_CARLO, MorrisDesign, PickFreezeDesign, lhs, monte_carlo,
                       morris_trajectories, saltelli_design)
from .screening import morris as morris_analysis
from .sobol import NegativeIndexWarning, estimate_sobol

log = logging.getLogger("gsa")

EXIT_OK, EXIT_CONFIG, EXIT_MODEL, EXIT_ANALYSIS = 0, 2, 3, 4
TEST_SEED_OFFSET = 1_000_003


class EvaluationFailed(GSAError):
    pass


class AnalysisError(GSAError):
    pass


# ---------------------------------------------------------------- building blocks

def build_model(spec: dict, input_names: Sequence[str]) -> mdl.Model:
    if "builtin" in spec:
        try:
            return mdl.builtin(spec["builtin"])
        except SchemaError as exc:
            raise ConfigError("model.builtin", str(exc)) from None
    if "analytic" in spec:
        kind = spec["analytic"]
        out = spec.get("output", "y")
        if kind == "linear":
            coef = spec.get("coefficients")
            if coef is None or len(coef) != len(input_names):
                raise ConfigError("model.coefficients", f"need {len(input_names)} coefficients")
            return mdl.linear_model(coef, input_names, spec.get("intercept", 0.0), out)
        if kind == "product":
            return mdl.product_model(input_names, out)
        if kind == "ishigami":
            return mdl.ishigami_model(input_names, spec.get("a", 7.0), spec.get("b", 0.1), out)
        raise ConfigError("model.analytic", f"unknown analytic model {kind!r}")
    ext = spec["external"]
    if not isinstance(ext, dict) or not ext.get("command"):
        raise ConfigError("model.external.command", "missing command")
    cmd = ext["command"]
    cmd = cmd.split() if isinstance(cmd, str) else list(cmd)
    return mdl.external_model(cmd, list(input_names), ext.get("output", "y"), ext.get("header", True),
                              ext.get("timeout"))


def make_design(method: str, space: InputSpace, seed: int, opts: dict):
    if method == "morris":
        return morris_trajectories(space, int(opts.get("r", 10)), int(opts.get("levels", 4)),
                                   opts.get("delta"), seed)
    if method in ("sobol", "saltelli"):
        return saltelli_design(space, int(opts.get("n", 10000)), seed,
                               bool(opts.get("second_order", False)), opts.get("design", MONTE_CARLO))
    n = int(opts.get("n", 100))
    kind = opts.get("design", LHS if method in ("metamodel", "lhs") else MONTE_CARLO)
    if method in (LHS, MONTE_CARLO):
        kind = method
    if kind == LHS:
        return lhs(space, n, seed)
    if kind == MONTE_CARLO:
        return monte_carlo(space, n, seed)
    raise DesignError(f"unknown design {kind!r}")


def _sample_of(design):
    return design.sample if hasattr(design, "sample") else design


def run_evaluation(model: mdl.Model, design, fixed, workers: int) -> mdl.EvaluationSet:
    try:
        return mdl.evaluate(model, _sample_of(design), fixed=fixed, workers=workers)
    except (ExternalModelError, ProtocolError, ModelDomainError) as exc:
        raise EvaluationFailed(str(exc)) from exc


def _fmt(v) -> str:
    return "nan" if v is None or not np.isfinite(v) else f"{v:.4f}"


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


# ---------------------------------------------------------------- analyses

def analyze_morris(ev, design, output, opts, out: Path, prov: dict):
    if not isinstance(design, MorrisDesign):
        raise AnalysisError("morris analysis needs an evaluation of a Morris design")
    res = morris_analysis(design, ev[output], space=opts.get("space", "unit"))
    _write_csv(out / "morris.csv", ["input", "mu", "mu_star", "sigma", "group"], res.rows())
    dump_json(out / "morris.json", {
        **prov, "output": output, "r": design.r, "levels": design.levels, "delta": design.delta,
        "inputs": {n: {"mu": float(m), "mu_star": float(ms), "sigma": float(s), "group": g}
                   for n, m, ms, s, g in res.rows()},
    })
    lines = [f"Morris screening of {output}: r={design.r}, levels={design.levels}, delta={design.delta:.4g}",
             f"{'input':>8} {'mu':>12} {'mu*':>12} {'sigma':>12}  group"]
    lines += [f"{n:>8} {m:12.5g} {ms:12.5g} {s:12.5g}  {g}" for n, m, ms, s, g in res.rows()]
    return lines


def analyze_regression(ev, design, output, opts, out: Path, prov: dict, test_ev=None):
    test = None
    if test_ev is not None:
        if list(test_ev.sample.names) != list(ev.sample.names):
            raise SchemaError("test evaluation has different input columns")
        test = (test_ev.sample.values, test_ev[output])
    res = regression_indices(ev.sample, ev[output], test=test, level=opts.get("level", 0.95),
                             bootstrap=int(opts.get("bootstrap", 0)), seed=prov["seed"] or 0)
    table = res.table()
    cols = ["input", "pearson", "src", "src2", "pcc", "spearman", "srrc", "srrc2", "prcc"]
    extra = sorted({k for row in table for k in row if k.endswith(("_lo", "_hi"))})
    rows = []
    for row in table:
        row["src2"], row["srrc2"] = row["src"] ** 2, row["srrc"] ** 2
        rows.append([row.get(c, float("nan")) for c in cols + extra])
    _write_csv(out / "regression.csv", cols + extra, rows)
    summary = {**prov, "output": output, "n": res.n, "r_squared": res.r_squared,
               "r_squared_ranks": res.r_squared_ranks, "q2": res.q2, "q2_ranks": res.q2_ranks,
               "test_n": None if test is None else int(len(test[1]))}
    dump_json(out / "regression.json", summary)
    lines = [f"Regression measures of {output} (n={res.n}): R2={_fmt(res.r_squared)} "
             f"R2*={_fmt(res.r_squared_ranks)} Q2={_fmt(res.q2)} Q2*={_fmt(res.q2_ranks)}",
             f"{'input':>8} {'SRC2':>8} {'PCC':>8} {'SRRC2':>8} {'PRCC':>8}"]
    lines += [f"{r['input']:>8} {r['src2']:8.4f} {r['pcc']:8.4f} {r['srrc2']:8.4f} {r['prcc']:8.4f}"
              for r in table]
    return lines


def _sobol_files(res, out: Path, prov: dict, name="sobol"):
    dump_json(out / f"{name}.json", {**prov, **res.to_dict()})
    d = res.to_dict()["inputs"]
    keys = ["Si", "Si_lo", "Si_hi", "STi", "STi_lo", "STi_hi"]
    _write_csv(out / f"{name}.csv", ["input", *keys], [[n, *(v[k] for k in keys)] for n, v in d.items()])
    lines = [f"{'input':>8} {'Si':>8} {'[lo':>8} {'hi]':>8} {'STi':>8} {'[lo':>8} {'hi]':>8}"]
    lines += [f"{n:>8} " + " ".join(f"{v[k]:8.4f}" for k in keys) for n, v in d.items()]
    lines += [f"  S({a},{b}) = {v:.4f}" for (a, b), v in res.second.items()]
    return lines


def _sobol_opts(opts):
    ci = opts.get("ci") or {}
    return dict(first_order=opts.get("first_order", "saltelli"), total=opts.get("total", "jansen"),
                n_boot=int(ci.get("B", opts.get("B", 200))), level=float(ci.get("level", 0.95)))


def analyze_sobol(ev, design, output, opts, out: Path, prov: dict):
    if not isinstance(design, PickFreezeDesign):
        raise AnalysisError("sobol analysis needs an evaluation of a pick-freeze design")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NegativeIndexWarning)
        res = estimate_sobol(design, ev[output], **_sobol_opts(opts), seed=prov["seed"] or 0)
    lines = [f"Sobol' indices of {output}: base n={res.base_n}, first={res.first_estimator}, "
             f"total={res.total_estimator}, {res.ci_method} {res.level:.0%} intervals"]
    return lines + _sobol_files(res, out, prov)


def analyze_metamodel(ev, design, output, opts, out: Path, prov: dict, space: InputSpace | None):
    mm = fit_polynomial(ev.sample, ev[output], int(opts.get("degree", 2)),
                        bool(opts.get("interactions", True)), output=output)
    mm.save(out / "metamodel.txt")
    summary = {**prov, "output": output, "degree": mm.degree, "interactions": mm.interactions,
               "n_train": mm.n_train, "r_squared": mm.r_squared, "loo_q2": mm.loo_q2}
    lines = [f"Polynomial metamodel of {output}: degree={mm.degree}, interactions={mm.interactions}, "
             f"n={mm.n_train}, R2={_fmt(mm.r_squared)}, LOO-Q2={_fmt(mm.loo_q2)}"]
    sobol_n = int(opts.get("sobol_n", 0) or 0)
    if space is not None and sobol_n:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NegativeIndexWarning)
            ms = sobol_via_metamodel(mm, space, sobol_n, prov["seed"] or 0, **_sobol_opts(opts))
        summary["unexplained_variance"] = ms.unexplained
        lines.append(f"Sobol' indices through the metamodel (base n={sobol_n}); "
                     f"unexplained variance 1-Q2 = {_fmt(ms.unexplained)}")
        lines += _sobol_files(ms.result, out, prov)
    dump_json(out / "metamodel.json", summary)
    return lines


def analyze(method, ev, design, outputs, opts, out_dir: Path, prov: dict, *, space=None,
            test_ev=None) -> list[str]:
    """Run one analysis for each requested output; files go to ``out_dir/<output>/``."""
    lines = []
    for output in outputs:
        ev[output]
        od = out_dir / output
        od.mkdir(parents=True, exist_ok=True)
        try:
            if method == "morris":
                chunk = analyze_morris(ev, design, output, opts, od, prov)
            elif method == "regression":
                chunk = analyze_regression(ev, design, output, opts, od, prov, test_ev)
            elif method == "sobol":
                chunk = analyze_sobol(ev, design, output, opts, od, prov)
            elif method == "metamodel":
                chunk = analyze_metamodel(ev, design, output, opts, od, prov, space)
            else:
                raise ParameterError(f"unknown analysis method {method!r}")
        except (UndefinedIndexError, CollinearityError, IncompleteDesignError, ParameterError,
                DesignError) as exc:
            raise AnalysisError(f"{method} on {output}: {exc}") from exc
        (od / "summary.txt").write_text("\n".join(chunk) + "\n")
        lines += chunk + [""]
    return lines


def make_report(ev, outputs, opts, out_dir: Path, prov: dict, kinds=("scatter", "main_effects", "cobweb")):
    lines = []
    for output in outputs:
        od = out_dir / output
        od.mkdir(parents=True, exist_ok=True)
        info = {**prov, "output": output, "n": ev.n}
        try:
            if "scatter" in kinds:
                rep.write_scatter_csv(od / "scatter.csv", ev, output)
            if "main_effects" in kinds:
                curves = rep.main_effects(ev, output, int(opts.get("bins", 20)))
                rep.write_main_effects_csv(od / "main_effects.csv", curves)
                info["main_effect_variance"] = {c.name: c.variance for c in curves}
            if "cobweb" in kinds:
                cw = rep.cobweb(ev, output, float(opts.get("top_fraction", 0.05)),
                                opts.get("direction", "largest"))
                rep.write_cobweb_csv(od / "cobweb.csv", cw)
                info["cobweb"] = {"top_fraction": cw.top_fraction, "direction": cw.direction,
                                  "highlighted": cw.n_highlighted}
        except ParameterError as exc:
            raise AnalysisError(f"report on {output}: {exc}") from exc
        dump_json(od / "report.json", info)
        chunk = [f"Report datasets for {output} (n={ev.n}): {', '.join(kinds)}"]
        if "cobweb" in info:
            chunk.append(f"  cobweb: {info['cobweb']['highlighted']} highlighted rows")
        (od / "summary.txt").write_text("\n".join(chunk) + "\n")
        lines += chunk
    return lines


# ---------------------------------------------------------------- commands

def _provenance(cfg: ProblemConfig | None, seed) -> dict:
    return {"config_hash": cfg.hash if cfg else None, "seed": seed}


def _model_input_names(cfg: ProblemConfig) -> list[str]:
    return list(cfg.full_space.names)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    out = Path(args.out_dir or cfg.out_dir or "gsa-results")
    model = build_model(cfg.model, _model_input_names(cfg))
    prov = _provenance(cfg, seed)
    all_lines = []
    for block, opts in cfg.analyses.items():
        space, fixed = cfg.block_space(block)
        bdir = out / block
        try:
            design = make_design(block, space, seed, opts)
        except (DesignError, ParameterError) as exc:
            raise ConfigError(f"analyses.{block}", str(exc)) from None
        design_path = write_design(bdir, design, prov)
        design, meta = read_design(design_path)
        ev = run_evaluation(model, design, fixed, args.workers)
        eval_path = write_eval(bdir, ev, meta)
        if ev.failures:
            raise EvaluationFailed(f"{len(ev.failures)} rows failed in block {block} (see {eval_path})")
        ev, design, meta = read_eval(eval_path)
        outputs = opts.get("outputs") or ev.output_names()
        if block == "report":
            all_lines += make_report(ev, outputs, opts, bdir, prov)
            continue
        test_ev = None
        if block == "regression" and opts.get("test_n"):
            tdir = bdir / "test"
            tdesign = monte_carlo(space, int(opts["test_n"]), seed + TEST_SEED_OFFSET)
            tpath = write_design(tdir, tdesign, prov)
            tdesign, tmeta = read_design(tpath)
            tev = run_evaluation(model, tdesign, fixed, args.workers)
            test_ev, _, _ = read_eval(write_eval(tdir, tev, tmeta))
        all_lines += analyze(block, ev, design, outputs, opts, bdir, prov, space=space, test_ev=test_ev)
    (out / "summary.txt").write_text("\n".join(all_lines) + "\n")
    if not args.quiet:
        print("\n".join(all_lines))
    return EXIT_OK


def _parse_fix(items) -> dict[str, float]:
    fixed = {}
    for item in items or []:
        name, sep, val = item.partition("=")
        try:
            if not sep:
                raise ValueError
            fixed[name] = float(val)
        except ValueError:
            raise ConfigError("--fix", f"expected NAME=VALUE, got {item!r}") from None
    return fixed


def cmd_sample(args) -> int:
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    space = cfg.full_space if args.full_space else cfg.space
    opts = {"n": args.n, "r": args.r, "levels": args.levels, "delta": args.delta,
            "second_order": args.second_order, "design": args.base}
    opts = {k: v for k, v in opts.items() if v is not None}
    try:
        design = make_design(args.method, space, seed, opts)
    except (DesignError, ParameterError) as exc:
        raise ConfigError("--" + args.method, str(exc)) from None
    path = write_design(Path(args.out_dir), design, _provenance(cfg, seed))
    print(path)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    design, meta = read_design(args.design)
    if args.config:
        cfg = load_config(args.config)
        model = build_model(cfg.model, _model_input_names(cfg))
        fixed = {k: v for k, v in cfg.fixed.items() if k not in _sample_of(design).names}
    elif args.model:
        model = mdl.builtin(args.model)
        fixed = {}
    else:
        raise ConfigError("--config", "either --config or --model is required")
    fixed.update(_parse_fix(args.fix))
    ev = run_evaluation(model, design, fixed, args.workers)
    path = write_eval(Path(args.out_dir), ev, meta)
    print(path)
    if ev.failures:
        i, msg = ev.failures[0]
        raise EvaluationFailed(f"{len(ev.failures)} rows failed (first: row {i}: {msg}); see {path}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    ev, design, meta = read_eval(args.eval, outputs=args.output, inputs=args.inputs)
    outputs = args.output or ev.output_names()
    seed = meta.get("seed") if args.seed is None else args.seed
    prov = {"config_hash": meta.get("config_hash"), "seed": seed}
    space = None
    if args.config:
        cfg = load_config(args.config)
        space = cfg.full_space.subset(ev.sample.names)
    test_ev = read_eval(args.test)[0] if args.test else None
    opts = {"degree": args.degree, "interactions": args.interactions, "sobol_n": args.sobol_n,
            "first_order": args.first_order, "total": args.total, "B": args.B, "level": args.level,
            "bootstrap": args.bootstrap, "space": args.effects}
    opts = {k: v for k, v in opts.items() if v is not None}
    if args.method == "sobol" and "level" in opts:
        opts["ci"] = {"B": opts.get("B", 200), "level": opts["level"]}
    lines = analyze(args.method, ev, design, outputs, opts, Path(args.out_dir), prov, space=space,
                    test_ev=test_ev)
    if not args.quiet:
        print("\n".join(lines))
    return EXIT_OK


def cmd_report(args) -> int:
    ev, _, meta = read_eval(args.eval, outputs=args.output, inputs=args.inputs)
    outputs = args.output or ev.output_names()
    kinds = ("scatter", "main_effects", "cobweb") if args.kind == "all" else (args.kind,)
    opts = {"bins": args.bins, "top_fraction": args.top_fraction, "direction": args.direction}
    prov = {"config_hash": meta.get("config_hash"), "seed": meta.get("seed")}
    lines = make_report(ev, outputs, opts, Path(args.out_dir), prov, kinds)
    if not args.quiet:
        print("\n".join(lines))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the configured seed")
    common.add_argument("--workers", type=int, default=mdl.default_workers(),
                        help="evaluation threads (default: $GSA_WORKERS or CPU count)")
    common.add_argument("--out-dir", default=None)
    common.add_argument("-q", "--quiet", action="store_true")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="gsa", description="Global sensitivity analysis toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="sample, evaluate and analyse every block")
    r.add_argument("config")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sample", parents=[common], help="write a design")
    s.add_argument("--config", required=True)
    s.add_argument("--method", required=True, choices=["monte_carlo", "lhs", "saltelli", "morris"])
    s.add_argument("--n", type=int)
    s.add_argument("--r", type=int)
    s.add_argument("--levels", type=int)
    s.add_argument("--delta", type=float)
    s.add_argument("--second-order", action="store_true", default=None)
    s.add_argument("--base", choices=["monte_carlo", "lhs"], help="base sampling of pick-freeze blocks")
    s.add_argument("--full-space", action="store_true", help="also sample the fixed inputs")
    s.set_defaults(func=cmd_sample)

    e = sub.add_parser("evaluate", parents=[common], help="evaluate a model on a design")
    e.add_argument("design")
    e.add_argument("--config")
    e.add_argument("--model", choices=sorted(mdl.BUILTINS))
    e.add_argument("--fix", action="append", metavar="NAME=VALUE")
    e.set_defaults(func=cmd_evaluate)

    a = sub.add_parser("analyze", parents=[common], help="analyse a persisted evaluation set")
    a.add_argument("eval")
    a.add_argument("--method", required=True, choices=["morris", "regression", "sobol", "metamodel"])
    a.add_argument("--output", action="append", help="output column(s) to analyse")
    a.add_argument("--inputs", nargs="+", help="input columns when eval.json is absent")
    a.add_argument("--config", help="problem config; gives the input space for metamodel Sobol'")
    a.add_argument("--test", help="independent evaluation set for Q2 (regression)")
    a.add_argument("--degree", type=int)
    a.add_argument("--interactions", action=argparse.BooleanOptionalAction, default=None)
    a.add_argument("--sobol-n", type=int)
    a.add_argument("--first-order", choices=["saltelli", "janon_monod"])
    a.add_argument("--total", choices=["jansen", "saltelli"])
    a.add_argument("--B", type=int, help="bootstrap resamples")
    a.add_argument("--bootstrap", type=int, help="bootstrap resamples for regression measures")
    a.add_argument("--level", type=float)
    a.add_argument("--effects", choices=["unit", "physical"], help="Morris effect scale")
    a.set_defaults(func=cmd_analyze)

    rp = sub.add_parser("report", parents=[common], help="export exploration datasets")
    rp.add_argument("eval")
    rp.add_argument("--kind", default="all", choices=["all", "scatter", "main_effects", "cobweb"])
    rp.add_argument("--output", action="append")
    rp.add_argument("--inputs", nargs="+")
    rp.add_argument("--bins", type=int, default=20)
    rp.add_argument("--top-fraction", type=float, default=0.05)
    rp.add_argument("--direction", choices=["largest", "smallest"], default="largest")
    rp.set_defaults(func=cmd_report)
    return p


def _diagnose(code: int, kind: str, exc: Exception, field_name: str | None = None) -> int:
    msg = str(exc).replace('"', "'").replace("\n", " ")
    extra = f" field={field_name}" if field_name else ""
    print(f'gsa-error code={code} kind={kind}{extra} msg="{msg}"', file=sys.stderr)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command != "run" and args.out_dir is None:
        args.out_dir = "."
    try:
        return args.func(args)
    except ConfigError as exc:
        return _diagnose(EXIT_CONFIG, "config", exc, exc.field)
    except ArtifactError as exc:
        return _diagnose(EXIT_CONFIG, "artifact", exc, exc.path)
    except SchemaError as exc:
        return _diagnose(EXIT_CONFIG, "schema", exc)
    except (EvaluationFailed, ExternalModelError, ProtocolError, ModelDomainError) as exc:
        return _diagnose(EXIT_MODEL, "model", exc)
    except AnalysisError as exc:
        return _diagnose(EXIT_ANALYSIS, "analysis", exc)


if __name__ == "__main__":
    sys.exit(main())
