"""Command-line front end.

Exit codes: 0 success, 1 analysis refusal, 2 structural error (bad file,
bad schema, bad option). Reports are JSON objects carrying
``schema_version`` and the SHA-256 of the input model.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import LcpError, PreconditionError, SingularMatrixError, StructuralError
from .model import Partition, SrbmData, TandemSpec, build_tandem, load_json_model, parse_index_set, validate_srbm

SCHEMA_VERSION = "1"
EXIT_OK = 0
EXIT_REFUSED = 1
EXIT_STRUCTURAL = 2


class Refusal(Exception):
    """Analysis declined for a well-formed input."""


def parse_model(path) -> SrbmData | TandemSpec:
    """Read a model file; JSON syntax errors carry line and column."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise StructuralError(f"cannot read {path}: {exc.strerror}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StructuralError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return load_json_model(obj)


def _as_data(model) -> SrbmData:
    return build_tandem(model) if isinstance(model, TandemSpec) else model


def _validate(data: SrbmData, strict: bool) -> dict:
    report = validate_srbm(data)
    problems = []
    if not report.sigma_spd:
        problems.append(f"sigma is not positive definite (min eigenvalue {report.sigma_min_eigenvalue:.6g})")
    if report.r_completely_s is False:
        problems.append(f"R is not completely-S (failing subset {list(report.r_failing_subset)})")
    if not report.stable:
        problems.append("model is not stable")
    if problems and strict:
        raise Refusal("; ".join(problems))
    for p in problems:
        print(f"warning: {p}", file=sys.stderr)
    return report.to_dict()


def _sim_config(args, theta_grid=None, partitions=()):
    from .simulator.core import SimConfig

    return SimConfig(
        dt=args.dt,
        steps=args.steps,
        burn_in=args.burn_in,
        seed=args.seed,
        replications=args.reps,
        theta_grid=theta_grid,
        n_batches=args.batches,
        boundary_correction=not args.no_boundary_correction,
        backend=args.backend,
        convolution_partitions=partitions,
    )


def _require_stable(data: SrbmData, force: bool):
    from .model import is_stable

    if not is_stable(data) and not force:
        raise Refusal("model is not stable (R nonsingular with R^-1 mu < 0 fails); use --force to simulate anyway")


# each command returns (report dict, optional (header, rows) table)


def cmd_check(args, model):
    data = _as_data(model)
    out = {"validation": validate_srbm(data).to_dict()}
    if args.strict:
        _validate(data, True)
    if args.matrix_class:
        from .matclass import MAX_ENUM_DIM, is_completely_s, is_m_matrix, is_p_matrix, is_s_matrix

        if data.d > MAX_ENUM_DIM:
            raise Refusal(f"matrix classification enumerates principal minors; d = {data.d} > {MAX_ENUM_DIM}")
        w = is_s_matrix(data.r)
        cs = is_completely_s(data.r)
        out["matrix_class"] = {
            "s_matrix": w.feasible,
            "s_witness": None if w.v is None else w.v.tolist(),
            "s_marginal": w.marginal,
            "completely_s": cs.ok,
            "completely_s_failing_subset": None if cs.failing_subset is None else list(cs.failing_subset),
            "p_matrix": is_p_matrix(data.r),
            "m_matrix": is_m_matrix(data.r),
        }
    return out, None


def cmd_reduce(args, model):
    from .reduction import reduce

    data = _as_data(model)
    _validate(data, args.strict)
    red = reduce(data, parse_index_set(args.set))
    return {"reduced": red.to_dict()}, None


def cmd_product_form(args, model):
    from .productform import product_form_report

    data = _as_data(model)
    _validate(data, args.strict)
    return {"product_form": product_form_report(data).to_dict()}, None


def cmd_decompose(args, model):
    from .decomposition import check_decomposability, find_decompositions

    data = _as_data(model)
    _validate(data, args.strict)
    if args.search:
        reports = find_decompositions(data, include_all=args.all)
    else:
        reports = [check_decomposability(data, Partition.parse(args.partition))]
    header = ["k", "l", "feedforward", "decomposable", "cond1_residual", "cond2_residual", "stationarity_certainty"]
    rows = [
        [
            " ".join(map(str, r.partition.k_set)),
            " ".join(map(str, r.partition.l_set)),
            r.feedforward,
            r.decomposable,
            r.cond1_residual,
            r.cond2_residual,
            r.stationarity_certainty,
        ]
        for r in reports
    ]
    return {"decompositions": [r.to_dict() for r in reports]}, (header, rows)


def cmd_tandem(args, model):
    from .decomposition import check_decomposability, tandem_decomposability

    if not isinstance(model, TandemSpec):
        raise StructuralError("tandem needs a file with fields d, beta and cv")
    data = build_tandem(model)
    ks = [args.k] if args.k is not None else list(range(1, model.d))
    rows = []
    for k in ks:
        part = Partition.from_k(range(1, k + 1), model.d)
        rows.append(
            {
                "k": k,
                "cv_equal": tandem_decomposability(model, k),
                "report": check_decomposability(data, part).to_dict(),
            }
        )
    return {"spec": model.to_dict(), "model": data.to_dict(), "stable": bool(validate_srbm(data).stable), "by_k": rows}, None


def cmd_simulate(args, model):
    from .simulator.core import simulate

    data = _as_data(model)
    _validate(data, args.strict)
    _require_stable(data, args.force)
    config = _sim_config(args)
    if args.record_samples:
        every = args.record_every or max(1, args.steps // 10_000)
        config = replace(config, record_every=every)
    result = simulate(data, config)
    if args.record_samples:
        d = data.d
        header = ["replication", "step", "time"] + [f"z{i + 1}" for i in range(d)] + [f"y{i + 1}" for i in range(d)]
        with open(args.record_samples, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in result.samples:
                writer.writerow([int(row[0]), int(row[1]), repr(float(row[1]) * args.dt)] + [repr(float(x)) for x in row[2:]])
    header = ["quantity", "index", "value", "se"]
    rows = []
    for i in range(data.d):
        rows.append(["mean_z", i + 1, result.mean_z[i], result.mean_z_se[i]])
    for i in range(data.d):
        rows.append(["y_rate", i + 1, result.y_rate[i], result.y_rate_se[i]])
    for i in range(data.d):
        for j in range(data.d):
            rows.append(["cov_z", f"{i + 1} {j + 1}", result.cov_z[i, j], result.cov_z_se[i, j]])
    return {"simulation": result.to_dict()}, (header, rows)


def cmd_bar_check(args, model):
    from .bar import bar_residual, empirical_bar_table, product_form_model
    from .simulator.core import default_theta_grid, simulate

    data = _as_data(model)
    _validate(data, args.strict)
    if args.theta_grid < 2:
        raise StructuralError("--theta-grid needs at least 2 levels per coordinate")
    grid = default_theta_grid(data, levels=np.linspace(0.0, -1.0, args.theta_grid))
    if args.empirical:
        _require_stable(data, args.force)
        result = simulate(data, _sim_config(args, theta_grid=grid))
        table = empirical_bar_table(data, result)
        points = list(table.rows())
        source = "empirical"
    else:
        mgf = product_form_model(data)
        points = [(t, bar_residual(data, mgf, t), 0.0) for t in grid]
        source = "product-form"
    header = [f"theta{i + 1}" for i in range(data.d)] + ["residual", "se"]
    rows = [list(t) + [float(r), float(s)] for t, r, s in points]
    report = {
        "source": source,
        "points": [{"theta": list(map(float, t)), "residual": float(r), "se": float(s)} for t, r, s in points],
    }
    return {"bar_check": report}, (header, rows)


def cmd_cross_validate(args, model):
    from .simulator.diagnostics import cross_validate_reduction, independence_diagnostics
    from .simulator.core import simulate

    data = _as_data(model)
    _validate(data, args.strict)
    _require_stable(data, args.force)
    part = Partition.parse(args.partition)
    config = _sim_config(args, partitions=())
    full = simulate(data, config)
    report = cross_validate_reduction(data, part, config, full=full)
    out = {"cross_validation": report.to_dict()}
    try:
        out["independence"] = independence_diagnostics(full, part).to_dict()
    except PreconditionError as exc:
        out["independence"] = {"error": str(exc)}
    return out, None


COMMANDS = {
    "check": cmd_check,
    "reduce": cmd_reduce,
    "product-form": cmd_product_form,
    "decompose": cmd_decompose,
    "tandem": cmd_tandem,
    "simulate": cmd_simulate,
    "bar-check": cmd_bar_check,
    "cross-validate": cmd_cross_validate,
}


def _add_sim_options(p):
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--steps", type=int, default=1_000_000)
    p.add_argument("--burn-in", type=int, default=None, help="default: 20%% of steps")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=8)
    p.add_argument("--batches", type=int, default=50, help="total batch count across replications")
    p.add_argument("--backend", choices=["auto", "cython", "python"], default="auto")
    p.add_argument("--no-boundary-correction", action="store_true")
    p.add_argument("--force", action="store_true", help="simulate even if the model is unstable")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="srbm", description="Decomposability analysis of SRBMs.")
    sub = parser.add_subparsers(dest="verb", required=True, metavar="verb")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("model", help="model JSON file (SrbmData or TandemSpec)")
    common.add_argument("--output", choices=["json", "csv"], default="json")
    common.add_argument("-o", "--out", help="write the report here instead of stdout")
    common.add_argument("--strict", action="store_true", help="refuse models that fail validation")

    p = sub.add_parser("check", parents=[common], help="validate a model")
    p.add_argument("--matrix-class", action="store_true", help="classify R (S, completely-S, P, M)")
    p = sub.add_parser("reduce", parents=[common], help="reduced primitives on a subset")
    p.add_argument("--set", required=True, help="1-based subset, e.g. 1,2")
    sub.add_parser("product-form", parents=[common], help="skew symmetry, alpha, lambda and rays")
    p = sub.add_parser("decompose", parents=[common], help="decomposability conditions")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--partition", help="K/L, e.g. 1,2/3")
    g.add_argument("--search", action="store_true", help="scan every feed-forward partition")
    p.add_argument("--all", action="store_true", help="with --search, list non-decomposable partitions too")
    p = sub.add_parser("tandem", parents=[common], help="tandem model and per-k decomposability")
    p.add_argument("--k", type=int, default=None)
    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo stationary estimates")
    _add_sim_options(p)
    p.add_argument("--record-samples", metavar="CSV", help="write a thinned sample path")
    p.add_argument("--record-every", type=int, default=None, help="thinning interval (default steps/10000)")
    p = sub.add_parser("bar-check", parents=[common], help="MGF adjoint-relation residuals on a grid")
    p.add_argument("--theta-grid", type=int, default=4, metavar="N", help="levels per coordinate")
    p.add_argument("--empirical", action="store_true", help="use simulated MGFs instead of the product form")
    _add_sim_options(p)
    p = sub.add_parser("cross-validate", parents=[common], help="full versus reduced simulations")
    p.add_argument("--partition", required=True, help="K/L, e.g. 1/2,3")
    _add_sim_options(p)
    return parser


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, obj


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def render(report: dict, table, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2, default=_json_default) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if table is not None:
        header, rows = table
        writer.writerow(header)
        writer.writerows([[_cell(x) for x in row] for row in rows])
    else:
        writer.writerow(["field", "value"])
        writer.writerows([[k, _cell(v)] for k, v in _flatten(report)])
    return buf.getvalue()


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_STRUCTURAL
    try:
        model = parse_model(args.model)
        body, table = COMMANDS[args.verb](args, model)
    except StructuralError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STRUCTURAL
    except (Refusal, PreconditionError, SingularMatrixError, LcpError) as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    data = _as_data(model)
    report = {"schema_version": SCHEMA_VERSION, "command": args.verb, "model_hash": data.model_hash(), **body}
    text = render(report, table, args.output)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
