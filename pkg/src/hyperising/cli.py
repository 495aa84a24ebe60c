"""Command-line interface.

Subcommands: generate, sample, fit, diagnose, sweep, plot, ingest.
Exit codes: 0 success, 2 validation/parse errors, 3 capacity limits,
4 solver or numeric-certification failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .diagnostics import concentration_probe, diagnose_node
from .errors import (CapacityError, DiagnosticError, EmptyResultError,
                     GenerationError, HyperIsingError, ParseError,
                     SolverError)
from .generate import (CoefficientScheme, assign_coefficients, binarize_series,
                       read_edge_list, read_series_csv, regular_hypergraph,
                       triangles_from_graph)
from .recovery import AggregationRule, format_coefficients, run_pipeline
from .sampler import (GibbsConfig, draw_samples, exact_sample,
                      load_samples_csv, save_samples_csv)
from .svgplot import render_sweep_svg
from .sweep import SweepConfig, rows_from_csv, rows_to_csv, run_sweep
from .tensor import load_tensor, save_tensor

__all__ = ["main"]


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="hyperising",
        description="Learn signed hyperedge structure of k-spin Ising models")
    sub = top.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic model file")
    gen.add_argument("--p", type=int, help="number of vertices")
    gen.add_argument("--k", type=int, default=3, help="interaction order")
    gen.add_argument("--d", type=int, default=3, help="vertex degree")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--coupling", type=float, default=None,
                     help="coefficient magnitude (default 0.5/k!)")
    gen.add_argument("--sign-mode", choices=("all_plus", "rademacher"),
                     default="all_plus")
    gen.add_argument("--from-graph", metavar="FILE",
                     help="build the support from the triangles of this "
                          "pairwise edge list instead of a random hypergraph")
    gen.add_argument("--out", required=True, help="tensor file to write")

    smp = sub.add_parser("sample", help="draw samples from a model file")
    smp.add_argument("--tensor", required=True)
    smp.add_argument("--n", type=int, required=True)
    smp.add_argument("--seed", type=int, default=0)
    smp.add_argument("--burn-in", type=int, default=1000)
    smp.add_argument("--spacing", default="5",
                     help="sweeps between retained samples, or 'restart'")
    smp.add_argument("--scan", choices=("systematic", "random"),
                     default="systematic")
    smp.add_argument("--exact", action="store_true",
                     help="use the inverse-CDF sampler (small p only)")
    smp.add_argument("--out", required=True, help="samples CSV to write")

    ing = sub.add_parser("ingest", help="binarize a real-valued series CSV")
    ing.add_argument("--series", required=True,
                     help="CSV with one column per node")
    ing.add_argument("--thin", type=int, default=3)
    ing.add_argument("--out", required=True, help="samples CSV to write")

    fit = sub.add_parser("fit", help="recover structure from a samples CSV")
    fit.add_argument("--samples", required=True)
    fit.add_argument("--k", type=int, default=3)
    fit.add_argument("--lambda-mode", choices=("practice", "theory", "fixed"),
                     default="practice")
    fit.add_argument("--lam", type=float, default=None)
    fit.add_argument("--alpha-incoh", type=float, default=1.0,
                     help="incoherence level for the theory schedule")
    fit.add_argument("--c-grid", type=_float_list, default=None,
                     help="comma-separated BIC grid for practice mode")
    fit.add_argument("--rule", choices=("and_strict", "or_max"),
                     default="and_strict")
    fit.add_argument("--workers", type=int, default=1)
    fit.add_argument("--truth", default=None,
                     help="optional tensor file to score the fit against")
    fit.add_argument("--out-dir", required=True)

    dia = sub.add_parser("diagnose", help="assumption diagnostics for a model")
    dia.add_argument("--tensor", required=True)
    dia.add_argument("--n", type=int, default=10_000,
                     help="exact samples for score/uniqueness checks")
    dia.add_argument("--seed", type=int, default=0)
    dia.add_argument("--lam", type=float, default=None)
    dia.add_argument("--n-grid", type=_int_list, default=(100, 1000, 10000),
                     help="sample sizes for the concentration probe")
    dia.add_argument("--out-dir", required=True)

    swp = sub.add_parser("sweep", help="run a scaling-experiment grid")
    swp.add_argument("--config", default=None,
                     help="JSON file with SweepConfig fields; flags override")
    swp.add_argument("--p", dest="p_list", type=_int_list, default=None)
    swp.add_argument("--k", type=int, default=None)
    swp.add_argument("--d", type=int, default=None)
    swp.add_argument("--alpha-grid", type=_float_list, default=None)
    swp.add_argument("--n-grid", type=_int_list, default=None)
    swp.add_argument("--trials", type=int, default=None)
    swp.add_argument("--divisor", type=float, default=None)
    swp.add_argument("--lambda-mode", dest="lambda_mode", default=None,
                     choices=("practice", "theory", "fixed"))
    swp.add_argument("--lam", type=float, default=None)
    swp.add_argument("--alpha-incoh", dest="alpha_incoh", type=float,
                     default=None)
    swp.add_argument("--c-grid", dest="c_grid", type=_float_list, default=None)
    swp.add_argument("--rule", choices=("and_strict", "or_max"), default=None)
    swp.add_argument("--coupling", type=float, default=None)
    swp.add_argument("--sign-mode", dest="sign_mode", default=None,
                     choices=("all_plus", "rademacher"))
    swp.add_argument("--seed", dest="base_seed", type=int, default=None)
    swp.add_argument("--workers", type=int, default=None)
    swp.add_argument("--burn-in", dest="burn_in_sweeps", type=int, default=None)
    swp.add_argument("--spacing", dest="spacing_sweeps", type=int, default=None)
    swp.add_argument("--scan", choices=("systematic", "random"), default=None)
    swp.add_argument("--plot-metric", dest="plot_metric", default=None,
                     choices=("rate", "success"))
    swp.add_argument("--out-dir", required=True)

    plt = sub.add_parser("plot", help="render an SVG from a sweep rows CSV")
    plt.add_argument("--csv", required=True)
    plt.add_argument("--metric", choices=("rate", "success"), default="rate")
    plt.add_argument("--out", required=True)

    return top


def _cmd_generate(args) -> int:
    if args.from_graph:
        support = triangles_from_graph(read_edge_list(args.from_graph))
        if not support.edges:
            raise EmptyResultError("the graph has no triangles")
    else:
        if args.p is None:
            raise ValueError("--p is required unless --from-graph is given")
        support = regular_hypergraph(args.p, args.k, args.d, args.seed)
    tensor = assign_coefficients(support, CoefficientScheme(
        magnitude=args.coupling, sign_mode=args.sign_mode, seed=args.seed))
    save_tensor(tensor, args.out)
    print(f"wrote {len(tensor.edges)} edges (p={tensor.p}, k={tensor.k}) "
          f"to {args.out}")
    return 0


def _cmd_sample(args) -> int:
    tensor = load_tensor(args.tensor)
    if args.exact:
        samples = exact_sample(tensor, args.n, args.seed)
    else:
        spacing = args.spacing if args.spacing == "restart" else int(args.spacing)
        samples = draw_samples(tensor, args.n, GibbsConfig(
            burn_in_sweeps=args.burn_in, spacing_sweeps=spacing,
            scan=args.scan, seed=args.seed))
    save_samples_csv(samples, args.out)
    print(f"wrote {samples.n} samples of {samples.p} spins to {args.out}")
    return 0


def _cmd_ingest(args) -> int:
    series = read_series_csv(args.series)
    samples = binarize_series(series, thin=args.thin)
    save_samples_csv(samples, args.out)
    print(f"binarized {series.shape[0]} time points into {samples.n} samples "
          f"({samples.p} nodes) at {args.out}")
    return 0


def _cmd_fit(args) -> int:
    samples = load_samples_csv(args.samples)
    truth = load_tensor(args.truth) if args.truth else None
    report = run_pipeline(
        samples, args.k, truth=truth, lambda_mode=args.lambda_mode,
        lam=args.lam, alpha=args.alpha_incoh, c_grid=args.c_grid,
        rule=AggregationRule(mode=args.rule), workers=args.workers)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "recovery.json").write_text(report.to_json() + "\n",
                                       encoding="ascii")
    (out / "coefficients.txt").write_text(
        format_coefficients(report.neighborhoods), encoding="ascii")
    print(f"estimated {len(report.estimated.edges)} edges at "
          f"lambda={report.lambda_used:.6g}"
          + (f", rate={report.rate:.3f}" if report.rate is not None else ""))
    return 0


def _cmd_diagnose(args) -> int:
    tensor = load_tensor(args.tensor)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    skipped = []
    for r in range(tensor.p):
        if not tensor.incidence[r]:
            skipped.append(r)
            continue
        rep = diagnose_node(tensor, r, n=args.n, seed=args.seed, lam=args.lam)
        reports.append(rep.to_dict())
        probe = concentration_probe(tensor, r, args.n_grid, seed=args.seed)
        (out / f"probe_r{r}.csv").write_text(probe.to_csv(), encoding="ascii")
    payload = {"nodes": reports, "skipped_isolated": skipped}
    (out / "diagnostics.json").write_text(
        json.dumps(payload, indent=2) + "\n", encoding="ascii")
    print(f"diagnosed {len(reports)} nodes "
          f"({len(skipped)} isolated skipped) into {args.out_dir}")
    return 0


_SWEEP_FIELDS = ("p_list", "k", "d", "alpha_grid", "n_grid", "trials",
                 "divisor", "lambda_mode", "lam", "alpha_incoh", "c_grid",
                 "rule", "coupling", "sign_mode", "base_seed", "workers",
                 "burn_in_sweeps", "spacing_sweeps", "scan", "plot_metric")


def _cmd_sweep(args) -> int:
    data: dict = {}
    if args.config:
        try:
            data.update(json.loads(Path(args.config).read_text()))
        except json.JSONDecodeError as exc:
            raise ParseError(f"config is not valid JSON: {exc}")
    for name in _SWEEP_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    config = SweepConfig.from_dict(data)
    config.validate()
    result = run_sweep(config)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(rows_to_csv(result.rows), encoding="ascii")
    (out / "sweep.svg").write_text(
        render_sweep_svg(result.rows, config.plot_metric), encoding="ascii")
    # wall times live in a side file so the CSV/SVG stay run-invariant
    timing = {"total_s": sum(r.wall_time or 0.0 for r in result.rows),
              "trials": len(result.rows)}
    (out / "timing.json").write_text(json.dumps(timing, indent=2) + "\n",
                                     encoding="ascii")
    failed = sum(1 for r in result.rows if r.status != "ok")
    for s in result.aggregates():
        label = f"alpha={s.alpha:g}" if s.alpha is not None else f"n={s.n}"
        rate = "-" if s.mean_rate is None else f"{s.mean_rate:.3f}"
        frac = "-" if s.success_fraction is None else f"{s.success_fraction:.3f}"
        print(f"p={s.p} {label} n={s.n}: rate={rate} success={frac} "
              f"ok={s.trials_ok} failed={s.trials_failed}")
    print(f"wrote {len(result.rows)} rows ({failed} failed) to {args.out_dir}")
    return 0


def _cmd_plot(args) -> int:
    rows = rows_from_csv(Path(args.csv).read_text(encoding="ascii"))
    Path(args.out).write_text(render_sweep_svg(rows, args.metric),
                              encoding="ascii")
    print(f"wrote {args.out}")
    return 0


_DISPATCH = {
    "generate": _cmd_generate,
    "sample": _cmd_sample,
    "ingest": _cmd_ingest,
    "fit": _cmd_fit,
    "diagnose": _cmd_diagnose,
    "sweep": _cmd_sweep,
    "plot": _cmd_plot,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _DISPATCH[args.command](args)
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return 3
    except (SolverError, DiagnosticError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 4
    except (ParseError, GenerationError, EmptyResultError, ValueError,
            OSError, HyperIsingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
