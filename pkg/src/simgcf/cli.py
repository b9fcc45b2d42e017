"""``simgcf`` command line: prepare, fit-filter, train, evaluate, analyze, report, grid.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure
(including a failed analysis check).
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import ConfigError, RunConfig
from .dataset import load_interactions, load_split, save_split, split_dataset
from .errors import DataError, NumericalError, ParseError, RankDeficientError
from .evaluation import EvalReport, evaluate, evaluate_popularity, format_table
from .filters import FilterSpec, waveform_table
from .graph import build_normalized_adjacency
from .propagation import DENSE_CAP, load_checkpoint, save_checkpoint
from .spectral_lab import (
    CASE_GRAPH_LABELS,
    build_case_graph,
    dense_eigendecomposition,
    exact_graph_signal,
    ges_matrix,
    hop_distances,
    odd_even_decomposition,
    random_bipartite_graph,
    sign_pattern,
    verify_sign_blindness,
)
from .training import load_train_state, save_train_state, train
from .variants import VARIANTS

log = logging.getLogger("simgcf")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3
ABLATIONS = ("jgcf-l", "jgcf-h", "jgcf-h-sf", "lightgcn")
CHECKPOINT, STATE, TELEMETRY = "model.ckpt", "state.npz", "telemetry.jsonl"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


# -- config plumbing ----------------------------------------------------------

def _load_config(args) -> RunConfig:
    cfg = cfgmod.load(args.config) if args.config else RunConfig()
    return cfg


def _filter_overrides(cfg: RunConfig, args) -> RunConfig:
    variant = getattr(args, "ablation", None) or getattr(args, "variant", None)
    if getattr(args, "quadrant", None):
        variant = args.quadrant
    base = getattr(args, "base_coefficients", None)
    degree = getattr(args, "degree", None)
    if base is not None and degree is None:
        degree = len(base) - 1
    cfg = cfg.with_overrides(
        "filter",
        variant=variant,
        basis=getattr(args, "basis", None),
        degree=degree,
        a=getattr(args, "a", None),
        b=getattr(args, "b", None),
        mu=getattr(args, "mu", None),
        alpha=getattr(args, "alpha", None),
        beta=getattr(args, "beta", None),
        base_coefficients=base,
        samples=getattr(args, "samples", None),
        sample_seed=getattr(args, "sample_seed", None),
        use_scaler=getattr(args, "use_scaler", None),
        space_flip=getattr(args, "space_flip", None),
    )
    return cfg


def _train_overrides(cfg: RunConfig, args) -> RunConfig:
    return cfg.with_overrides(
        "train",
        learning_rate=args.lr,
        batch_size=args.batch_size,
        reg_weight=args.reg_weight,
        max_epochs=args.max_epochs,
        early_stop_patience=args.patience,
        embedding_dim=args.dim,
        init_seed=args.init_seed,
        sampler_seed=args.sampler_seed,
    )


def _output_dir(cfg: RunConfig, args) -> Path:
    out = Path(args.out) if getattr(args, "out", None) else Path(cfg.output.dir)
    return out


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# -- commands -------------------------------------------------------------------

def cmd_prepare(args) -> int:
    cfg = _load_config(args)
    cfg = cfg.with_overrides("data", input=args.input, format=args.format, split_dir=args.out)
    cfg = cfg.with_overrides("split", ratios=args.ratios, split_seed=args.seed)
    if not cfg.data.input:
        raise UsageError("no input file: pass --input or set [data] input")
    ds = load_interactions(cfg.data.input, cfg.data.format)
    split = split_dataset(ds, cfg.split.ratios, cfg.split.split_seed)
    out = save_split(split, cfg.data.split_dir, ds)
    counts = split.counts()
    name = Path(cfg.data.input).stem
    header = ["Dataset", "Users", "Items", "Interactions", "Sparsity", "Train", "Validation", "Test"]
    row = [name, str(ds.user_count), str(ds.item_count), str(ds.interaction_count),
           f"{ds.sparsity:.5f}", str(counts["train"]), str(counts["validation"]), str(counts["test"])]
    widths = [max(len(h), len(c)) for h, c in zip(header, row)]
    print("  ".join(h.rjust(w) for h, w in zip(header, widths)))
    print("  ".join(c.rjust(w) for c, w in zip(row, widths)))
    print(f"split written to {out} (ratios {cfg.split.ratios}, seed {cfg.split.split_seed})")
    return EXIT_OK


def cmd_fit_filter(args) -> int:
    cfg = _filter_overrides(_load_config(args), args)
    spec = cfg.filter.build()
    out = Path(args.out) if args.out else Path(cfg.output.dir) / "filter.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(spec.to_json(), encoding="utf-8")
    coeffs = ", ".join(f"{c:+.6f}" for c in spec.propagation_coefficients())
    print(f"quadrant {spec.quadrant}  basis {spec.basis}  n={spec.degree}")
    print(f"fitted coefficients: [{coeffs}]")
    print(f"fit residual (RMSE over {spec.samples} points): {spec.fit_residual:.3e}")
    if args.waveform or args.svg:
        rows = waveform_table(spec, args.points)
        if args.waveform:
            path = Path(args.waveform)
            path.parent.mkdir(parents=True, exist_ok=True)
            keys = list(rows[0])
            lines = ["\t".join(keys)] + ["\t".join(f"{r[k]:.10g}" for k in keys) for r in rows]
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        if args.svg:
            from .plots import waveform_svg

            waveform_svg(rows, args.svg, title=f"quadrant {spec.quadrant} filter")
    if args.max_residual is not None and spec.fit_residual > args.max_residual:
        print(f"error: fit residual {spec.fit_residual:.3e} exceeds {args.max_residual:g}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _filter_overrides(_load_config(args), args)
    cfg = _train_overrides(cfg, args)
    cfg = cfg.with_overrides("data", split_dir=args.split_dir)
    out = _output_dir(cfg, args)
    cfg = cfg.with_overrides("output", dir=str(out))
    split = load_split(cfg.data.split_dir)
    adj = build_normalized_adjacency(split)
    variant = cfg.filter.variant_spec()
    if args.filter:
        spec = FilterSpec.from_json(Path(args.filter).read_text(encoding="utf-8"))
        if not spec.is_fitted:
            spec = spec.fit()
    else:
        spec = cfg.filter.build()
    flip = variant.space_flip
    out.mkdir(parents=True, exist_ok=True)
    resume = None
    state_path = out / STATE
    if args.resume:
        if not state_path.exists():
            raise DataError(f"{state_path}: no training state to resume from")
        resume = load_train_state(state_path)
    cfgmod.save(cfg, out / "config.toml")
    (out / "filter.json").write_text(spec.to_json(), encoding="utf-8")

    mode = "a" if resume is not None else "w"
    with open(out / TELEMETRY, mode, encoding="utf-8") as tel:
        head = {"event": "run", "variant": variant.name, "quadrant": spec.quadrant, "space_flip": flip,
                "coefficients": spec.propagation_coefficients().tolist(), "seeds": cfg.seeds(),
                "resumed_at": resume.next_epoch if resume is not None else None}
        tel.write(json.dumps(head, sort_keys=True) + "\n")

        def on_epoch(rec, state):
            tel.write(json.dumps({"event": "epoch", **asdict(rec)}, sort_keys=True) + "\n")
            tel.flush()
            save_train_state(state, state_path)

        model, records = train(split, adj, spec, cfg.train, space_flip=flip, resume=resume, on_epoch=on_epoch)
    save_checkpoint(model, out / CHECKPOINT)
    best = max((r.metrics[f"recall@{cfg.train.eval_cutoff}"] for r in records), default=None)
    summary = {"variant": variant.name, "epochs_run": len(records), "best_validation_recall": best,
               "checkpoint": CHECKPOINT, "seeds": cfg.seeds()}
    _write_json(out / "train_summary.json", summary)
    if best is not None:
        print(f"{variant.name}: {len(records)} epochs, best validation Recall@{cfg.train.eval_cutoff} {best:.4f}")
    print(f"checkpoint written to {out / CHECKPOINT}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    cfg = cfg.with_overrides("data", split_dir=args.split_dir)
    cfg = cfg.with_overrides("eval", ks=args.ks, split=args.split)
    out = _output_dir(cfg, args)
    ckpt = Path(args.checkpoint) if args.checkpoint else out / CHECKPOINT
    if not ckpt.exists():
        raise DataError(f"{ckpt}: checkpoint not found (run `simgcf train` first)")
    split = load_split(cfg.data.split_dir)
    adj = build_normalized_adjacency(split)
    model = load_checkpoint(ckpt, adj)
    target = "validation" if cfg.eval.split == "val" else cfg.eval.split
    label = args.label or ckpt.parent.name
    if target == "train":
        label += " [train split: diagnostic only]"
        print("note: train-split metrics are diagnostic and never used for model selection", file=sys.stderr)
    report = evaluate(model, split, cfg.eval.ks, target, label=label)
    path = Path(args.report) if args.report else out / f"report-{target}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.to_dict(with_timestamp=not args.no_timestamp), indent=2, sort_keys=True)
                    + "\n", encoding="utf-8")
    print(f"{target} split, {report.user_count} users")
    print(format_table({label: report}, cfg.eval.ks))
    return EXIT_OK


def _analysis_graph(args):
    if args.case_graph:
        return "case-graph", build_case_graph()
    if args.random:
        if args.nodes < 2:
            raise UsageError("--nodes must be >= 2")
        rng = np.random.default_rng(args.seed)
        n_users = args.nodes // 2
        return f"random(seed={args.seed}, nodes={args.nodes})", random_bipartite_graph(
            n_users, args.nodes - n_users, args.density, rng)
    if args.split_dir:
        split = load_split(args.split_dir)
        return str(args.split_dir), build_normalized_adjacency(split)
    raise UsageError("choose a graph: --case-graph, --random or --split-dir")


def _analysis_filters(args) -> list[tuple[str, np.ndarray]]:
    """(claimed quadrant, signed monomial coefficients) pairs to check."""
    if args.coefficients is not None:
        if not args.quadrant:
            raise UsageError("--coefficients needs --quadrant (the quadrant the signs claim)")
        return [(args.quadrant, np.asarray(args.coefficients, dtype=np.float64))]
    base = np.asarray([args.ratio ** i for i in range(args.degree + 1)])
    quadrants = [args.quadrant] if args.quadrant else ["I", "II", "III", "IV"]
    from .filters import signed_coefficients

    return [(q, signed_coefficients(base, q)) for q in quadrants]


def _is_forest(adj, dist) -> bool:
    # connected components from the hop table; a forest has nodes - components edges
    seen, components = np.zeros(adj.node_count, bool), 0
    for v in range(adj.node_count):
        if not seen[v]:
            components += 1
            seen |= dist[v] >= 0
    return adj.nnz // 2 == adj.node_count - components


def cmd_analyze(args) -> int:
    name, adj = _analysis_graph(args)
    if adj.node_count > args.cap:
        raise DataError(f"graph has {adj.node_count} nodes, above the dense lab cap of {args.cap}; "
                        "use a smaller graph (e.g. --random --nodes 32) or raise --cap")
    spectrum = dense_eigendecomposition(adj, args.cap)
    dist = hop_distances(adj)
    rng = np.random.default_rng(args.seed)
    e0 = rng.standard_normal((adj.node_count, args.dim))
    check_decay = args.decay == "on" or (args.decay == "auto" and (args.case_graph or _is_forest(adj, dist)))
    results, ok = {"graph": name, "nodes": adj.node_count, "decay_checked": bool(check_decay), "filters": []}, True
    svg_dir = Path(args.svg_dir) if args.svg_dir else None
    for quadrant, coeffs in _analysis_filters(args):
        n = len(coeffs) - 1
        cor = verify_sign_blindness(adj, coeffs, e0, args.tol, spectrum)
        s1 = exact_graph_signal(spectrum, coeffs).s
        gs = sign_pattern(s1, dist, quadrant, n, "GS", check_decay=check_decay)
        s2 = ges_matrix(adj, coeffs, np.eye(adj.node_count), cap=args.cap).s
        ges = sign_pattern(s2, dist, quadrant, 2 * n, "GES", check_decay=False)
        oe = odd_even_decomposition(adj, np.abs(coeffs), e0, args.tol, args.cap)
        entry = {"quadrant": quadrant, "coefficients": coeffs.tolist(), "sign_blindness": cor.to_dict(),
                 "gs_parity": gs.to_dict(), "ges_parity": ges.to_dict(), "odd_even": oe.to_dict()}
        results["filters"].append(entry)
        passed = cor.passed and gs.passed and ges.passed and oe.passed
        ok &= passed
        print(f"[{quadrant}] coefficients {np.round(coeffs, 4).tolist()}")
        print(f"  sign blindness   {'PASS' if cor.passed else 'FAIL'}  {cor.describe()}")
        decay = f" / {gs.decay_violations} decay" if check_decay else ""
        print(f"  GS parity        {'PASS' if gs.passed else 'FAIL'}  {gs.checked_pairs} pairs, "
              f"{gs.sign_violations} sign{decay} violations")
        print(f"  GES parity       {'PASS' if ges.passed else 'FAIL'}  {ges.checked_pairs} pairs, "
              f"{ges.sign_violations} sign violations")
        print(f"  odd/even split   {'PASS' if oe.passed else 'FAIL'}  low {oe.low_dev:.2e}, high {oe.high_dev:.2e}")
        if svg_dir is not None:
            from .plots import heatmap_svg

            labels = None
            if args.case_graph:
                order = [CASE_GRAPH_LABELS[k] for k in sorted(CASE_GRAPH_LABELS)]
                s1, s2 = s1[np.ix_(order, order)], s2[np.ix_(order, order)]
                labels = [str(k) for k in sorted(CASE_GRAPH_LABELS)]
            heatmap_svg(s1, svg_dir / f"gs-{quadrant}.svg", f"GS, quadrant {quadrant}", labels)
            heatmap_svg(s2, svg_dir / f"ges-{quadrant}.svg", f"GES, quadrant {quadrant}", labels)
    results["passed"] = bool(ok)
    if args.report:
        _write_json(Path(args.report), results)
    print("all checks passed" if ok else "some checks FAILED")
    return EXIT_OK if ok else EXIT_NUMERICAL


def _parse_report_arg(text: str) -> tuple[str, EvalReport]:
    name, sep, path = text.partition("=")
    if not sep:
        path, name = text, ""
    p = Path(path)
    if not p.exists():
        raise DataError(f"{p}: report not found")
    try:
        report = EvalReport.from_dict(json.loads(p.read_text(encoding="utf-8")))
    except (KeyError, ValueError, TypeError) as exc:
        raise DataError(f"{p}: not an evaluation report ({exc})") from None
    return name or report.label or p.stem, report


def cmd_report(args) -> int:
    reports = dict(_parse_report_arg(r) for r in args.reports)
    splits = {r.split for r in reports.values()}
    if len(splits) > 1:
        print(f"warning: reports come from different splits {sorted(splits)}", file=sys.stderr)
    if args.baseline_split:
        split = load_split(args.baseline_split)
        first = next(iter(reports.values()))
        reports["popularity"] = evaluate_popularity(split, sorted(first.metrics), first.split)
    table = format_table(reports, args.ks)
    print(table)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(table + "\n", encoding="utf-8")
    if args.svg:
        from .plots import metric_bars_svg

        ks = args.ks or sorted({k for r in reports.values() for k in r.metrics})
        bars = {name: {f"{m}@{k}": r.metrics[k][m] for k in ks if k in r.metrics for m in ("recall", "ndcg")}
                for name, r in reports.items()}
        metric_bars_svg(bars, args.svg)
    return EXIT_OK


def cmd_grid(args) -> int:
    cfg = _load_config(args)
    axes = []
    for item in args.set:
        key, sep, values = item.partition("=")
        section, dot, field = key.partition(".")
        if not (sep and dot and values):
            raise UsageError(f"--set expects section.key=v1,v2,..., got {item!r}")
        parsed = [json.loads(v) if v.strip()[:1] in "-0123456789tf[" else v for v in values.split(",")]
        axes.append((section, field, parsed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    index = []
    for k, combo in enumerate(itertools.product(*[a[2] for a in axes])):
        run = cfg
        for (section, field, _), value in zip(axes, combo):
            run = run.with_overrides(section, **{field: value})
        run = run.with_overrides("output", dir=str(Path(cfg.output.dir) / f"run-{k:03d}"))
        path = out / f"run-{k:03d}.toml"
        cfgmod.save(run, path)
        index.append({"config": path.name, **{f"{s}.{f}": v for (s, f, _), v in zip(axes, combo)}})
    _write_json(out / "grid.json", index)
    print(f"{len(index)} configs written to {out}")
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def _common(p):
    p.add_argument("--config", help="TOML run configuration; flags override its keys")
    p.add_argument("--threads", type=int, help="cap on BLAS worker threads")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")


def _filter_flags(p):
    p.add_argument("--variant", help=f"I, II, III, IV or one of {sorted(VARIANTS)}")
    p.add_argument("--basis", choices=("jacobi", "monomial"))
    p.add_argument("--degree", "-n", type=int, help="polynomial order n")
    p.add_argument("--a", type=float, help="Jacobi parameter a")
    p.add_argument("--b", type=float, help="Jacobi parameter b")
    p.add_argument("--mu", type=float, help="scaler amplitude")
    p.add_argument("--alpha", type=float, help="scaler steepness (negative: low-pass)")
    p.add_argument("--beta", type=float, help="scaler shift")
    p.add_argument("--base-coefficients", type=_floats, help="monomial backbone, e.g. 1,0,0,0")
    p.add_argument("--samples", type=int, help="fitting points on [-1, 1]")
    p.add_argument("--sample-seed", type=int, help="draw fitting points at random with this seed")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--scaler", dest="use_scaler", action="store_true", default=None)
    g.add_argument("--no-scaler", dest="use_scaler", action="store_false")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="simgcf", description="Spectral graph collaborative filtering toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("prepare", help="load interactions and write a per-user split")
    _common(p)
    p.add_argument("--input", help="interaction file (user, item per line)")
    p.add_argument("--format", choices=("tsv", "csv"))
    p.add_argument("--out", help="split directory")
    p.add_argument("--ratios", type=_floats, help="train,validation,test (default 0.8,0.1,0.1)")
    p.add_argument("--seed", type=int, help="split seed")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("fit-filter", help="fit monomial coefficients to a scaled filter")
    _common(p)
    _filter_flags(p)
    p.add_argument("--quadrant", choices=("I", "II", "III", "IV"))
    p.add_argument("--out", help="FilterSpec JSON path")
    p.add_argument("--waveform", help="write a (lambda, f, g, f', f'') TSV table")
    p.add_argument("--svg", help="write the waveform plot")
    p.add_argument("--points", type=int, default=41, help="waveform sample count")
    p.add_argument("--max-residual", type=float, help="fail if the fit RMSE exceeds this")
    p.set_defaults(func=cmd_fit_filter)

    p = sub.add_parser("train", help="train embeddings with BPR and early stopping")
    _common(p)
    _filter_flags(p)
    p.add_argument("--ablation", choices=ABLATIONS, help="ablation variant (overrides --variant)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--space-flip", dest="space_flip", action="store_true", default=None)
    g.add_argument("--no-space-flip", dest="space_flip", action="store_false")
    p.add_argument("--filter", help="use a FilterSpec JSON from fit-filter")
    p.add_argument("--split-dir")
    p.add_argument("--out", help="run directory")
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--reg-weight", type=float)
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--init-seed", type=int)
    p.add_argument("--sampler-seed", type=int)
    p.add_argument("--resume", action="store_true", help="continue from the run directory's saved state")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="Recall@k / NDCG@k of a checkpoint")
    _common(p)
    p.add_argument("--split-dir")
    p.add_argument("--out", help="run directory (default checkpoint and report location)")
    p.add_argument("--checkpoint")
    p.add_argument("--split", choices=("train", "validation", "val", "test"))
    p.add_argument("--ks", type=_ints, help="cutoffs (default 10,20)")
    p.add_argument("--label")
    p.add_argument("--report", help="report JSON path")
    p.add_argument("--no-timestamp", action="store_true", help="omit the timestamp for byte-stable reports")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze", help="dense spectral checks on a small graph")
    _common(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--case-graph", action="store_true")
    g.add_argument("--random", action="store_true")
    g.add_argument("--split-dir")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nodes", type=int, default=16)
    p.add_argument("--density", type=float, default=0.3)
    p.add_argument("--degree", "-n", type=int, default=3)
    p.add_argument("--ratio", type=float, default=0.5, help="geometric decay of the default filters")
    p.add_argument("--quadrant", choices=("I", "II", "III", "IV"))
    p.add_argument("--coefficients", type=_floats, help="signed monomial coefficients to check as --quadrant")
    p.add_argument("--decay", choices=("auto", "on", "off"), default="auto",
                   help="shortest-path decay check; auto enforces it on the case graph and on forests")
    p.add_argument("--dim", type=int, default=8, help="width of the random E0 used by the checks")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--cap", type=int, default=DENSE_CAP)
    p.add_argument("--report", help="write the results as JSON")
    p.add_argument("--svg-dir", help="write GS/GES heatmaps here")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="compare evaluation reports")
    _common(p)
    p.add_argument("reports", nargs="+", help="report JSON files, optionally NAME=PATH")
    p.add_argument("--ks", type=_ints)
    p.add_argument("--baseline-split", help="add a popularity column computed on this split")
    p.add_argument("--out", help="write the table here")
    p.add_argument("--svg", help="write a bar chart here")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("grid", help="emit one config per point of a parameter grid")
    _common(p)
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=V1,V2",
                   help="grid axis, e.g. filter.mu=0.5,1.0")
    p.add_argument("--out", required=True, help="directory for the emitted configs")
    p.set_defaults(func=cmd_grid)
    return parser


def _run(args) -> int:
    if args.threads is not None:
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=args.threads):
            return args.func(args)
    return args.func(args)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except (UsageError, ConfigError) as exc:
        print(f"simgcf {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RankDeficientError, NumericalError) as exc:
        print(f"simgcf {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ParseError, DataError, OSError) as exc:
        print(f"simgcf {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"simgcf {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
