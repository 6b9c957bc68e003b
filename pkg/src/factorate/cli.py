"""Command-line entry point.

Exit codes: 0 success, 1 invalid input (flags, config, panel contents),
2 file-system errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from factorate import config as cfgio
from factorate import harness
from factorate.assignment import assign
from factorate.dgp import build_truth
from factorate.errors import FactorateError, ValidationError
from factorate.estimator import estimate
from factorate.panel import PanelData, observe, read_panel_csv, write_panel_csv
from factorate.pcr import DEFAULT_STRATEGY, parse_rank

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the validation code instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _section(doc: dict, name: str, required: bool = False) -> dict:
    value = doc.get(name)
    if value is None:
        if required:
            raise ValidationError(f"config is missing the [{name}] section")
        return {}
    if not isinstance(value, dict):
        raise ValidationError(f"[{name}] must be a table/object")
    return value


def _layout(doc: dict) -> harness.PanelLayout:
    return cfgio._build(harness.PanelLayout, _section(doc, "layout"), skip=())


def _mechanism(doc: dict, default):
    sec = _section(doc, "mechanism")
    return cfgio.mechanism_from_dict(sec) if sec else default


def _options(doc: dict, name: str, allowed: set[str]) -> dict:
    sec = dict(_section(doc, name))
    unknown = set(sec) - allowed
    if unknown:
        raise ValidationError(f"unknown [{name}] fields {sorted(unknown)}")
    return sec


def sweep_config_from_document(doc: dict) -> harness.SweepConfig:
    opts = _options(doc, "sweep", {"target", "sizes", "n_seeds", "rank", "base_seed"})
    sizes = cfgio._tuplify(opts.pop("sizes", ((50, 50), (100, 100), (200, 200), (400, 400))))
    if not sizes or any(len(s) != 2 for s in sizes):
        raise ValidationError("sweep sizes must be a nonempty list of [N, T] pairs")
    n0, t0 = sizes[0]
    template = cfgio.dgp_config_from_dict(
        {"n_units": n0, "n_measurements": t0, **_section(doc, "dgp", required=True)}
    )
    return harness.SweepConfig(
        dgp=template,
        mechanism=_mechanism(doc, harness.SelectionOnU()),
        sizes=sizes,
        layout=_layout(doc),
        **opts,
    )


def normality_config_from_document(doc: dict) -> harness.NormalityConfig:
    opts = _options(doc, "normality", {"target", "n_reps", "base_seed", "rank"})
    return harness.NormalityConfig(
        dgp=cfgio.dgp_config_from_dict(_section(doc, "dgp", required=True)),
        mechanism=_mechanism(doc, harness.Rct(0.5)),
        layout=_layout(doc),
        **opts,
    )


def decay_ranks_from_document(doc: dict) -> list[int]:
    opts = _options(doc, "decay", {"ranks", "max_rank"})
    if "ranks" in opts:
        return [int(r) for r in opts["ranks"]]
    return list(range(1, int(opts.get("max_rank", 16)) + 1))


def _cmd_simulate(args) -> int:
    doc = cfgio.load_document(args.config)
    overrides = {"seed": args.seed} if args.seed is not None else {}
    dcfg = cfgio.dgp_config_from_dict(_section(doc, "dgp", required=True), **overrides)
    mech = _mechanism(doc, harness.Rct(0.5))
    sched = cfgio.schedule_from_dict(_section(doc, "schedule"))
    truth = build_truth(dcfg)
    a = assign(mech, truth.unit_factors, dcfg.n_measurements, seed=dcfg.seed, schedule=sched)
    panel = observe(truth, a)
    write_panel_csv(panel, args.out)
    if args.truth_out:
        harness.write_json(
            {
                "config": cfgio.to_plain(dcfg),
                "delta_e": truth.delta_e,
                "rank": truth.rank,
                "mean_tensor": truth.mean_tensor.tolist(),
            },
            args.truth_out,
        )
    return EXIT_OK


def _unit_index(panel: PanelData, label: str) -> int:
    if label in panel.unit_ids:
        return panel.unit_ids.index(label)
    try:
        n = int(label)
    except ValueError:
        raise ValidationError(f"unknown unit {label!r}") from None
    if not 0 <= n < panel.shape[0]:
        raise ValidationError(f"unit index {n} out of range")
    return n


def _cmd_estimate(args) -> int:
    panel = read_panel_csv(args.panel)
    t_star = panel.measurement_index(args.t_star)
    if args.units:
        target = [_unit_index(panel, u.strip()) for u in args.units.split(",") if u.strip()]
    elif args.target == "custom":
        raise ValidationError("--target custom needs --units")
    else:
        target = args.target
    strategy = parse_rank(args.rank) if args.rank else DEFAULT_STRATEGY
    result = estimate(panel, t_star, target, strategy)
    payload = result.to_dict()
    payload["t_star_label"] = panel.measurement_ids[t_star]
    payload["beta0"]["unit_labels"] = [panel.unit_ids[n] for n in result.beta0.units]
    payload["beta1"]["unit_labels"] = [panel.unit_ids[n] for n in result.beta1.units]
    text = json.dumps(payload, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = sweep_config_from_document(cfgio.load_document(args.config))
    records = harness.run_consistency_sweep(cfg, workers=args.workers)
    summary = harness.write_sweep_outputs(cfg, records, args.out_dir)
    for s in summary["sizes"]:
        print(f"N={s['n_units']} T={s['n_measurements']} median|err|={s['median_abs_error']:.6g}")
    return EXIT_OK


def _cmd_normality(args) -> int:
    cfg = normality_config_from_document(cfgio.load_document(args.config))
    rows, summary = harness.run_normality_study(cfg, workers=args.workers)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    harness.write_table_csv(rows, harness.NORMALITY_FIELDS, out / "records.csv")
    summary["config"] = cfgio.to_plain(cfg)
    harness.write_json(summary, out / "summary.json")
    o = summary["oracle_weights"]
    print(f"oracle weights: sd={o['sd']:.4f} coverage={o['coverage_1.96']:.3f}")
    return EXIT_OK


def _cmd_decay(args) -> int:
    doc = cfgio.load_document(args.config)
    dcfg = cfgio.dgp_config_from_dict(_section(doc, "dgp", required=True))
    curve = harness.run_holder_decay(dcfg, decay_ranks_from_document(doc))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    harness.write_curve_csv(curve, out / "curve.csv")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="factorate", description="Synthetic-weight treatment effect estimation and simulations.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate a panel from a config and write it as CSV")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--truth-out", help="optional JSON dump of the mean tensor")
    s.set_defaults(func=_cmd_simulate)

    e = sub.add_parser("estimate", help="estimate a treatment effect from a panel CSV")
    e.add_argument("--panel", required=True)
    e.add_argument("--t-star", required=True, help="measurement label (or position)")
    e.add_argument("--target", default="ate", choices=("ate", "att", "atu", "custom"))
    e.add_argument("--units", help="comma-separated unit labels for a custom target set")
    e.add_argument("--rank", help="fixed:K, energy:FRACTION or hard:MULTIPLIER")
    e.add_argument("--out", help="output JSON path (stdout if omitted)")
    e.set_defaults(func=_cmd_estimate)

    for name, func, text in (
        ("sweep", _cmd_sweep, "consistency sweep over growing panel sizes"),
        ("normality", _cmd_normality, "standardized-error study"),
        ("decay", _cmd_decay, "approximation error versus rank"),
    ):
        c = sub.add_parser(name, help=text)
        c.add_argument("--config", required=True)
        c.add_argument("--out-dir", required=True)
        if name != "decay":
            c.add_argument("--workers", type=int, help=f"worker threads (default ${harness.THREADS_ENV} or 1)")
        c.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FactorateError as exc:
        print(f"factorate: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"factorate: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
