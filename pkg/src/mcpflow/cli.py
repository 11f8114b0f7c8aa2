"""Command-line entry point.

Exit codes: 0 success, 2 validation error, 3 numeric/solver error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io as _io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .core import KernelConfig, mean_duration
from .datagen import GeneratorConfig, dataset_digest, generate
from .errors import SolverError, ValidationError
from .evaluate import (
    accuracy_report,
    occupancy_from_sequences,
    predict_events,
    relative_sim_error,
    simulate_cohort,
    split_for_simulation,
)
from .imbalance import STRATEGIES, synthetic_sequences
from .learner import SolverConfig
from .pipeline import holdout_split, prepare_samples, train_flow_model, train_markov

log = logging.getLogger("mcpflow")

# file locations are left out; input files enter the digest by content
OUTPUT_KEYS = {"out", "model", "data", "catalog", "func", "verbose"}


def _file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def config_digest(args: argparse.Namespace, inputs: list) -> str:
    """Hash of the command's flags and the contents of its input files."""
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in OUTPUT_KEYS}
    blob = json.dumps({"flags": flags, "inputs": [_file_digest(p) for p in inputs]}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _load_data(args):
    catalog_path = args.catalog or io.catalog_path_for(args.data)
    catalog = io.read_catalog(catalog_path)
    return io.read_dataset(args.data, catalog), catalog, [args.data, catalog_path]


def _sigma(value: str, sequences) -> float:
    if value == "auto":
        return mean_duration(sequences)
    try:
        return float(value)
    except ValueError:
        raise ValidationError(f"--sigma must be 'auto' or a number, got {value!r}") from None


def _beta0(value: str):
    if value == "auto":
        return "auto"
    try:
        return float(value)
    except ValueError:
        raise ValidationError(f"--beta0 must be 'auto' or a number, got {value!r}") from None


def _solver(args) -> SolverConfig:
    return SolverConfig(
        gamma=args.gamma,
        rho=args.rho,
        beta0=_beta0(args.beta0),
        epsilon=args.epsilon,
        max_outer=args.max_outer,
        max_inner=args.max_inner,
        seed=args.seed,
        beta_decay=args.beta_decay,
    )


def _floats(text: str | None):
    if text is None:
        return None
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise ValidationError(f"expected comma-separated numbers, got {text!r}") from None


def cmd_fit(args) -> int:
    sequences, catalog, inputs = _load_data(args)
    train, _ = holdout_split(sequences, args.holdout, args.seed)
    digest = config_digest(args, inputs)
    if args.method == "mc":
        model = train_markov(train, catalog)
        io.save_model(model, args.model, {"config_digest": digest})
        print(f"saved markov baseline to {args.model}")
        return 0
    kernel = KernelConfig(args.kernel, _sigma(args.sigma, train))
    model = train_flow_model(train, catalog, kernel, _solver(args), args.imbalance, args.balance_by,
                             args.folds, args.seed)
    io.save_model(model, args.model, {"config_digest": digest})
    print(f"kernel={kernel.variant} sigma={kernel.sigma:g} imbalance={args.imbalance}")
    print(json.dumps(model.report.get("solver", {}), sort_keys=True))
    if "augmented_counts" in model.report:
        print("augmented joint counts:", json.dumps(model.report["augmented_counts"]["joint"]))
    print(f"saved model to {args.model}")
    return 0


def _metrics_rows(model, sequences, catalog, args):
    ps, ts, pd, td = predict_events(model, sequences)
    acc_c = accuracy_report(ps, ts, range(1, catalog.n_states + 1))
    acc_d = accuracy_report(pd, td, range(1, catalog.n_durations + 1)) if len(td) else None
    rows = []
    for name, n, acc in acc_c.rows(catalog.states):
        rows.append(("AC_state", name, n, acc))
    rows.append(("AC_state", "overall", len(ts), acc_c.overall))
    if acc_d is not None:
        for name, n, acc in acc_d.rows(catalog.durations):
            rows.append(("AC_duration", name, n, acc))
        rows.append(("AC_duration", "overall", len(td), acc_d.overall))
    if args.rounds > 0:
        prefixes, starts, full = split_for_simulation(sequences)
        if prefixes:
            real = occupancy_from_sequences(full, starts, args.horizon, catalog.n_states)
            sim = simulate_cohort(model, prefixes, args.horizon, args.rounds, args.seed)
            err = relative_sim_error(real, sim)
            for name, e in zip(catalog.states, err.per_state):
                rows.append(("Err_state", name, len(prefixes), e))
            rows.append(("Err_state", "overall", len(prefixes), err.overall))
    return rows


def _fmt(v):
    return "undefined" if v is None else f"{v:.4f}"


def cmd_evaluate(args) -> int:
    sequences, catalog, inputs = _load_data(args)
    model = io.load_model(args.model, catalog)
    _, test = holdout_split(sequences, args.holdout, args.seed)
    test = test or sequences
    digest = config_digest(args, inputs + [args.model])
    rows = _metrics_rows(model, test, catalog, args)
    print(f"# config digest {digest}")
    print(f"{'metric':<12} {'class':<12} {'n':>7} {'value':>10}")
    for metric, name, n, v in rows:
        print(f"{metric:<12} {name:<12} {n:>7} {_fmt(v):>10}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["metric", "class", "n", "value", "config_digest"])
            for metric, name, n, v in rows:
                w.writerow([metric, name, n, "" if v is None else repr(float(v)), digest])
    return 0


def cmd_simulate(args) -> int:
    sequences, catalog, inputs = _load_data(args)
    model = io.load_model(args.model, catalog)
    digest = config_digest(args, inputs + [args.model])
    occ = simulate_cohort(model, [s for s in sequences if s.events], args.horizon, args.rounds, args.seed)
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["day", "state", "count", "config_digest"])
    for d in range(occ.horizon):
        for c, name in enumerate(catalog.states):
            w.writerow([d + 1, name, repr(float(occ.counts[c, d])), digest])
    if args.out:
        Path(args.out).write_text(buf.getvalue())
        print(f"wrote occupancy for {occ.horizon} days to {args.out}")
    else:
        sys.stdout.write(buf.getvalue())
    return 0


def cmd_generate(args) -> int:
    cfg = GeneratorConfig(
        n_subjects=args.subjects,
        n_states=args.states,
        n_durations=args.durations,
        n_static=args.static_dim,
        n_dynamic=args.dynamic_dim,
        window=args.window,
        kernel=KernelConfig(args.kernel, args.sigma),
        sparsity=args.sparsity,
        magnitude=_floats(args.magnitude),
        state_freqs=_floats(args.state_freqs),
        duration_freqs=_floats(args.duration_freqs),
        seed=args.seed,
    )
    data = generate(cfg)
    out = Path(args.out)
    io.write_dataset(data.sequences, out)
    io.write_catalog(data.catalog, io.catalog_path_for(out))
    manifest = data.manifest()
    manifest["config_digest"] = config_digest(args, [])
    manifest["dataset_digest"] = dataset_digest(data.sequences)
    out.with_name(out.name + ".manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    print(f"wrote {len(data.sequences)} sequences to {out}; dataset digest {manifest['dataset_digest']}")
    return 0


def cmd_preprocess(args) -> int:
    sequences, catalog, inputs = _load_data(args)
    if args.imbalance not in ("none", "synthetic"):
        raise ValidationError("only 'synthetic' (or 'none') produces an exportable dataset")
    kernel = KernelConfig(args.kernel, _sigma(args.sigma, sequences))
    out = list(sequences)
    if args.imbalance == "synthetic":
        samples, report = prepare_samples(sequences, catalog, kernel, "synthetic", args.balance_by, args.seed)
        out += synthetic_sequences(samples, kernel)
        print("augmented joint counts:", json.dumps(report["augmented_counts"]["joint"]))
    io.write_dataset(out, args.out)
    io.write_catalog(catalog, io.catalog_path_for(args.out))
    print(f"wrote {len(out)} records ({len(out) - len(sequences)} synthetic) to {args.out}; "
          f"config digest {config_digest(args, inputs)}")
    return 0


def cmd_sweep(args) -> int:
    sequences, catalog, inputs = _load_data(args)
    train, test = holdout_split(sequences, args.holdout, args.seed)
    test = test or train
    kernel = KernelConfig(args.kernel, _sigma(args.sigma, train))
    gammas = _floats(args.gammas)
    print(f"# config digest {config_digest(args, inputs)}")
    print(f"{'gamma':>10} {'nonzero':>8} {'loss':>14} {'AC_state':>9} {'AC_dur':>9}")
    base = _solver(args)
    for gamma in gammas:
        solver = SolverConfig(**{**base.__dict__, "gamma": gamma})
        model = train_flow_model(train, catalog, kernel, solver, args.imbalance, args.balance_by, None, args.seed)
        ps, ts, pd, td = predict_events(model, test)
        rep = model.report["solver"]
        ac_d = float(np.mean(pd == td)) if len(td) else float("nan")
        print(f"{gamma:>10g} {rep['nonzero_rows']:>8} {rep['loss']:>14.6g} {np.mean(ps == ts):>9.4f} {ac_d:>9.4f}")
    return 0


def _add_data(p):
    p.add_argument("--data", required=True, help="dataset file (JSON lines)")
    p.add_argument("--catalog", help="catalog sidecar (default: <data>.catalog.json)")


def _add_model_flags(p):
    p.add_argument("--kernel", choices=["mcp", "scp", "mpp", "lr"], default="mcp")
    p.add_argument("--sigma", default="auto", help="'auto' (mean duration) or a bandwidth in days")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--beta0", default="auto", help="initial step, or 'auto' for 1/Lipschitz")
    p.add_argument("--beta-decay", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--max-outer", type=int, default=200)
    p.add_argument("--max-inner", type=int, default=100)
    p.add_argument("--imbalance", choices=STRATEGIES, default="none")
    p.add_argument("--balance-by", choices=["joint", "state", "duration"], default="joint")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcpflow", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="train a model")
    _add_data(p)
    _add_model_flags(p)
    p.add_argument("--model", required=True, help="output model file")
    p.add_argument("--method", choices=["dmcp", "mc"], default="dmcp")
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--holdout", type=float, default=0.0, help="fraction of sequences held out")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("evaluate", help="accuracy and week-ahead simulation error")
    _add_data(p)
    p.add_argument("--model", required=True)
    p.add_argument("--holdout", type=float, default=0.0, help="score only the held-out part of this split")
    p.add_argument("--horizon", type=int, default=7)
    p.add_argument("--rounds", type=int, default=10, help="simulation rounds (0 skips simulation)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="machine-readable metrics (CSV)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate", help="simulate daily occupancy from cohort prefixes")
    _add_data(p)
    p.add_argument("--model", required=True)
    p.add_argument("--horizon", type=int, default=7)
    p.add_argument("--rounds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="occupancy CSV (default stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("generate", help="write a synthetic dataset from a planted model")
    p.add_argument("--out", required=True)
    p.add_argument("--subjects", type=int, default=500)
    p.add_argument("--states", type=int, default=4)
    p.add_argument("--durations", type=int, default=4)
    p.add_argument("--static-dim", type=int, default=10)
    p.add_argument("--dynamic-dim", type=int, default=30)
    p.add_argument("--window", type=float, default=60.0)
    p.add_argument("--kernel", choices=["mcp", "scp", "mpp", "lr"], default="mcp")
    p.add_argument("--sigma", type=float, default=2.0)
    p.add_argument("--sparsity", type=float, default=0.5)
    p.add_argument("--magnitude", default="0.5,1.5")
    p.add_argument("--state-freqs")
    p.add_argument("--duration-freqs")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("preprocess", help="export a class-balanced dataset")
    _add_data(p)
    p.add_argument("--out", required=True)
    p.add_argument("--imbalance", choices=STRATEGIES, default="synthetic")
    p.add_argument("--balance-by", choices=["joint", "state", "duration"], default="joint")
    p.add_argument("--kernel", choices=["mcp", "scp", "mpp", "lr"], default="mcp")
    p.add_argument("--sigma", default="auto")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("sweep", help="fit over a grid of group-lasso weights")
    _add_data(p)
    _add_model_flags(p)
    p.add_argument("--gammas", default="0,0.1,1,10")
    p.add_argument("--holdout", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
