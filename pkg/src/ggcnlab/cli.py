"""Command-line surface: theory verification, synthetic data generation,
training, depth sweeps, ablations, degree bins, and the case study.

Exit codes: 0 success, 1 validation/usage error, 2 internal error.
Reports are deterministic JSON (sorted keys, shortest-repr floats): identical
flags and seed produce byte-identical files regardless of GGCNLAB_THREADS.
"""

import argparse
import sys

import numpy as np

from . import binning, dataio, dynamics, train as train_mod
from .errors import GgcnLabError, InvalidRangeError
from .graph import node_homophily, relative_degrees
from .layers import DecaySchedule, ModelConfig, save_checkpoint
from .train import TrainConfig


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _add_common(p, data=True):
    if data:
        p.add_argument("--data", "--graph", dest="data", required=True,
                       metavar="DIR", help="dataset directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", metavar="PATH", help="write a JSON report here")


def _add_model(p):
    p.add_argument("--model", choices=("mlp", "gcn", "base", "ggcn"), default="ggcn")
    p.add_argument("--hidden", type=int, default=16)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--flags", default="",
                   help="comma list from {sign,deg,decay,norm=batch|layer}")
    p.add_argument("--eta", type=float, default=0.5)
    p.add_argument("--decay-k", type=float, default=3.0)
    p.add_argument("--decay-l0", type=int, default=1)


def _add_train(p):
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--weight-decay", type=float, default=0.0)
    p.add_argument("--max-epochs", type=int, default=1000)
    p.add_argument("--patience", type=int, default=100)
    p.add_argument("--splits", type=int, default=1,
                   help="number of generated stratified splits")
    p.add_argument("--splits-file", metavar="PATH",
                   help="use splits from this JSON file instead")


def _parse_depths(raw):
    try:
        depths = [int(x) for x in raw.split(",") if x.strip()]
    except ValueError:
        raise InvalidRangeError(f"bad --depths list {raw!r}")
    if not depths or any(d < 1 for d in depths):
        raise InvalidRangeError(f"--depths must be positive integers, got {raw!r}")
    return depths


def _model_config(args, depth):
    use_sign = use_deg = use_decay = False
    norm = None
    for item in args.flags.split(","):
        item = item.strip()
        if not item:
            continue
        if item == "sign":
            use_sign = True
        elif item == "deg":
            use_deg = True
        elif item == "decay":
            use_decay = True
        elif item.startswith("norm="):
            norm = item[5:]
        else:
            raise InvalidRangeError(f"unknown flag {item!r} in --flags")
    return ModelConfig(
        arch=args.model, depth=depth, hidden_dim=args.hidden,
        dropout_p=args.dropout, use_sign=use_sign,
        use_degree_correction=use_deg, use_decay=use_decay, norm=norm,
        decay=DecaySchedule(eta=args.eta, k=args.decay_k, l0=args.decay_l0),
    )


def _train_config(args):
    return TrainConfig(
        lr=args.lr, weight_decay=args.weight_decay,
        max_epochs=args.max_epochs, patience=args.patience, seed=args.seed,
    )


def _splits_for(args, ds):
    if getattr(args, "splits_file", None):
        return dataio.load_splits(args.splits_file)
    return dataio.generate_splits(
        ds, seeds=range(args.seed, args.seed + args.splits)
    )


def _load(args):
    ds = dataio.load_dataset(args.data)
    iso = ds.isolated
    if iso.size:
        sys.stderr.write(f"warning: {iso.size} isolated nodes: {iso.tolist()}\n")
    return ds


def _feature_model(args):
    mu = np.full(args.dim, args.mu / np.sqrt(args.dim))
    sigma = np.full(args.dim, args.sigma)
    return dynamics.ClassFeatureModel(mu=mu, sigma=sigma)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_verify_theory(args):
    ds = _load(args)
    g = ds.graph
    model = _feature_model(args)
    report = dynamics.classify_cases(g, ds.labels)
    est = dynamics.mc_propagate(g, ds.labels, model, scheme=args.scheme,
                                trials=args.trials, seed=args.seed)
    signs = dynamics.label_signs(ds.labels)
    mu_norm2 = float(model.mu @ model.mu)
    vf = dynamics.variance_factors(g)
    exact_var = dynamics.propagate_variances(g, ds.labels, model, scheme=args.scheme)

    nodes = []
    zs = []
    for i in range(g.n):
        analytic_mean = report.gamma[i] * signs[i] * model.mu
        se = est.standard_error[i]
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se > 0, (est.mean[i] - analytic_mean) / se, 0.0)
        zmax = float(np.max(np.abs(z)))
        zs.append(zmax)
        gamma_mc = float(est.mean[i] @ model.mu / (signs[i] * mu_norm2))
        var_rel = None
        if np.all(exact_var[i] > 0):
            var_rel = float(np.max(np.abs(est.variance[i] / exact_var[i] - 1.0)))
        nodes.append({
            "node": i,
            "gamma_analytic": float(report.gamma[i]),
            "case": report.case[i].name,
            "gamma_mc": gamma_mc,
            "z_score": zmax,
            "variance_factor": float(vf[i]),
            "variance_rel_err": var_rel,
        })
    payload = {
        "command": "verify-theory",
        "n": g.n, "trials": args.trials, "seed": args.seed,
        "scheme": args.scheme,
        "mu": model.mu.tolist(), "sigma": model.sigma.tolist(),
        "nodes": nodes,
        "max_abs_z": float(max(zs)),
        "frac_z_le_4": float(np.mean(np.asarray(zs) <= 4.0)),
    }
    if args.e is not None:
        gs = dynamics.mc_signed(g, ds.labels, model, args.e,
                                trials=args.trials, seed=args.seed)
        signed_nodes = []
        szs = []
        rbar = relative_degrees(g).rbar
        for i in range(g.n):
            gamma_s, case_s = dynamics.gamma_signed(args.e, int(g.degrees[i]), float(rbar[i]))
            analytic_mean = gamma_s * signs[i] * model.mu
            se = gs.standard_error[i]
            with np.errstate(divide="ignore", invalid="ignore"):
                z = np.where(se > 0, (gs.mean[i] - analytic_mean) / se, 0.0)
            zmax = float(np.max(np.abs(z)))
            szs.append(zmax)
            signed_nodes.append({
                "node": i, "gamma_analytic": float(gamma_s),
                "case": case_s.name, "z_score": zmax,
            })
        payload["signed"] = {
            "e": args.e, "nodes": signed_nodes,
            "max_abs_z": float(max(szs)),
        }
    _emit(args, payload,
          f"max |z| = {payload['max_abs_z']:.3f} over {g.n} nodes "
          f"({payload['frac_z_le_4']*100:.1f}% within 4 SE)")
    return 0


def _cmd_gen_synth(args):
    parts = args.degree.split(":")
    if parts[0] == "regular" and len(parts) == 2:
        degree_model = ("regular", int(parts[1]))
    elif parts[0] == "powerlaw" and len(parts) == 2:
        exponent, dmin, dmax = parts[1].split(",")
        degree_model = ("powerlaw", float(exponent), int(dmin), int(dmax))
    else:
        raise InvalidRangeError(
            f"bad --degree {args.degree!r}; use regular:D or powerlaw:EXP,DMIN,DMAX"
        )
    spec = dataio.SynthSpec(
        n=args.n, target_h=args.target_h, degree_model=degree_model,
        feature_model=_feature_model(args), seed=args.seed,
    )
    ds = dataio.generate_synthetic(spec)
    dataio.save_dataset(ds, args.out_dir)
    if args.splits:
        splits = dataio.generate_splits(ds, seeds=range(args.seed, args.seed + args.splits))
        dataio.save_splits(splits, f"{args.out_dir}/splits.json")
    h = node_homophily(ds.graph, ds.labels).graph_h
    print(f"wrote {args.out_dir}: n={ds.graph.n} edges={ds.graph.n_edges} "
          f"graph_h={h:.4f} (target {args.target_h})")
    return 0


def _run_result_payload(res):
    return {
        "test_accuracy": res.test_accuracy,
        "best_val_accuracy": res.best_val_accuracy,
        "best_epoch": res.best_epoch,
        "per_layer_effective_homophily": res.per_layer_effective_homophily,
    }


def _cmd_train(args):
    depths = _parse_depths(args.depths)
    if len(depths) != 1:
        raise InvalidRangeError("train takes a single --depths value")
    ds = _load(args)
    splits = _splits_for(args, ds)
    mc = _model_config(args, depths[0])
    res = train_mod.train(mc, ds, splits[0], _train_config(args))
    if args.checkpoint:
        save_checkpoint(res.params, args.checkpoint)
    payload = {"command": "train", "model": args.model, "depth": depths[0],
               "seed": args.seed, **_run_result_payload(res)}
    _emit(args, payload,
          f"{args.model} depth {depths[0]}: test accuracy {res.test_accuracy:.4f} "
          f"(val {res.best_val_accuracy:.4f} at epoch {res.best_epoch})")
    return 0


def _cmd_sweep_depth(args):
    depths = _parse_depths(args.depths)
    ds = _load(args)
    splits = _splits_for(args, ds)
    mc = _model_config(args, depths[0])
    sweep = train_mod.depth_sweep(mc, ds, splits, depths, _train_config(args))
    payload = {"command": "sweep-depth", "model": args.model,
               "seed": args.seed, "n_splits": len(splits), **sweep}
    lines = [f"{args.model} depth sweep over {len(splits)} split(s):"]
    for row in sweep["rows"]:
        lines.append(f"  depth {row['depth']:>3}: {row['mean']:.4f} +- {row['stdev']:.4f}")
    lines.append(f"  best depth: {sweep['best_depth']}")
    if args.csv:
        dataio.save_table_csv(sweep["rows"], ["depth", "mean", "stdev"], args.csv)
    _emit(args, payload, "\n".join(lines))
    return 0


def _cmd_ablation(args):
    depths = _parse_depths(args.depths)
    ds = _load(args)
    splits = _splits_for(args, ds)
    grid = train_mod.ablation_grid(ds, splits, depths, _train_config(args),
                                   hidden_dim=args.hidden, dropout_p=args.dropout)
    payload = {"command": "ablation", "seed": args.seed,
               "n_splits": len(splits),
               "cells": dict(grid)}
    lines = ["ablation (rows: depth, columns: variant):"]
    for label, sweep in grid.items():
        row = "  " + label.ljust(10)
        for r in sweep["rows"]:
            row += f" d{r['depth']}={r['mean']:.4f}"
        lines.append(row)
    if args.csv:
        rows = []
        for label, sweep in grid.items():
            for r in sweep["rows"]:
                rows.append({"variant": label, "depth": r["depth"],
                             "mean": r["mean"], "stdev": r["stdev"]})
        dataio.save_table_csv(rows, ["variant", "depth", "mean", "stdev"], args.csv)
    _emit(args, payload, "\n".join(lines))
    return 0


def _cmd_bins(args):
    b = binning.degree_bins(args.dmin, args.dmax, args.n)
    for lo, hi in b.bounds:
        print(f"[{lo},{hi}]" if lo <= hi else "(no integer degrees)")
    payload = {
        "command": "bins", "d_min": args.dmin, "d_max": args.dmax, "n": args.n,
        "bounds": [list(x) for x in b.bounds],
        "real_boundaries": [list(x) for x in b.boundaries],
    }
    if args.out:
        dataio.save_report(payload, args.out)
    return 0


def _cmd_case_study(args):
    depths = _parse_depths(args.depths)
    ds = _load(args)
    splits = _splits_for(args, ds)
    mc = _model_config(args, depths[0])
    table = binning.case_study(ds, splits, depths, model_config=mc,
                               train_config=_train_config(args), n_bins=args.bins)
    payload = {
        "command": "case-study", "model": args.model, "seed": args.seed,
        "bins": [list(x) for x in table.bins.bounds],
        "rows": table.rows,
        "initial_stage_last_depth": table.initial_stage_last_depth,
        "clamped_degrees": table.clamped,
        "eff_h_population": "test nodes",
    }
    lines = ["case study (per bin: accuracy / mean effective homophily):"]
    header = "  depth " + " ".join(
        (f"[{lo},{hi}]" if lo <= hi else "(none)").rjust(13)
        for lo, hi in table.bins.bounds)
    lines.append(header)
    for row in table.rows:
        cells = []
        for pb in row["per_bin"]:
            if pb["population"]:
                cells.append(f"{pb['accuracy']:.3f}/{pb['mean_eff_h']:.3f}".rjust(13))
            else:
                cells.append("-".rjust(13))
        lines.append(f"  {row['depth']:>5} " + " ".join(cells))
    if table.initial_stage_last_depth is not None:
        lines.append(f"  all bins keep mean effective homophily > 0.5 up to depth "
                     f"{table.initial_stage_last_depth}")
    if args.csv:
        rows = []
        for row in table.rows:
            for pb in row["per_bin"]:
                rows.append({
                    "depth": row["depth"], "bin_lo": pb["bin"][0], "bin_hi": pb["bin"][1],
                    "accuracy": pb["accuracy"], "mean_eff_h": pb["mean_eff_h"],
                    "population": pb["population"],
                })
        dataio.save_table_csv(
            rows, ["depth", "bin_lo", "bin_hi", "accuracy", "mean_eff_h", "population"],
            args.csv)
    _emit(args, payload, "\n".join(lines))
    return 0


def _cmd_convert_splits(args):
    split = dataio.load_split_masks(args.infile)
    dataio.save_splits(split, args.out_path)
    print(f"wrote {args.out_path}: train={len(split['train'])} "
          f"val={len(split['val'])} test={len(split['test'])}")
    return 0


def _emit(args, payload, summary):
    print(summary)
    if getattr(args, "out", None):
        dataio.save_report(payload, args.out)
        print(f"report: {args.out}")


def build_parser():
    p = _Parser(prog="ggcnlab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    vt = sub.add_parser("verify-theory", help="Monte-Carlo check of the drift factors")
    _add_common(vt)
    vt.add_argument("--trials", type=int, default=100_000)
    vt.add_argument("--scheme", choices=("renormalized", "row"), default="renormalized")
    vt.add_argument("--dim", type=int, default=1)
    vt.add_argument("--mu", type=float, default=1.0)
    vt.add_argument("--sigma", type=float, default=1.0)
    vt.add_argument("--e", type=float, default=None,
                    help="also verify signed messages at this error rate")
    vt.set_defaults(fn=_cmd_verify_theory)

    gs = sub.add_parser("gen-synth", help="generate a synthetic dataset directory")
    gs.add_argument("--n", type=int, required=True)
    gs.add_argument("--target-h", type=float, required=True)
    gs.add_argument("--degree", default="regular:4",
                    help="regular:D or powerlaw:EXP,DMIN,DMAX")
    gs.add_argument("--dim", type=int, default=1)
    gs.add_argument("--mu", type=float, default=1.0)
    gs.add_argument("--sigma", type=float, default=1.0)
    gs.add_argument("--seed", type=int, default=0)
    gs.add_argument("--splits", type=int, default=0,
                    help="also write this many stratified splits")
    gs.add_argument("--out", dest="out_dir", required=True, metavar="DIR")
    gs.set_defaults(fn=_cmd_gen_synth)

    tr = sub.add_parser("train", help="single training run")
    _add_common(tr)
    _add_model(tr)
    _add_train(tr)
    tr.add_argument("--depths", default="2")
    tr.add_argument("--checkpoint", metavar="PATH")
    tr.set_defaults(fn=_cmd_train)

    sw = sub.add_parser("sweep-depth", help="accuracy vs depth over splits")
    _add_common(sw)
    _add_model(sw)
    _add_train(sw)
    sw.add_argument("--depths", default="2,4,8")
    sw.add_argument("--csv", metavar="PATH")
    sw.set_defaults(fn=_cmd_sweep_depth)

    ab = sub.add_parser("ablation", help="mechanism grid on the base model")
    _add_common(ab)
    _add_model(ab)
    _add_train(ab)
    ab.add_argument("--depths", default="2")
    ab.add_argument("--csv", metavar="PATH")
    ab.set_defaults(fn=_cmd_ablation)

    bn = sub.add_parser("bins", help="logarithmic degree bins")
    bn.add_argument("--dmin", type=int, required=True)
    bn.add_argument("--dmax", type=int, required=True)
    bn.add_argument("--n", type=int, required=True)
    bn.add_argument("--out", metavar="PATH")
    bn.set_defaults(fn=_cmd_bins)

    cs = sub.add_parser("case-study", help="per-degree-bin accuracy and homophily")
    _add_common(cs)
    _add_model(cs)
    _add_train(cs)
    cs.add_argument("--depths", default="2,4,8")
    cs.add_argument("--bins", type=int, default=5)
    cs.add_argument("--csv", metavar="PATH")
    cs.set_defaults(fn=_cmd_case_study)

    cv = sub.add_parser("convert-splits", help="boolean split masks to index lists")
    cv.add_argument("--in", dest="infile", required=True, metavar="PATH")
    cv.add_argument("--out", dest="out_path", required=True, metavar="PATH")
    cv.set_defaults(fn=_cmd_convert_splits)

    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 0
    except GgcnLabError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except Exception as exc:  # internal fault: anything we did not anticipate
        sys.stderr.write(f"internal error: {type(exc).__name__}: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
