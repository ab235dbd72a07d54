"""Command-line surface: generate, homophily, train, evaluate, sweep,
bias-sweep, ingest.

Every command reads an optional flat key=value config file; command-line
flags override config keys, and each output directory receives the fully
resolved configuration for provenance. Exit codes: 0 success, 1 bad
configuration or input, 2 runtime failures recorded.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .generate import GeneratorConfig, JointDistribution, generate
from .graph import global_homophily, homophily_histogram, homophily_profile
from .ingest import IngestError, ingest, write_id_map
from .io import (ConfigError, fmt_float, parse_config, read_graph_bundle,
                 read_predictions_csv, write_config, write_graph_bundle,
                 write_histogram_csv, write_predictions_csv,
                 write_stratified_csv, write_trace_csv)
from .metrics import fairness_report, stratified_report
from .models import (MODEL_NAMES, DivergenceError, ModelConfig, RunError, fit,
                     make_splits, save_params)
from .seeding import derive_seed
from .sweep import DEFAULT_GRID, SweepSpec, bias_sweep_spec, sweep

__all__ = ["main"]


class CLIError(Exception):
    """Bad invocation or configuration."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; route through CLIError so
    # exit code 2 stays reserved for recorded runtime failures.
    def error(self, message):
        raise CLIError(f"{self.prog}: {message}")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def _strings(text: str) -> tuple[str, ...]:
    return tuple(tok.strip() for tok in text.split(",") if tok.strip())


def _resolve(args, config_keys: dict[str, object]) -> dict:
    """Merge config-file values with flag overrides.

    config_keys maps key -> (converter, default); a flag value of None
    means "not given on the command line".
    """
    file_cfg = parse_config(args.config) if getattr(args, "config", None) else {}
    unknown = set(file_cfg) - set(config_keys)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}; "
                          f"known: {sorted(config_keys)}")
    out = {}
    for key, (conv, default) in config_keys.items():
        flag = getattr(args, key, None)
        if flag is not None:
            out[key] = flag
        elif key in file_cfg:
            out[key] = conv(file_cfg[key])
        else:
            out[key] = default
    missing = [k for k, v in out.items() if v is None]
    if missing:
        raise ConfigError(f"missing required settings: {missing} "
                          "(set them as flags or config keys)")
    return out


def _echo(msg: str) -> None:
    print(msg)


# -- generate -----------------------------------------------------------------

_GENERATE_KEYS = {
    "out": (str, None),
    "n_nodes": (int, 1000),
    "edges_per_node": (int, 10),
    "h_c": (float, None),
    "h_s": (float, None),
    "joint": (str, "uniform"),
    "feature_bias": (float, 1.0),
    "feature_dim": (int, 2),
    "feature_std": (float, 1.0),
    "seed": (int, 0),
}


def cmd_generate(args) -> int:
    cfg = _resolve(args, _GENERATE_KEYS)
    gen_cfg = GeneratorConfig(
        n_nodes=cfg["n_nodes"], edges_per_node=cfg["edges_per_node"],
        h_c=cfg["h_c"], h_s=cfg["h_s"],
        joint=JointDistribution.from_mode(cfg["joint"]),
        feature_bias=cfg["feature_bias"], feature_dim=cfg["feature_dim"],
        feature_std=cfg["feature_std"], seed=cfg["seed"])
    g, attrs = generate(gen_cfg)
    out = Path(cfg["out"])
    write_graph_bundle(out, g, attrs, generator_config=gen_cfg)
    write_config(out / "generate.config", {k: cfg[k] for k in _GENERATE_KEYS})
    _echo(f"wrote bundle {out} ({g.n_nodes} nodes, {g.n_edges} edges)")
    return 0


# -- homophily ----------------------------------------------------------------

def cmd_homophily(args) -> int:
    g, attrs, _ = read_graph_bundle(args.graph)
    ks = tuple(int(k) for k in _strings(args.k))
    if any(k not in (1, 2) for k in ks):
        raise ConfigError(f"k values must be 1 or 2, got {args.k!r}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    profile = homophily_profile(g, attrs.class_labels, attrs.sensitive, ks=ks)
    for which, labels in (("class", attrs.class_labels),
                          ("sens", attrs.sensitive)):
        for k in ks:
            hist = homophily_histogram(profile, which, k, args.bin_width)
            write_histogram_csv(out / f"hist_{which}_k{k}.csv", hist)
    summary = {
        "global_class_homophily": global_homophily(g, attrs.class_labels),
        "global_sens_homophily": global_homophily(g, attrs.sensitive),
        "n_nodes": g.n_nodes,
        "n_edges": g.n_edges,
        "k": list(ks),
        "bin_width": args.bin_width,
    }
    with open(out / "global.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _echo(f"global homophily: class {summary['global_class_homophily']:.4f}, "
          f"sens {summary['global_sens_homophily']:.4f}; histograms in {out}")
    return 0


# -- train --------------------------------------------------------------------

_TRAIN_KEYS = {
    "model": (str, None),
    "hidden_dim": (int, 16),
    "depth": (int, 2),
    "dropout": (float, None),
    "lr": (float, 0.01),
    "weight_decay": (float, 5e-4),
    "epochs": (int, 300),
    "seed": (int, 0),
    "split_seed": (int, None),
    "out": (str, None),
}


def cmd_train(args) -> int:
    cfg = _resolve(args, {
        **_TRAIN_KEYS,
        "dropout": (float, -1.0),      # -1 = per-model default
        "split_seed": (int, -1),       # -1 = derive from seed
    })
    g, attrs, _ = read_graph_bundle(args.graph)
    dropout = None if cfg["dropout"] < 0 else cfg["dropout"]
    split_seed = (derive_seed(cfg["seed"], "splits") if cfg["split_seed"] < 0
                  else cfg["split_seed"])
    model_cfg = ModelConfig(family=cfg["model"], hidden_dim=cfg["hidden_dim"],
                            depth=cfg["depth"], dropout=dropout, lr=cfg["lr"],
                            weight_decay=cfg["weight_decay"],
                            epochs=cfg["epochs"], seed=cfg["seed"])
    splits = make_splits(g.n_nodes, split_seed)
    result = fit(g, attrs, splits, model_cfg)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_predictions_csv(out / "preds.csv", result.predictions, attrs, splits)
    write_trace_csv(out / "trace.csv", result.trace)
    save_params(out / "params.npz", cfg["model"], result.params)
    resolved = dict(cfg)
    resolved["split_seed"] = split_seed
    resolved["dropout"] = model_cfg.dropout
    write_config(out / "train.config", resolved)
    test_idx = np.flatnonzero(splits.test)
    rep = fairness_report(result.predictions, attrs.class_labels,
                          attrs.sensitive, test_idx)
    _echo(f"{cfg['model']}: best val F1 {result.best_val_f1:.4f} at epoch "
          f"{result.best_epoch}; test F1 {rep.f1:.4f}, acc {rep.accuracy:.4f}")
    _echo(f"wrote {out}/preds.csv, trace.csv, params.npz")
    return 0


# -- evaluate -----------------------------------------------------------------

def cmd_evaluate(args) -> int:
    preds, truth, sens, splits = read_predictions_csv(args.predictions)
    g, attrs, _ = read_graph_bundle(args.graph)
    if g.n_nodes != preds.n_nodes:
        raise ConfigError(f"graph has {g.n_nodes} nodes but predictions file "
                          f"has {preds.n_nodes}")
    if (truth != attrs.class_labels).any() or (sens != attrs.sensitive).any():
        raise ConfigError("predictions file labels disagree with the graph bundle")
    if args.split == "all":
        eval_nodes = np.arange(g.n_nodes)
    else:
        eval_nodes = np.flatnonzero(getattr(splits, args.split))
    profile = homophily_profile(g, attrs.class_labels, attrs.sensitive,
                                ks=(args.k,))
    report = stratified_report(preds, attrs, profile, args.k,
                               eval_nodes=eval_nodes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_stratified_csv(out / "report.csv", report)
    glob = fairness_report(preds, attrs.class_labels, attrs.sensitive, eval_nodes)
    summary = {
        "split": args.split,
        "k": args.k,
        "n_evaluated": int(eval_nodes.size),
        "undefined_local_homophily": report.undefined_node_count,
        "f1": glob.f1,
        "accuracy": glob.accuracy,
        "delta_sp": glob.delta_sp,
        "delta_eo": glob.delta_eo,
    }
    with open(out / "global.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    sp = "undefined" if glob.delta_sp is None else f"{glob.delta_sp:.4f}"
    eo = "undefined" if glob.delta_eo is None else f"{glob.delta_eo:.4f}"
    _echo(f"{args.split} nodes: F1 {glob.f1:.4f}, acc {glob.accuracy:.4f}, "
          f"dSP {sp}, dEO {eo}; stratified report in {out}/report.csv")
    return 0


# -- sweep / bias-sweep ---------------------------------------------------------

_SWEEP_KEYS = {
    "out": (str, None),
    "h_c_list": (_floats, DEFAULT_GRID),
    "h_s_list": (_floats, DEFAULT_GRID),
    "joint": (str, "uniform"),
    "e_list": (_floats, (1.0,)),
    "graphs_per_cell": (int, 10),
    "runs_per_model": (int, 3),
    "families": (_strings, ("homophilous", "heterophilous")),
    "master_seed": (int, 0),
    "n_nodes": (int, 1000),
    "edges_per_node": (int, 10),
    "feature_dim": (int, 2),
    "feature_std": (float, 1.0),
    "k": (int, 1),
    "workers": (int, 1),
}


def _sweep_outcome_to_exit(outcome) -> int:
    if outcome.failures:
        _echo(f"{len(outcome.failures)} of {outcome.n_runs} runs failed; "
              f"see {outcome.out_dir / 'runs.csv'}")
        return 2
    _echo(f"{outcome.n_runs} runs ok; aggregates in {outcome.out_dir / 'aggregate'}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _resolve(args, _SWEEP_KEYS)
    spec = SweepSpec(out_dir=cfg["out"], h_c_list=cfg["h_c_list"],
                     h_s_list=cfg["h_s_list"], joint_mode=cfg["joint"],
                     e_list=cfg["e_list"],
                     graphs_per_cell=cfg["graphs_per_cell"],
                     runs_per_model=cfg["runs_per_model"],
                     families=cfg["families"], master_seed=cfg["master_seed"],
                     n_nodes=cfg["n_nodes"],
                     edges_per_node=cfg["edges_per_node"],
                     feature_dim=cfg["feature_dim"],
                     feature_std=cfg["feature_std"], k=cfg["k"],
                     workers=cfg["workers"])
    if args.quick:
        spec = spec.quick()
    return _sweep_outcome_to_exit(sweep(spec, verbose=not args.no_progress))


_BIAS_KEYS = dict(_SWEEP_KEYS)
del _BIAS_KEYS["h_s_list"]
_BIAS_KEYS["h_s"] = (float, 0.9)
_BIAS_KEYS["e_list"] = (_floats, (0.0, 0.25, 0.5, 0.75, 1.0))
_BIAS_KEYS["joint"] = (str, "uniform")


def cmd_bias_sweep(args) -> int:
    cfg = _resolve(args, _BIAS_KEYS)
    if cfg["joint"] != "uniform":
        raise ConfigError("bias-sweep is defined for the uniform joint")
    spec = bias_sweep_spec(
        cfg["out"], e_list=cfg["e_list"], h_s=cfg["h_s"],
        h_c_list=cfg["h_c_list"], graphs_per_cell=cfg["graphs_per_cell"],
        runs_per_model=cfg["runs_per_model"], families=cfg["families"],
        master_seed=cfg["master_seed"], n_nodes=cfg["n_nodes"],
        edges_per_node=cfg["edges_per_node"], feature_dim=cfg["feature_dim"],
        feature_std=cfg["feature_std"], k=cfg["k"], workers=cfg["workers"])
    if args.quick:
        spec = spec.quick()
    return _sweep_outcome_to_exit(sweep(spec, verbose=not args.no_progress))


# -- ingest -------------------------------------------------------------------

def cmd_ingest(args) -> int:
    feature_cols = list(_strings(args.feature_cols)) if args.feature_cols else []
    g, attrs, id_map = ingest(args.edges, args.attributes,
                              class_col=args.class_col,
                              sensitive_col=args.sensitive_col,
                              feature_cols=feature_cols, id_col=args.id_col,
                              skip_edge_header=args.skip_edge_header)
    out = Path(args.out)
    write_graph_bundle(out, g, attrs, source=f"ingested:{Path(args.edges).name}")
    write_id_map(out / "id_map.csv", id_map)
    hc = global_homophily(g, attrs.class_labels)
    hs = global_homophily(g, attrs.sensitive)
    _echo(f"ingested {g.n_nodes} nodes, {g.n_edges} edges -> {out}")
    _echo(f"global homophily: class {hc:.4f}, sens {hs:.4f}")
    return 0


# -- parser -------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="homofair",
                     description="Local-homophily-aware fairness evaluation "
                                 "for small GNNs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic graph bundle")
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--out")
    p.add_argument("--n-nodes", dest="n_nodes", type=int)
    p.add_argument("--edges-per-node", dest="edges_per_node", type=int)
    p.add_argument("--h-c", dest="h_c", type=float)
    p.add_argument("--h-s", dest="h_s", type=float)
    p.add_argument("--joint", choices=["uniform", "skew3x"])
    p.add_argument("--feature-bias", dest="feature_bias", type=float)
    p.add_argument("--feature-dim", dest="feature_dim", type=int)
    p.add_argument("--feature-std", dest="feature_std", type=float)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("homophily", help="global + local homophily histograms")
    p.add_argument("--graph", required=True, help="graph bundle directory")
    p.add_argument("--k", default="1,2", help="comma list of hop counts (1,2)")
    p.add_argument("--bin-width", dest="bin_width", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_homophily)

    p = sub.add_parser("train", help="train one model on a graph bundle")
    p.add_argument("--config")
    p.add_argument("--graph", required=True)
    p.add_argument("--model", choices=list(MODEL_NAMES))
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--weight-decay", dest="weight_decay", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--split-seed", dest="split_seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="stratified fairness report for "
                                        "saved predictions")
    p.add_argument("--predictions", required=True, help="preds.csv from train")
    p.add_argument("--graph", required=True)
    p.add_argument("--k", type=int, default=1, choices=[1, 2])
    p.add_argument("--split", default="test",
                   choices=["test", "train", "val", "all"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    for name, func in (("sweep", cmd_sweep), ("bias-sweep", cmd_bias_sweep)):
        p = sub.add_parser(name, help=f"run the {name.replace('-', ' ')} grid")
        p.add_argument("--config")
        p.add_argument("--out")
        p.add_argument("--h-c-list", dest="h_c_list", type=_floats)
        if name == "sweep":
            p.add_argument("--h-s-list", dest="h_s_list", type=_floats)
            p.add_argument("--joint", choices=["uniform", "skew3x"])
        else:
            p.add_argument("--h-s", dest="h_s", type=float)
            p.add_argument("--joint", choices=["uniform"])
        p.add_argument("--e-list", dest="e_list", type=_floats)
        p.add_argument("--graphs-per-cell", dest="graphs_per_cell", type=int)
        p.add_argument("--runs-per-model", dest="runs_per_model", type=int)
        p.add_argument("--families", type=_strings)
        p.add_argument("--master-seed", dest="master_seed", type=int)
        p.add_argument("--n-nodes", dest="n_nodes", type=int)
        p.add_argument("--edges-per-node", dest="edges_per_node", type=int)
        p.add_argument("--feature-dim", dest="feature_dim", type=int)
        p.add_argument("--feature-std", dest="feature_std", type=float)
        p.add_argument("--k", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--quick", action="store_true",
                       help="3 graphs x 1 run preset")
        p.add_argument("--no-progress", dest="no_progress", action="store_true")
        p.set_defaults(func=func)

    p = sub.add_parser("ingest", help="import a real edge list + attribute table")
    p.add_argument("--edges", required=True)
    p.add_argument("--attributes", required=True)
    p.add_argument("--class-col", dest="class_col", required=True)
    p.add_argument("--sensitive-col", dest="sensitive_col", required=True)
    p.add_argument("--feature-cols", dest="feature_cols", default="")
    p.add_argument("--id-col", dest="id_col")
    p.add_argument("--skip-edge-header", dest="skip_edge_header",
                   action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CLIError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (ConfigError, IngestError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (DivergenceError, RunError) as e:
        print(f"runtime failure: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
