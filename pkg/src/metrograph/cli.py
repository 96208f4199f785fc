"""Command-line interface.

Each analysis command prints a report envelope (JSON, or CSV with ``#``
metadata lines) to stdout or ``--out``; ``--figure`` additionally renders a
matplotlib figure.  ``export`` prints a DOT or GeoJSON document instead.

Exit codes: 0 success, 1 usage, 2 data validation, 3 infeasible
augmentation, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .centrality import betweenness
from .dataio import DataValidationError, envelope, export_graph, load_dataset, render_csv, render_json
from .diffusion import FlowError, estimate_population, net_flow
from .graph import GraphError, is_connected
from .hypernet import run_experiment
from .numerics import NumericalError
from .robustness import InfeasibleAugmentation, augment, bridges, edge_connectivity, minimum_cut

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _positive(kind):
    def conv(text):
        v = kind(text)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return conv


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--stations", required=True, type=Path, metavar="PATH")
    common.add_argument("--edges", required=True, type=Path, metavar="PATH")
    common.add_argument("--flows", type=Path, metavar="PATH")
    common.add_argument("--out", type=Path, metavar="PATH", help="write the report here instead of stdout")

    report = _Parser(add_help=False)
    report.add_argument("--format", choices=["json", "csv"], default="json")
    report.add_argument("--figure", type=Path, metavar="PATH", help="also render a figure to this file")

    parser = _Parser(prog="metrograph", description="Graph analytics for metro networks.")
    parser.add_argument("--version", action="version", version=f"metrograph {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("centrality", parents=[common, report], help="betweenness centrality ranking")
    sub.add_parser("connectivity", parents=[common, report], help="edge connectivity and bridges")

    p = sub.add_parser("augment", parents=[common, report], help="k-edge augmentation plan")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--max-dist-km", type=_positive(float))

    p = sub.add_parser("population", parents=[common, report], help="population from net passenger flow")
    p.add_argument("--diffusivity", type=_positive(float), default=1.0)
    p.add_argument("--flow-def", choices=["log", "linear"], default="log")
    p.add_argument("--window", choices=["am", "pm"], default="am")

    p = sub.add_parser("predict", parents=[common, report], help="evening flow regression")
    p.add_argument("--model", choices=["nn", "gnn", "hgnn"], required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--train-frac", type=float, default=0.7)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--lr", type=_positive(float), default=0.01)
    p.add_argument("--layers", choices=["single", "double"], default="double")
    p.add_argument("--normalized-adjacency", action="store_true",
                   help="use D^-1/2 A D^-1/2 instead of A for the gnn model")

    p = sub.add_parser("export", parents=[common], help="DOT or GeoJSON export")
    p.add_argument("--format", choices=["dot", "geojson"], required=True)
    p.add_argument("--augment-k", type=int, help="include the links of a k-edge augmentation plan")
    p.add_argument("--max-dist-km", type=_positive(float))
    return parser


def _require_flows(ds, command):
    if ds.flows is None:
        raise UsageError(f"metrograph {command}: error: --flows is required")
    return ds.flows.aligned(ds.graph)


def _cmd_centrality(args, ds):
    g = ds.graph
    rep = betweenness(g)
    rank = {sid: i + 1 for i, sid in enumerate(rep.ranking)}
    stations = [{"id": s.id, "name": s.name, "betweenness": float(v), "rank": rank[s.id]}
                for s, v in zip(g.stations, rep.values)]
    result = {"stations": stations, "ranking": rep.ranking, "connected": is_connected(g)}
    rows = [[rank[r["id"]], r["id"], r["name"], r["betweenness"]] for r in sorted(stations, key=lambda r: r["rank"])]
    if args.figure:
        from .plotting import centrality_bars
        centrality_bars(g, rep, args.figure)
    return {}, result, ["rank", "id", "name", "betweenness"], rows


def _cmd_connectivity(args, ds):
    g = ds.graph
    lam = edge_connectivity(g) if g.n >= 2 else 0
    br = [[g.ids[i], g.ids[j]] for i, j in bridges(g)]
    side = sorted(g.ids[i] for i in minimum_cut(g)[1]) if g.n >= 2 and lam > 0 else []
    result = {
        "edge_connectivity": lam,
        "connected": is_connected(g),
        "n_stations": g.n,
        "n_links": len(g.links),
        "bridges": br,
        "n_bridges": len(br),
        "min_cut_side": side,
    }
    return {}, result, ["from_id", "to_id"], br


def _plan_payload(g, plan):
    return {
        "k": plan.k,
        "added": [{"from_id": a, "to_id": b, "distance_km": d} for (a, b), d in zip(plan.added, plan.distances_km)],
        "size": plan.size,
        "resulting_connectivity": plan.resulting_connectivity,
        "initial_connectivity": edge_connectivity(g),
        "constrained": plan.constrained,
        "max_dist_km": plan.threshold_km,
        "max_added_distance_km": plan.max_distance_km,
        "method": plan.method,
        "lower_bound": plan.lower_bound,
    }


def _cmd_augment(args, ds):
    plan = augment(ds.graph, args.k, args.max_dist_km)
    if args.figure:
        from .plotting import augmentation_map
        augmentation_map(ds.graph, plan, args.figure)
    rows = [[a, b, d] for (a, b), d in zip(plan.added, plan.distances_km)]
    params = {"k": args.k, "max_dist_km": args.max_dist_km}
    return params, _plan_payload(ds.graph, plan), ["from_id", "to_id", "distance_km"], rows


def _cmd_population(args, ds):
    g = ds.graph
    flows = _require_flows(ds, "population")
    sig = net_flow(flows, args.flow_def, args.window)
    est = estimate_population(g, sig, args.diffusivity)
    stations = [{"id": s.id, "name": s.name, "net_flow": float(q), "population": float(p)}
                for s, q, p in zip(g.stations, sig.q, est.phi_hat)]
    result = {
        "stations": stations,
        "projected_offset": est.projected_offset,
        "zero_sum_projection_applied": est.projected_offset != 0.0,
        "net_flow_sum": float(sig.q.sum()),
    }
    if args.figure:
        from .plotting import signal_map
        signal_map(g, est.phi_hat, args.figure, "Relative resident population", "population", signed=False)
    params = {"diffusivity": args.diffusivity, "flow_def": args.flow_def, "window": args.window}
    rows = [[r["id"], r["name"], r["net_flow"], r["population"]] for r in stations]
    return params, result, ["id", "name", "net_flow", "population"], rows


def _cmd_predict(args, ds):
    g = ds.graph
    flows = _require_flows(ds, "predict")
    if not 0.0 < args.train_frac <= 1.0:
        raise UsageError("metrograph predict: error: --train-frac must lie in (0, 1]")
    if args.epochs < 0:
        raise UsageError("metrograph predict: error: --epochs must be non-negative")
    rep = run_experiment(g, flows, args.model, seed=args.seed, train_frac=args.train_frac, epochs=args.epochs,
                         lr=args.lr, layers=args.layers, normalized_adjacency=args.normalized_adjacency)
    target = dict(zip(g.ids, net_flow(flows, "linear", "pm").q.tolist()))
    split = {sid: "train" for sid in rep.train_ids} | {sid: "test" for sid in rep.test_ids}
    stations = [{"id": sid, "split": split[sid], "target": target[sid], "prediction": rep.predictions[sid],
                 "prediction_normalized": rep.predictions_normalized[sid]} for sid in g.ids]
    result = {
        "model": rep.kind,
        "train_mse": rep.train_mse,
        "test_mse": rep.test_mse,
        "n_train": len(rep.train_ids),
        "n_test": len(rep.test_ids),
        "feature_columns": list(rep.feature_columns),
        "feature_means": list(rep.feature_means),
        "feature_stds": list(rep.feature_stds),
        "target_mean": rep.target_mean,
        "target_std": rep.target_std,
        "alphas": list(rep.alphas),
        "initial_loss": float(rep.loss_history[0]),
        "stations": stations,
    }
    if args.figure:
        from .plotting import prediction_scatter
        prediction_scatter(rep, target, args.figure)
    params = {"model": args.model, "seed": args.seed, "train_frac": args.train_frac, "epochs": args.epochs,
              "lr": args.lr, "layers": args.layers, "normalized_adjacency": args.normalized_adjacency}
    rows = [[r["id"], r["split"], r["target"], r["prediction"]] for r in stations]
    return params, result, ["id", "split", "target", "prediction"], rows


COMMANDS = {
    "centrality": _cmd_centrality,
    "connectivity": _cmd_connectivity,
    "augment": _cmd_augment,
    "population": _cmd_population,
    "predict": _cmd_predict,
}


def _emit(text: str, out: Path | None):
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def run(args) -> int:
    ds = load_dataset(args.stations, args.edges, args.flows)
    if args.command == "export":
        plan = augment(ds.graph, args.augment_k, args.max_dist_km) if args.augment_k is not None else None
        _emit(export_graph(ds.graph, args.format, plan), args.out)
        return EXIT_OK
    params, result, columns, rows = COMMANDS[args.command](args, ds)
    env = envelope(args.command, ds.digests, params, result)
    text = render_json(env) if args.format == "json" else render_csv(env, columns, rows)
    _emit(text, args.out)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return run(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleAugmentation as exc:
        print(f"infeasible: {exc} (best achievable k = {exc.best_k})", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (DataValidationError, FlowError, GraphError) as exc:
        print(f"invalid data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
