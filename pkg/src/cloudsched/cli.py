"""Command-line entry point: gen-workload, train, simulate, compare.

Configuration comes from an optional YAML file mirroring the simulation
scenario; flags override file values.  Exit codes: 0 ok, 2 configuration
or input error, 3 I/O error, 4 training divergence.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace as dc_replace
from pathlib import Path

import yaml

from .datacenter import DEFAULT_PM_TEMPLATE
from .energy import DEFAULT_POWER_MODEL, PowerModel
from .errors import ConfigError, DivergenceError, SimulatorError
from .gnn.graph import partition_graph
from .gnn.models import model_to_json, new_gated_model, new_gcn_model
from .gnn.training import TrainConfig, loss_trace_to_csv, train
from .scheduler import MODEL_POLICIES, POLICY_KINDS, collect_training_data
from .sim import (
    SimConfig,
    compare,
    comparison_to_csv,
    compute_qos,
    decision_log_jsonl,
    energy_report_csv,
    ingest_trace_dir,
    qos_to_json,
    result_to_json,
    run,
)
from .util import atomic_write_text
from .workload import generate_synthetic, workload_to_json

log = logging.getLogger("cloudsched")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DIVERGENCE = 4

_PM_KEYS = {"cores", "ram", "max_frequency", "min_frequency", "peak_power", "idle_power"}
_POWER_KEYS = {
    "idle_power",
    "peak_power",
    "cooling_coefficient",
    "extra_coefficient",
    "migration_penalty",
}
_TRAINING_KEYS = {"episodes", "epochs", "learning_rate", "batch_clusters", "clusters"}
_TOP_KEYS = {
    "pm_count",
    "vm_count",
    "horizon",
    "seed",
    "policy",
    "model_path",
    "workload_file",
    "trace_dir",
    "price_file",
    "consolidation_threshold",
    "log_scores",
    "out_dir",
    "verbosity",
    "pm",
    "power",
    "training",
}


def load_config_file(path: str) -> dict:
    """Read and validate the YAML config; unknown keys are rejected."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh) or {}
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path!r} must be a mapping")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for section, allowed in (("pm", _PM_KEYS), ("power", _POWER_KEYS), ("training", _TRAINING_KEYS)):
        sub = doc.get(section)
        if sub is None:
            continue
        if not isinstance(sub, dict):
            raise ConfigError(f"config section {section!r} must be a mapping")
        bad = set(sub) - allowed
        if bad:
            raise ConfigError(f"unknown keys in {section!r}: {sorted(bad)}")
    return doc


def _build_sim_config(cfg: dict, args) -> SimConfig:
    template = DEFAULT_PM_TEMPLATE
    if cfg.get("pm"):
        template = dc_replace(template, **cfg["pm"])
    power = DEFAULT_POWER_MODEL
    if cfg.get("power"):
        power = PowerModel(**{**power.__dict__, **cfg["power"]})

    def pick(flag, key, default):
        if flag is not None:
            return flag
        return cfg.get(key, default)

    return SimConfig(
        pm_count=pick(getattr(args, "pm_count", None), "pm_count", 8),
        pm_template=template,
        vm_count=pick(getattr(args, "vm_count", None), "vm_count", 60),
        horizon=pick(getattr(args, "horizon", None), "horizon", 120),
        power=power,
        policy=pick(args.policy, "policy", "first_fit"),
        model_path=pick(getattr(args, "model", None), "model_path", None),
        workload_file=pick(getattr(args, "workload_file", None), "workload_file", None),
        trace_dir=pick(getattr(args, "trace_dir", None), "trace_dir", None),
        price_file=pick(getattr(args, "price_file", None), "price_file", None),
        seed=pick(args.seed, "seed", 0),
        consolidation_threshold=cfg.get("consolidation_threshold", 0.25),
        log_scores=bool(args.log_scores or cfg.get("log_scores", False)),
    )


def _out_dir(cfg: dict, args) -> Path:
    out = args.out if args.out is not None else cfg.get("out_dir", "out")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_gen_workload(cfg: dict, args) -> int:
    out = _out_dir(cfg, args)
    count = args.count if args.count is not None else cfg.get("vm_count", 60)
    horizon = args.horizon if args.horizon is not None else cfg.get("horizon", 120)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    trace_dir = args.trace_dir if args.trace_dir is not None else cfg.get("trace_dir")

    if trace_dir:
        workload = ingest_trace_dir(trace_dir, horizon)
    else:
        workload = generate_synthetic(count, horizon, seed)
    target = out / "workloads.json"
    atomic_write_text(target, workload_to_json(workload))
    log.info("wrote %d requests to %s", len(workload.requests), target)
    print(target)
    return EXIT_OK


def cmd_train(cfg: dict, args) -> int:
    out = _out_dir(cfg, args)
    policy = args.policy if args.policy is not None else cfg.get("policy")
    if policy not in MODEL_POLICIES:
        raise ConfigError(f"--policy must be one of {MODEL_POLICIES}, got {policy!r}")
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    tcfg = cfg.get("training", {})
    episodes = args.episodes if args.episodes is not None else tcfg.get("episodes", 3)
    epochs = args.epochs if args.epochs is not None else tcfg.get("epochs", 200)
    lr = args.lr if args.lr is not None else tcfg.get("learning_rate", 0.01)
    batch_clusters = (
        args.batch_clusters
        if args.batch_clusters is not None
        else tcfg.get("batch_clusters", 1)
    )
    clusters = args.clusters if args.clusters is not None else tcfg.get("clusters", 2)

    scenario = _build_sim_config(cfg, args)
    samples = collect_training_data(scenario, episodes=episodes, seed=seed)
    log.info("collected %d training samples from %d episodes", len(samples), episodes)

    if policy == "counter":
        model = new_gcn_model(seed=seed)
        partitions = [
            partition_graph(s.graph, k=min(clusters, s.graph.n_nodes), seed=seed)
            for s in samples
        ]
    else:
        model = new_gated_model(seed=seed)
        partitions = None

    trained, losses = train(
        model,
        samples,
        partitions=partitions,
        config=TrainConfig(
            epochs=epochs, learning_rate=lr, batch_clusters=batch_clusters, seed=seed
        ),
    )

    model_path = out / f"model_{policy}.json"
    loss_path = out / f"loss_{policy}.csv"
    atomic_write_text(model_path, model_to_json(trained))
    atomic_write_text(loss_path, loss_trace_to_csv(losses))
    log.info("final mean loss %.6g", losses[-1])
    print(model_path)
    print(loss_path)
    return EXIT_OK


def cmd_simulate(cfg: dict, args) -> int:
    out = _out_dir(cfg, args)
    config = _build_sim_config(cfg, args)
    result = run(config)
    report = compute_qos(result)

    atomic_write_text(out / "result.json", result_to_json(result))
    atomic_write_text(out / "qos.json", qos_to_json(report))
    atomic_write_text(out / "energy_report.csv", energy_report_csv(result))
    atomic_write_text(out / "decisions.jsonl", decision_log_jsonl(result))
    print(out / "qos.json")
    log.info(
        "policy=%s energy=%.3f kWh cost=%.3f placed=%d deferred=%d",
        config.policy,
        report.total_energy,
        report.total_cost,
        report.placed,
        report.deferred,
    )
    return EXIT_OK


def cmd_compare(cfg: dict, args) -> int:
    out = _out_dir(cfg, args)
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    if not policies:
        raise ConfigError("--policies must list at least one policy")
    for policy in policies:
        if policy not in POLICY_KINDS:
            raise ConfigError(f"unknown policy {policy!r}")

    base = _build_sim_config(cfg, args)
    configs = []
    for policy in policies:
        model_path = None
        if policy == "counter":
            model_path = args.model_counter or cfg.get("model_path")
        elif policy == "hunter":
            model_path = args.model_hunter or cfg.get("model_path")
        if policy in MODEL_POLICIES and model_path is None:
            raise ConfigError(f"policy {policy!r} needs --model-{policy}")
        configs.append(dc_replace(base, policy=policy, model_path=model_path))

    table = compare(configs)
    atomic_write_text(out / "comparison.csv", comparison_to_csv(table))
    print(out / "comparison.csv")
    for (a, b), delta in table.deltas.items():
        energy = delta["energy_pct"]
        cost = delta["cost_pct"]
        energy_s = f"{energy:+.2f}%" if energy is not None else "n/a"
        cost_s = f"{cost:+.2f}%" if cost is not None else "n/a"
        print(f"{b} vs {a}: energy {energy_s}, cost {cost_s}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML configuration file")
    common.add_argument("--out", metavar="DIR", help="output directory (default: out)")
    common.add_argument("--seed", type=int, metavar="N", help="master RNG seed")
    common.add_argument("--policy", metavar="NAME", choices=POLICY_KINDS, help="scheduling policy")
    common.add_argument(
        "--log-scores", action="store_true", help="include per-PM scores in the decision log"
    )
    common.add_argument("-v", "--verbose", action="store_true", help="info-level logging")

    parser = argparse.ArgumentParser(
        prog="cloudsched",
        description="Energy-aware data-centre simulator with learned VM schedulers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-workload", parents=[common], help="write a workload JSON file")
    p.add_argument("--count", type=int, help="number of requests to generate")
    p.add_argument("--horizon", type=int, help="arrival horizon in hours")
    p.add_argument("--trace-dir", metavar="DIR", help="derive requests from trace files")
    p.set_defaults(func=cmd_gen_workload)

    p = sub.add_parser("train", parents=[common], help="train a scheduler model")
    p.add_argument("--episodes", type=int, help="teacher episodes to collect")
    p.add_argument("--epochs", type=int, help="training epochs")
    p.add_argument("--lr", type=float, help="SGD learning rate")
    p.add_argument("--batch-clusters", type=int, help="clusters sampled per step")
    p.add_argument("--clusters", type=int, help="clusters per sample graph")
    p.add_argument("--pm-count", type=int, help="scenario PM count")
    p.add_argument("--vm-count", type=int, help="scenario VM count")
    p.add_argument("--horizon", type=int, help="scenario horizon in hours")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("simulate", parents=[common], help="run one simulation")
    p.add_argument("--model", metavar="PATH", help="model checkpoint for counter/hunter")
    p.add_argument("--pm-count", type=int, help="number of PMs")
    p.add_argument("--vm-count", type=int, help="number of synthetic VMs")
    p.add_argument("--horizon", type=int, help="simulation hours")
    p.add_argument("--workload-file", metavar="PATH", help="workload JSON input")
    p.add_argument("--trace-dir", metavar="DIR", help="trace directory input")
    p.add_argument("--price-file", metavar="PATH", help="price CSV input")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", parents=[common], help="compare policies on one scenario")
    p.add_argument("--policies", required=True, metavar="A,B,...", help="comma-separated policies")
    p.add_argument("--model-counter", metavar="PATH", help="checkpoint for the counter policy")
    p.add_argument("--model-hunter", metavar="PATH", help="checkpoint for the hunter policy")
    p.add_argument("--pm-count", type=int, help="number of PMs")
    p.add_argument("--vm-count", type=int, help="number of synthetic VMs")
    p.add_argument("--horizon", type=int, help="simulation hours")
    p.add_argument("--workload-file", metavar="PATH", help="workload JSON input")
    p.add_argument("--price-file", metavar="PATH", help="price CSV input")
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config_file(args.config) if args.config else {}
        if not args.verbose and cfg.get("verbosity") == "info":
            logging.getLogger().setLevel(logging.INFO)
        return args.func(cfg, args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except SimulatorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
