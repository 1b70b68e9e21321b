#!/usr/bin/env python3
"""Train the counter (Cluster-GCN) and hunter (gated) schedulers.

Collects teacher episodes from the default 8-PM/60-VM scenario under the
best-fit-energy heuristic, trains both models on identical data, and
writes checkpoints plus loss traces.
"""

import argparse
import time
from pathlib import Path

from cloudsched.gnn.graph import partition_graph
from cloudsched.gnn.models import model_to_json, new_gated_model, new_gcn_model
from cloudsched.gnn.training import TrainConfig, loss_trace_to_csv, train
from cloudsched.scheduler import collect_training_data
from cloudsched.sim import SimConfig
from cloudsched.util import atomic_write_text


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--episodes", type=int, default=3)
    parser.add_argument("--epochs", type=int, default=200)
    parser.add_argument("--lr", type=float, default=0.01)
    parser.add_argument("--clusters", type=int, default=2)
    parser.add_argument("--data-seed", type=int, default=100)
    parser.add_argument("--init-seed", type=int, default=1)
    parser.add_argument("--train-seed", type=int, default=2)
    args = parser.parse_args()
    out = Path(args.out)

    t0 = time.time()
    scenario = SimConfig(seed=0)
    samples = collect_training_data(scenario, episodes=args.episodes, seed=args.data_seed)
    print(f"collected {len(samples)} samples from {args.episodes} episodes "
          f"({time.time() - t0:.1f}s)")

    cfg = TrainConfig(epochs=args.epochs, learning_rate=args.lr, seed=args.train_seed)

    t0 = time.time()
    partitions = [
        partition_graph(s.graph, k=min(args.clusters, s.graph.n_nodes)) for s in samples
    ]
    counter, counter_losses = train(
        new_gcn_model(seed=args.init_seed), samples, partitions=partitions, config=cfg
    )
    print(f"counter: final loss {counter_losses[-1]:.3e} ({time.time() - t0:.1f}s)")

    t0 = time.time()
    hunter, hunter_losses = train(new_gated_model(seed=args.init_seed), samples, config=cfg)
    print(f"hunter:  final loss {hunter_losses[-1]:.3e} ({time.time() - t0:.1f}s)")

    atomic_write_text(out / "model_counter.json", model_to_json(counter))
    atomic_write_text(out / "loss_counter.csv", loss_trace_to_csv(counter_losses))
    atomic_write_text(out / "model_hunter.json", model_to_json(hunter))
    atomic_write_text(out / "loss_hunter.csv", loss_trace_to_csv(hunter_losses))
    print(f"checkpoints written to {out}/")


if __name__ == "__main__":
    main()
