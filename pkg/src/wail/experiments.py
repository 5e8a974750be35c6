"""End-to-end experiment orchestration: single imitation runs and the
(algorithm x dataset size x seed) grid with its summary table."""

from __future__ import annotations

import csv
import dataclasses
import json
import os
import traceback

import numpy as np

from . import baselines, training
from .config import RunConfig
from .envs import build_environment, evaluate, make_expert, reference_returns
from .mdp import save_trajectories


def _derived_seeds(seed: int) -> dict:
    """Independent integer seeds for the run's sampling stages."""
    children = np.random.SeedSequence(seed).spawn(4)
    names = ("expert", "refs", "train", "eval")
    return {n: int(c.generate_state(1)[0]) for n, c in zip(names, children)}


def run_single(config: RunConfig):
    """One imitation run: build the environment, draw demonstrations, train
    the configured algorithm, evaluate against expert/random references.

    Returns (summary_row, artifacts) where artifacts holds the trained
    policy, the reward model or discriminator (None for bc), the log (None
    for bc) and the expert context."""
    config.validate()
    seeds = _derived_seeds(config.seed)
    mdp = build_environment(config.env)
    expert_policy, demos = make_expert(mdp, config.expert_lambda,
                                       n_traj=config.dataset_size,
                                       traj_len=config.traj_len, seed=seeds["expert"])
    expert_ref, random_ref = reference_returns(mdp, expert_policy,
                                               n_ref=config.n_ref, seed=seeds["refs"])
    eval_ctx = {"expert_ref": expert_ref, "random_ref": random_ref, "seed": seeds["eval"]}
    train_cfg = dataclasses.replace(config, seed=seeds["train"])
    log = None
    aux = None
    if config.algorithm == "wail":
        policy, aux, log = training.train_wail(mdp, demos, train_cfg, eval_ctx=eval_ctx)
    elif config.algorithm == "gail":
        policy, aux, log = baselines.train_gail(mdp, demos, train_cfg, eval_ctx=eval_ctx)
    elif config.algorithm == "bc":
        policy = baselines.train_bc(demos, train_cfg, mdp=mdp)
    else:
        raise ValueError(f"unknown algorithm {config.algorithm!r}")
    result = evaluate(mdp, policy, config.n_eval, seed=seeds["eval"],
                      expert_ref=expert_ref, random_ref=random_ref)
    row = {"algorithm": config.algorithm, "dataset_size": config.dataset_size,
           "seed": config.seed, "mean": result.mean, "std": result.std,
           "scaled": result.scaled}
    artifacts = {"mdp": mdp, "policy": policy, "model": aux, "log": log,
                 "expert_policy": expert_policy, "demos": demos,
                 "expert_ref": expert_ref, "random_ref": random_ref}
    if config.out_dir:
        os.makedirs(config.out_dir, exist_ok=True)
        save_trajectories(os.path.join(config.out_dir, "demos.jsonl"), demos)
        with open(os.path.join(config.out_dir, "result.json"), "w") as fh:
            json.dump(row | {"expert_ref": expert_ref, "random_ref": random_ref}, fh, indent=2)
    return row, artifacts


SUMMARY_COLUMNS = ("algorithm", "dataset_size", "seed", "mean", "std", "scaled")


def save_summary(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for r in rows:
            w.writerow([r["algorithm"], r["dataset_size"], r["seed"],
                        repr(float(r["mean"])), repr(float(r["std"])), repr(float(r["scaled"]))])


def load_summary(path):
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append({"algorithm": rec["algorithm"],
                         "dataset_size": int(rec["dataset_size"]),
                         "seed": int(rec["seed"]), "mean": float(rec["mean"]),
                         "std": float(rec["std"]), "scaled": float(rec["scaled"])})
    return rows


def run_experiment_grid(base: RunConfig, algorithms=None, dataset_sizes=None,
                        seeds=None, out_dir: str | None = None):
    """Run every (algorithm x dataset_size x seed) cell from the base
    config.  Cell failures are recorded and the grid continues.  Returns
    (summary_rows, failures); writes summary.csv and failures.json when
    out_dir is given."""
    algorithms = list(algorithms) if algorithms is not None else [base.algorithm]
    dataset_sizes = list(dataset_sizes) if dataset_sizes is not None else [base.dataset_size]
    seeds = list(seeds) if seeds is not None else [base.seed]
    rows, failures = [], []
    for algo in algorithms:
        for size in dataset_sizes:
            for seed in seeds:
                cell_out = (os.path.join(out_dir, f"{algo}_n{size}_s{seed}")
                            if out_dir else None)
                cfg = dataclasses.replace(base, algorithm=algo, dataset_size=size,
                                          seed=seed, out_dir=cell_out)
                try:
                    row, _ = run_single(cfg)
                    rows.append(row)
                except Exception as err:   # noqa: BLE001 - cell isolation is the contract
                    failures.append({"algorithm": algo, "dataset_size": size,
                                     "seed": seed, "error": f"{type(err).__name__}: {err}",
                                     "traceback": traceback.format_exc()})
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        save_summary(os.path.join(out_dir, "summary.csv"), rows)
        if failures:
            with open(os.path.join(out_dir, "failures.json"), "w") as fh:
                json.dump(failures, fh, indent=2)
    return rows, failures
