"""Training orchestration shared by the CLI and the acceptance checks."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .baselines import MarkovBaseline
from .core import Catalog, KernelConfig, build_samples
from .errors import ValidationError
from .imbalance import STRATEGIES, class_counts, sample_weights, synthesize_balanced
from .learner import SolverConfig, admm_fit, hierarchical_fit
from .model import FlowModel, HierarchicalModel


def holdout_split(sequences, fraction: float, seed: int):
    """Seeded (train, test) split of whole sequences."""
    sequences = list(sequences)
    if not 0 <= fraction < 1:
        raise ValidationError("held-out fraction must lie in [0, 1)")
    if fraction == 0:
        return sequences, []
    order = np.random.default_rng(seed).permutation(len(sequences))
    n_test = int(round(fraction * len(sequences)))
    test = set(order[:n_test].tolist())
    return ([s for i, s in enumerate(sequences) if i not in test],
            [s for i, s in enumerate(sequences) if i in test])


def kfold_indices(n: int, folds: int, seed: int):
    if folds < 2:
        raise ValidationError("fold count must be >= 2")
    if n < folds:
        raise ValidationError(f"cannot split {n} sequences into {folds} folds")
    order = np.random.default_rng([seed, 7]).permutation(n)
    return [np.sort(part) for part in np.array_split(order, folds)]


def prepare_samples(sequences, catalog: Catalog, kernel: KernelConfig, imbalance: str = "none",
                    balance_by: str = "joint", seed: int = 0):
    """Training samples after the weighted or synthetic strategy, plus a report dict."""
    if imbalance not in STRATEGIES:
        raise ValidationError(f"unknown imbalance strategy {imbalance!r}")
    samples = build_samples(sequences, kernel, catalog.space, catalog.n_states, catalog.n_durations)
    report = {"samples": len(samples), "class_counts": class_counts(samples).to_dict()}
    if imbalance == "weighted":
        samples = samples.with_weights(sample_weights(samples))
    elif imbalance == "synthetic":
        samples = synthesize_balanced(samples, seed=seed, by=balance_by)
        report["augmented_samples"] = len(samples)
        report["augmented_counts"] = class_counts(samples).to_dict()
    return samples, report


def train_flow_model(sequences, catalog: Catalog, kernel: KernelConfig, solver: SolverConfig,
                     imbalance: str = "none", balance_by: str = "joint", folds: int | None = None,
                     seed: int = 0):
    """Fit a DMCP model (flat or hierarchical); with ``folds`` the fold X matrices are averaged."""
    sequences = list(sequences)
    if imbalance == "hierarchical":
        if folds:
            raise ValidationError("k-fold averaging is not defined for hierarchical chains")
        samples, report = prepare_samples(sequences, catalog, kernel, "none", balance_by, seed)
        state_chain = hierarchical_fit(samples.features, samples.states, catalog.n_states, solver)
        dur_chain = hierarchical_fit(samples.features, samples.durations, catalog.n_durations, solver)
        report.update(imbalance=imbalance, state_order=[c + 1 for c in state_chain.order],
                      duration_order=[d + 1 for d in dur_chain.order])
        return HierarchicalModel(state_chain, dur_chain, kernel, catalog.space, catalog.states,
                                 catalog.durations, catalog.digest(), report)
    if folds:
        parts = kfold_indices(len(sequences), folds, seed)
        mats, fold_reports = [], []
        for k, held in enumerate(parts):
            held = set(held.tolist())
            train = [s for i, s in enumerate(sequences) if i not in held]
            samples, rep = prepare_samples(train, catalog, kernel, imbalance, balance_by, seed + k)
            res = admm_fit(samples, replace(solver, seed=solver.seed + k))
            mats.append(res.params)
            fold_reports.append({**rep, "solver": res.report()})
        params = np.mean(mats, axis=0)
        report = {"imbalance": imbalance, "folds": folds, "fold_reports": fold_reports}
    else:
        samples, report = prepare_samples(sequences, catalog, kernel, imbalance, balance_by, seed)
        res = admm_fit(samples, solver)
        params = res.params
        report.update(imbalance=imbalance, solver=res.report())
    return FlowModel(params, kernel, catalog.space, catalog.states, catalog.durations, catalog.digest(), report)


def train_markov(sequences, catalog: Catalog) -> MarkovBaseline:
    return MarkovBaseline.fit(sequences, catalog.n_states, catalog.n_durations)
