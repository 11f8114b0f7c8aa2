"""Countermeasures for class imbalance: sample weighting and synthetic oversampling."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .core import Event, EventSequence, KernelConfig, SampleParts, SampleSet
from .errors import ValidationError

STRATEGIES = ("none", "weighted", "hierarchical", "synthetic")


@dataclass(frozen=True)
class ClassCounts:
    """Joint (state, duration) counts with 1-based labels; a null duration is ``None``."""

    joint: dict
    states: dict
    durations: dict

    def to_dict(self) -> dict:
        def key(k):
            return k if not isinstance(k, tuple) else f"{k[0]},{'null' if k[1] is None else k[1]}"

        return {
            "joint": {key(k): v for k, v in sorted(self.joint.items(), key=_sort_key)},
            "states": {str(k): v for k, v in sorted(self.states.items())},
            "durations": {("null" if k is None else str(k)): v for k, v in sorted(self.durations.items(), key=_sort_key)},
        }


def _sort_key(item):
    k = item[0]
    if isinstance(k, tuple):
        return (k[0], -1 if k[1] is None else k[1])
    return -1 if k is None else k


def _label(d: int):
    return None if d < 0 else int(d) + 1


def class_counts(samples: SampleSet) -> ClassCounts:
    joint = Counter(zip((int(c) + 1 for c in samples.states), (_label(d) for d in samples.durations)))
    states = Counter(int(c) + 1 for c in samples.states)
    durs = Counter(_label(d) for d in samples.durations)
    return ClassCounts(dict(joint), dict(states), dict(durs))


def count_weight(n: float) -> float:
    """1 / ln(1 + n)."""
    return 1.0 / math.log1p(n)


def sample_weights(samples: SampleSet) -> np.ndarray:
    """w_i = 1 / ln(1 + #{(c_i, d_i)}), counted over the joint label."""
    if len(samples) == 0:
        raise ValidationError("empty sample set")
    key = samples.states * (samples.n_durations + 1) + (samples.durations + 1)
    _, inverse, counts = np.unique(key, return_inverse=True, return_counts=True)
    return 1.0 / np.log1p(counts[inverse].astype(np.float64))


def _class_keys(samples: SampleSet, by: str) -> np.ndarray:
    if by == "joint":
        return samples.states * (samples.n_durations + 1) + (samples.durations + 1)
    if by == "state":
        return samples.states.copy()
    if by == "duration":
        return samples.durations.copy()
    raise ValidationError(f"unknown balancing mode {by!r}")


def _centered_mean(x: np.ndarray):
    # exact when all members agree, so identical classes synthesize exact clones
    return x[0] + (x - x[0]).mean(axis=0)


def synthesize_balanced(
    samples: SampleSet, seed: int = 0, by: str = "joint", smoothing: float = 1.0
) -> SampleSet:
    """Oversample every class up to the size of the largest one.

    Each synthetic sample draws its static features and the most recent
    event's features dimension-wise from Bernoulli(p), where p is the
    class frequency of that dimension smoothed as (k + a) / (n + 2a) with
    ``a = smoothing``. It takes the class-mean time scale and the class-mean
    older-history block, and is composed as [static * scale ; recent + residual].
    Originals come first and are unchanged; synthetic rows follow grouped by
    class in ascending key order.
    """
    if samples.parts is None:
        raise ValidationError("synthetic oversampling needs raw sample parts")
    if smoothing < 0:
        raise ValidationError("smoothing must be >= 0")
    keys = _class_keys(samples, by)
    uniq, counts = np.unique(keys, return_counts=True)
    target = counts.max()
    new_parts, new_states, new_durs = [], [], []
    for pos, (key, count) in enumerate(zip(uniq, counts)):
        if count == 0:
            raise ValidationError(f"class {key} has no samples")
        need = int(target - count)
        if need == 0:
            continue
        rng = np.random.default_rng([seed, pos])
        members = np.flatnonzero(keys == key)
        parts = samples.parts.take(members)
        a = smoothing
        p_static = (parts.static.sum(axis=0) + a) / (len(members) + 2 * a)
        p_recent = (parts.recent.sum(axis=0) + a) / (len(members) + 2 * a)
        static = (rng.random((need, len(p_static))) < p_static).astype(np.float64)
        recent = (rng.random((need, len(p_recent))) < p_recent).astype(np.float64)
        scale = np.full(need, _centered_mean(parts.scale))
        residual = np.tile(_centered_mean(parts.residual), (need, 1))
        if by == "joint":
            st = np.full(need, samples.states[members[0]])
            du = np.full(need, samples.durations[members[0]])
        elif by == "state":
            st = np.full(need, samples.states[members[0]])
            du = rng.choice(samples.durations[members], size=need)
        else:
            du = np.full(need, samples.durations[members[0]])
            st = rng.choice(samples.states[members], size=need)
        if by != "duration" and np.all(samples.durations[members] < 0):
            recent[:] = 0.0  # null-duration samples never have history
        new_parts.append(SampleParts(static, scale, recent, residual))
        new_states.append(st)
        new_durs.append(du)
    if not new_parts:
        return samples.subset(np.arange(len(samples)))
    syn = SampleParts.concat(new_parts)
    n_syn = len(syn.scale)
    return SampleSet(
        np.vstack([samples.features, syn.compose()]),
        np.concatenate([samples.states, *new_states]),
        np.concatenate([samples.durations, *new_durs]),
        samples.n_states,
        samples.n_durations,
        np.concatenate([samples.weights, np.ones(n_syn)]),
        SampleParts.concat([samples.parts, syn]),
        np.concatenate([samples.synthetic, np.ones(n_syn, dtype=bool)]),
    )


def synthetic_sequences(samples: SampleSet, config: KernelConfig) -> list[EventSequence]:
    """Pseudo-sequences reproducing each synthetic sample when re-ingested.

    A sample with a duration label becomes two events: a carrier event at
    the sample's time scale holding the recent features, then the labelled
    event. Null-duration samples become a single event.
    """
    if samples.parts is None:
        raise ValidationError("need raw sample parts")
    out = []
    for k, i in enumerate(np.flatnonzero(samples.synthetic)):
        static = tuple(np.flatnonzero(samples.parts.static[i]))
        c = int(samples.states[i]) + 1
        d = _label(int(samples.durations[i]))
        sid = f"synthetic-{k}"
        if d is None:
            events = (Event(1.0, c, None, ()),)
            out.append(EventSequence(sid, static, events, 1.0, synthetic=True))
            continue
        t1 = float(samples.parts.scale[i]) if config.variant in ("mcp", "scp") else 1.0
        recent = tuple(np.flatnonzero(samples.parts.recent[i]))
        res = samples.parts.residual[i]
        residual = tuple((int(j), float(res[j])) for j in np.flatnonzero(res))
        events = (Event(t1, c, None, recent), Event(t1 + d, c, d, ()))
        out.append(EventSequence(sid, static, events, t1 + d, synthetic=True, history_residual=residual))
    return out
