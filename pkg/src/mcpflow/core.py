"""Event sequences, kernel variants and construction of the feature vector f_t.

Times are fractional days since the sequence origin. State and duration
labels on :class:`Event` are 1-based; the null duration of a sequence's first
event is ``None``. Feature vectors are stored sparse (index tuples) and
materialized dense at evaluation points.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import ValidationError

VARIANTS = ("mcp", "scp", "mpp", "lr")


@dataclass(frozen=True)
class KernelConfig:
    """Kernel variant and bandwidth.

    ``mcp``: g(t) = t - t_I, h(t, t') = exp(-(t - t')^2 / sigma^2)
    ``scp``: g(t) = t, h = 1
    ``mpp``: g = 1, h = 1
    ``lr``:  g = 1, history block reduced to the most recent event's features
    """

    variant: str = "mcp"
    sigma: float = 1.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValidationError(f"unknown kernel variant {self.variant!r}; expected one of {VARIANTS}")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValidationError(f"sigma must be positive, got {self.sigma}")

    @property
    def code(self) -> int:
        return kernels.VARIANT_CODES[self.variant]


@dataclass(frozen=True)
class FeatureSpace:
    n_static: int
    n_dynamic: int

    @property
    def size(self) -> int:
        return self.n_static + self.n_dynamic


@dataclass(frozen=True)
class Event:
    time: float
    state: int
    duration: int | None
    features: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(int(i) for i in self.features))


@dataclass(frozen=True)
class EventSequence:
    """One subject's transitions.

    ``synthetic`` and ``history_residual`` are only set on pseudo-sequences
    written by the synthetic oversampler; such a record contributes a single
    training sample (its last event) whose history block is offset by the
    residual, given as ``((index, value), ...)``.
    """

    subject_id: str
    static_features: tuple[int, ...]
    events: tuple[Event, ...]
    window_end: float
    synthetic: bool = False
    history_residual: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "static_features", tuple(int(i) for i in self.static_features))
        object.__setattr__(self, "events", tuple(self.events))
        object.__setattr__(
            self, "history_residual", tuple((int(i), float(v)) for i, v in self.history_residual)
        )
        prev = 0.0
        for k, ev in enumerate(self.events):
            if not ev.time > prev:
                raise ValidationError(
                    f"{self.subject_id}: event times must be strictly increasing and positive (event {k + 1})"
                )
            prev = ev.time
            if k == 0 and ev.duration is not None:
                raise ValidationError(f"{self.subject_id}: first event must have a null duration")
            if k > 0 and ev.duration is None:
                raise ValidationError(f"{self.subject_id}: null duration only allowed on the first event")
        if self.events and self.events[-1].time > self.window_end:
            raise ValidationError(f"{self.subject_id}: event after window end {self.window_end}")

    def __len__(self) -> int:
        return len(self.events)

    def validate(self, space: FeatureSpace, n_states: int, n_durations: int) -> None:
        """Check labels and feature indices against catalog sizes."""
        if any(not 0 <= i < space.n_static for i in self.static_features):
            raise ValidationError(f"{self.subject_id}: static feature index out of range")
        for k, ev in enumerate(self.events):
            if not 1 <= ev.state <= n_states:
                raise ValidationError(f"{self.subject_id}: state {ev.state} outside 1..{n_states}")
            if ev.duration is not None and not 1 <= ev.duration <= n_durations:
                raise ValidationError(f"{self.subject_id}: duration {ev.duration} outside 1..{n_durations}")
            if any(not 0 <= i < space.n_dynamic for i in ev.features):
                raise ValidationError(f"{self.subject_id}: event {k + 1} feature index out of range")

    def prefix(self, n: int) -> "EventSequence":
        return EventSequence(self.subject_id, self.static_features, self.events[:n], self.window_end)

    def extended(self, event: Event) -> "EventSequence":
        return EventSequence(
            self.subject_id, self.static_features, self.events + (event,), max(self.window_end, event.time)
        )

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(times, indptr, indices) of the event feature rows."""
        times = np.array([e.time for e in self.events], dtype=np.float64)
        counts = [len(e.features) for e in self.events]
        indptr = np.zeros(len(self.events) + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        indices = np.fromiter(
            (i for e in self.events for i in e.features), dtype=np.int64, count=int(indptr[-1])
        )
        return times, indptr, indices

    def static_dense(self, n_static: int) -> np.ndarray:
        v = np.zeros(n_static)
        v[list(self.static_features)] = 1.0
        return v


def kernel_weight(t: float, t_prev: float, config: KernelConfig) -> float:
    """h(t, t_prev) for the configured variant.

    For ``lr`` this is the weight of a single event that is the most recent
    one; :func:`build_feature` zeroes all older events for that variant.
    """
    if t < t_prev:
        raise ValidationError(f"t={t} precedes t_prev={t_prev}")
    if config.variant == "mcp":
        lag = (t - t_prev) / config.sigma
        return math.exp(-lag * lag)
    return 1.0


def time_scale(t: float, t_last: float, config: KernelConfig) -> float:
    """g(t): elapsed time since t_last (mcp), absolute time (scp), or 1."""
    if t < t_last:
        raise ValidationError(f"t={t} precedes t_last={t_last}")
    if config.variant == "mcp":
        return t - t_last
    if config.variant == "scp":
        return t
    return 1.0


def last_event_time(seq: EventSequence, history_len: int, t: float) -> float:
    """t_I: time of the latest of the first ``history_len`` events strictly before t, else 0."""
    for ev in reversed(seq.events[:history_len]):
        if ev.time < t:
            return ev.time
    return 0.0


def _check_point(seq: EventSequence, history_len: int, t: float) -> None:
    if not 0 <= history_len <= len(seq.events):
        raise ValidationError(f"history_len {history_len} outside 0..{len(seq.events)}")
    floor = seq.events[history_len - 1].time if history_len else 0.0
    if t < floor:
        raise ValidationError(f"evaluation time {t} precedes the last history event at {floor}")


def build_feature(
    seq: EventSequence, history_len: int, t: float, config: KernelConfig, space: FeatureSpace
) -> np.ndarray:
    """Dense f_t = [f_0 * g(t) ; sum_i h(t, t_i) f_i] over the first ``history_len`` events."""
    _check_point(seq, history_len, t)
    out = np.empty(space.size)
    out[: space.n_static] = seq.static_dense(space.n_static) * time_scale(
        t, last_event_time(seq, history_len, t), config
    )
    times, indptr, indices = seq.csr
    out[space.n_static :] = kernels.history_block(
        times,
        indptr,
        indices,
        np.array([t], dtype=np.float64),
        np.array([history_len], dtype=np.int64),
        config.code,
        config.sigma,
        space.n_dynamic,
    )[0]
    return out


@dataclass(frozen=True)
class Catalog:
    """Feature vocabulary by block and class label names."""

    profile: tuple[str, ...]
    treatment: tuple[str, ...]
    medication: tuple[str, ...]
    nursing: tuple[str, ...]
    states: tuple[str, ...]
    durations: tuple[str, ...]

    def __post_init__(self):
        for name in ("profile", "treatment", "medication", "nursing", "states", "durations"):
            object.__setattr__(self, name, tuple(str(v) for v in getattr(self, name)))
        if not self.states or not self.durations:
            raise ValidationError("catalog needs at least one state and one duration label")

    @classmethod
    def generic(cls, n_static: int, n_dynamic: int, n_states: int, n_durations: int) -> "Catalog":
        return cls(
            profile=[f"p{i}" for i in range(n_static)],
            treatment=[f"x{i}" for i in range(n_dynamic)],
            medication=(),
            nursing=(),
            states=[f"S{i + 1}" for i in range(n_states)],
            durations=[f"{i + 1}d" for i in range(n_durations)],
        )

    @property
    def space(self) -> FeatureSpace:
        return FeatureSpace(len(self.profile), len(self.treatment) + len(self.medication) + len(self.nursing))

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_durations(self) -> int:
        return len(self.durations)

    @property
    def dynamic_names(self) -> tuple[str, ...]:
        return self.treatment + self.medication + self.nursing

    @cached_property
    def _static_index(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.profile)}

    @cached_property
    def _dynamic_index(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.dynamic_names)}

    def static_index(self, code: str) -> int | None:
        return self._static_index.get(code)

    def dynamic_index(self, code: str) -> int | None:
        return self._dynamic_index.get(code)

    def to_dict(self) -> dict:
        return {
            "profile": list(self.profile),
            "treatment": list(self.treatment),
            "medication": list(self.medication),
            "nursing": list(self.nursing),
            "states": list(self.states),
            "durations": list(self.durations),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Catalog":
        try:
            return cls(**{k: d.get(k, ()) for k in ("profile", "treatment", "medication", "nursing")},
                       states=d["states"], durations=d["durations"])
        except KeyError as exc:
            raise ValidationError(f"catalog is missing {exc}") from None

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class SampleParts:
    """Raw ingredients of each training feature, used by the oversampler.

    composed feature = [static * scale ; recent + residual]
    """

    static: np.ndarray  # (n, n_static) 0/1
    scale: np.ndarray  # (n,) g at the evaluation time
    recent: np.ndarray  # (n, n_dynamic) 0/1, most recent event's features
    residual: np.ndarray  # (n, n_dynamic) kernel-weighted older history

    def compose(self) -> np.ndarray:
        return np.hstack([self.static * self.scale[:, None], self.recent + self.residual])

    def take(self, idx) -> "SampleParts":
        return SampleParts(self.static[idx], self.scale[idx], self.recent[idx], self.residual[idx])

    @staticmethod
    def concat(parts: Sequence["SampleParts"]) -> "SampleParts":
        return SampleParts(
            np.concatenate([p.static for p in parts]),
            np.concatenate([p.scale for p in parts]),
            np.concatenate([p.recent for p in parts]),
            np.concatenate([p.residual for p in parts]),
        )


@dataclass
class SampleSet:
    """Columnar training samples (f_{t_{i-1}}, c_i, d_i, w_i).

    ``states`` and ``durations`` hold 0-based class indices; a null
    duration is -1.
    """

    features: np.ndarray
    states: np.ndarray
    durations: np.ndarray
    n_states: int
    n_durations: int
    weights: np.ndarray | None = None
    parts: SampleParts | None = None
    synthetic: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.features)
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.states = np.asarray(self.states, dtype=np.int64)
        self.durations = np.asarray(self.durations, dtype=np.int64)
        if self.weights is None:
            self.weights = np.ones(n)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.synthetic is None:
            self.synthetic = np.zeros(n, dtype=bool)
        if not (len(self.states) == len(self.durations) == len(self.weights) == n):
            raise ValidationError("sample arrays have inconsistent lengths")
        if n and (self.states.min() < 0 or self.states.max() >= self.n_states):
            raise ValidationError("state label out of range")
        if n and (self.durations.min() < -1 or self.durations.max() >= self.n_durations):
            raise ValidationError("duration label out of range")
        if np.any(self.weights <= 0):
            raise ValidationError("sample weights must be positive")

    def __len__(self) -> int:
        return len(self.features)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "SampleSet":
        idx = np.asarray(idx)
        return SampleSet(
            self.features[idx],
            self.states[idx],
            self.durations[idx],
            self.n_states,
            self.n_durations,
            self.weights[idx],
            None if self.parts is None else self.parts.take(idx),
            self.synthetic[idx],
        )

    def with_weights(self, weights: np.ndarray) -> "SampleSet":
        out = self.subset(np.arange(len(self)))
        out.weights = np.asarray(weights, dtype=np.float64)
        return out


def sequence_samples(seq: EventSequence, config: KernelConfig, space: FeatureSpace):
    """Features and raw parts for every event of one sequence.

    Row i (0-based) is evaluated at the previous event's time with the
    previous events as history; the first row uses t = 0 and no history.
    """
    n = len(seq.events)
    times, indptr, indices = seq.csr
    eval_times = np.concatenate([[0.0], times[:-1]]) if n else np.zeros(0)
    hist = np.arange(n, dtype=np.int64)
    block = kernels.history_block(
        times, indptr, indices, eval_times, hist, config.code, config.sigma, space.n_dynamic
    )
    t_last = np.concatenate([[0.0, 0.0], times[:-2]])[:n] if n else np.zeros(0)
    if config.variant == "mcp":
        scale = eval_times - t_last
    elif config.variant == "scp":
        scale = eval_times.copy()
    else:
        scale = np.ones(n)
    static = np.zeros((n, space.n_static))
    static[:, list(seq.static_features)] = 1.0
    recent = np.zeros((n, space.n_dynamic))
    for i in range(1, n):
        recent[i, indices[indptr[i - 1] : indptr[i]]] = 1.0
    residual = block - recent
    if seq.history_residual:
        for j, v in seq.history_residual:
            residual[:, j] += v
            block[:, j] += v
    features = np.hstack([static * scale[:, None], block])
    return features, SampleParts(static, scale, recent, residual)


def build_samples(
    sequences: Iterable[EventSequence],
    config: KernelConfig,
    space: FeatureSpace,
    n_states: int,
    n_durations: int,
) -> SampleSet:
    """One sample per event: feature at t_{i-1}, labels (c_i, d_i)."""
    feats, parts, states, durs, synth = [], [], [], [], []
    for seq in sequences:
        if not seq.events:
            continue
        f, p = sequence_samples(seq, config, space)
        st = [e.state - 1 for e in seq.events]
        du = [-1 if e.duration is None else e.duration - 1 for e in seq.events]
        if seq.synthetic:
            f, p, st, du = f[-1:], p.take(slice(-1, None)), st[-1:], du[-1:]
        feats.append(f)
        parts.append(p)
        states.extend(st)
        durs.extend(du)
        synth.extend([seq.synthetic] * len(st))
    if not feats:
        raise ValidationError("no events to build training samples from")
    return SampleSet(
        np.vstack(feats),
        np.array(states, dtype=np.int64),
        np.array(durs, dtype=np.int64),
        n_states,
        n_durations,
        parts=SampleParts.concat(parts),
        synthetic=np.array(synth, dtype=bool),
    )


def mean_duration(sequences: Iterable[EventSequence]) -> float:
    """Mean of the non-null duration labels, read as days (auto bandwidth rule)."""
    d = [e.duration for s in sequences for e in s.events if e.duration is not None]
    if not d:
        raise ValidationError("no non-null durations to derive sigma from")
    return float(np.mean(d))
