"""Synthetic event sequences from a planted parameter matrix.

Labels are drawn from the same factorized categorical model the learner
fits: at each event time the next duration bucket and destination are
sampled from the softmax of the planted logits, the clock advances by the
bucket in days, and the new event's features come from the destination's
Bernoulli template.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .core import Catalog, Event, EventSequence, FeatureSpace, KernelConfig
from .errors import ValidationError
from .model import FlowModel


@dataclass
class GeneratorConfig:
    n_subjects: int = 500
    n_states: int = 4
    n_durations: int = 4
    n_static: int = 10
    n_dynamic: int = 30
    window: float = 60.0
    kernel: KernelConfig = field(default_factory=lambda: KernelConfig("mcp", 2.0))
    theta: np.ndarray | None = None
    sparsity: float = 0.5
    magnitude: tuple[float, float] = (0.5, 1.5)
    static_prob: float | np.ndarray = 0.3
    templates: np.ndarray | None = None
    signature_prob: float = 0.6
    background_prob: float = 0.05
    state_freqs: tuple[float, ...] | None = None
    duration_freqs: tuple[float, ...] | None = None
    calibration_subjects: int = 1000
    calibration_rounds: int = 12
    seed: int = 0

    def __post_init__(self):
        for name in ("n_subjects", "n_states", "n_durations"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if self.n_static < 0 or self.n_dynamic < 0 or self.n_static + self.n_dynamic == 0:
            raise ValidationError("feature dimensions must be non-negative and not both zero")
        if self.window < self.n_durations:
            raise ValidationError("window must be at least n_durations days")
        if not 0 <= self.sparsity <= 1:
            raise ValidationError("sparsity must lie in [0, 1]")
        m = self.n_static + self.n_dynamic
        if self.theta is not None:
            self.theta = np.asarray(self.theta, dtype=np.float64)
            if self.theta.shape != (m, self.n_states + self.n_durations):
                raise ValidationError(
                    f"planted theta shape {self.theta.shape} != ({m}, {self.n_states + self.n_durations})"
                )
        if self.templates is not None:
            self.templates = np.asarray(self.templates, dtype=np.float64)
            if self.templates.shape != (self.n_states, self.n_dynamic):
                raise ValidationError("templates must be n_states x n_dynamic")
        sp = np.broadcast_to(np.asarray(self.static_prob, dtype=np.float64), (self.n_static,))
        if np.any((sp < 0) | (sp > 1)):
            raise ValidationError("static_prob must lie in [0, 1]")
        for name, k in (("state_freqs", self.n_states), ("duration_freqs", self.n_durations)):
            v = getattr(self, name)
            if v is None:
                continue
            v = np.asarray(v, dtype=np.float64)
            if v.shape != (k,) or np.any(v <= 0) or abs(v.sum() - 1) > 1e-9:
                raise ValidationError(f"{name} must be {k} positive frequencies summing to 1")

    @property
    def space(self) -> FeatureSpace:
        return FeatureSpace(self.n_static, self.n_dynamic)

    def describe(self) -> dict:
        return {
            "n_subjects": self.n_subjects,
            "n_states": self.n_states,
            "n_durations": self.n_durations,
            "n_static": self.n_static,
            "n_dynamic": self.n_dynamic,
            "window": self.window,
            "kernel": {"variant": self.kernel.variant, "sigma": self.kernel.sigma},
            "sparsity": self.sparsity,
            "magnitude": list(self.magnitude),
            "signature_prob": self.signature_prob,
            "background_prob": self.background_prob,
            "state_freqs": None if self.state_freqs is None else list(self.state_freqs),
            "duration_freqs": None if self.duration_freqs is None else list(self.duration_freqs),
            "seed": self.seed,
        }


@dataclass
class GeneratedData:
    sequences: list[EventSequence]
    theta: np.ndarray
    state_offsets: np.ndarray
    duration_offsets: np.ndarray
    templates: np.ndarray
    static_prob: np.ndarray
    catalog: Catalog
    config: GeneratorConfig

    def planted_model(self) -> "PlantedModel":
        return PlantedModel(self.theta, self.state_offsets, self.duration_offsets, self.config.kernel,
                            self.config.space, self.catalog)

    def manifest(self) -> dict:
        return {
            "generator": self.config.describe(),
            "planted_theta": self.theta.tolist(),
            "state_offsets": self.state_offsets.tolist(),
            "duration_offsets": self.duration_offsets.tolist(),
            "templates": self.templates.tolist(),
            "static_prob": self.static_prob.tolist(),
            "catalog_hash": self.catalog.digest(),
        }


class PlantedModel(FlowModel):
    """The generating model: planted logits plus per-class offsets."""

    def __init__(self, theta, state_offsets, duration_offsets, kernel, space, catalog):
        super().__init__(theta, kernel, space, catalog.states, catalog.durations, catalog.digest())
        self.offsets = np.concatenate([state_offsets, duration_offsets])

    def probabilities(self, seq, history_len, t):
        f = self.feature(seq, history_len, t)
        z = f @ self.params + self.offsets
        return _softmax(z[: self.n_states]), _softmax(z[self.n_states :])

    def predict_features(self, features):
        z = np.asarray(features) @ self.params + self.offsets
        return np.argmax(z[:, : self.n_states], axis=1), np.argmax(z[:, self.n_states :], axis=1)


def _softmax(z):
    z = z - z.max()
    p = np.exp(z)
    return p / p.sum()


def _draw(p, u):
    cdf = np.cumsum(p)
    return min(int(np.searchsorted(cdf, u * cdf[-1], side="right")), len(p) - 1)


def planted_parameters(config: GeneratorConfig, rng: np.random.Generator) -> np.ndarray:
    """Row-sparse random matrix: each row is active with probability 1 - sparsity."""
    m = config.n_static + config.n_dynamic
    k = config.n_states + config.n_durations
    active = rng.random(m) >= config.sparsity
    lo, hi = config.magnitude
    values = rng.uniform(lo, hi, size=(m, k)) * rng.choice([-1.0, 1.0], size=(m, k))
    return values * active[:, None]


def default_templates(config: GeneratorConfig, rng: np.random.Generator) -> np.ndarray:
    """Each dynamic dimension is a signature of one state (high probability there, low elsewhere)."""
    owner = rng.permutation(np.arange(config.n_dynamic) % config.n_states)
    t = np.full((config.n_states, config.n_dynamic), config.background_prob)
    t[owner, np.arange(config.n_dynamic)] = config.signature_prob
    return t


def _subject(u, config, theta, offsets, templates, static_prob):
    rng = np.random.default_rng([config.seed, 1, u])
    kern = config.kernel
    c_n = config.n_states
    static = np.flatnonzero(rng.random(config.n_static) < static_prob)
    static_dense = np.zeros(config.n_static)
    static_dense[static] = 1.0
    theta_static, theta_dyn = theta[: config.n_static], theta[config.n_static :]
    static_logits = static_dense @ theta_static
    times: list[float] = []
    dyn_logits: list[np.ndarray] = []
    events: list[Event] = []
    t = 0.0
    while True:
        t_prev = times[-2] if len(times) >= 2 else 0.0
        if kern.variant == "mcp":
            g = t - t_prev
        elif kern.variant == "scp":
            g = t
        else:
            g = 1.0
        z = g * static_logits + offsets
        if times:
            if kern.variant == "lr":
                z = z + dyn_logits[-1]
            else:
                if kern.variant == "mcp":
                    lag = (t - np.asarray(times)) / kern.sigma
                    w = np.exp(-lag * lag)
                else:
                    w = np.ones(len(times))
                z = z + w @ np.asarray(dyn_logits)
        d = _draw(_softmax(z[c_n:]), rng.random()) + 1
        c = _draw(_softmax(z[:c_n]), rng.random()) + 1
        t_next = t + d
        if t_next > config.window:
            break
        feats = np.flatnonzero(rng.random(config.n_dynamic) < templates[c - 1])
        events.append(Event(t_next, c, d if events else None, feats))
        times.append(t_next)
        dyn_logits.append(theta_dyn[feats].sum(axis=0))
        t = t_next
    return EventSequence(f"s{u:06d}", static, events, config.window)


def _cohort(n, config, theta, offsets, templates, static_prob):
    return [_subject(u, config, theta, offsets, templates, static_prob) for u in range(n)]


def _marginals(sequences, config):
    s = np.zeros(config.n_states)
    d = np.zeros(config.n_durations)
    for seq in sequences:
        for ev in seq.events:
            s[ev.state - 1] += 1
            if ev.duration is not None:
                d[ev.duration - 1] += 1
    return s, d


def generate(config: GeneratorConfig) -> GeneratedData:
    """Deterministic in ``config`` (including its seed)."""
    rng = np.random.default_rng([config.seed, 0])
    theta = config.theta if config.theta is not None else planted_parameters(config, rng)
    templates = config.templates if config.templates is not None else default_templates(config, rng)
    static_prob = np.broadcast_to(np.asarray(config.static_prob, dtype=np.float64), (config.n_static,)).copy()
    offsets = np.zeros(config.n_states + config.n_durations)
    if config.state_freqs is not None or config.duration_freqs is not None:
        offsets = _calibrate(config, theta, templates, static_prob)
    sequences = _cohort(config.n_subjects, config, theta, offsets, templates, static_prob)
    catalog = Catalog.generic(config.n_static, config.n_dynamic, config.n_states, config.n_durations)
    return GeneratedData(
        sequences, theta, offsets[: config.n_states], offsets[config.n_states :], templates, static_prob,
        catalog, config,
    )


def _calibrate(config, theta, templates, static_prob):
    """Per-class logit offsets matching the target marginal frequencies on a calibration cohort.

    The cohort reuses the first subjects' random streams, so the fixed-point
    iteration sees common random numbers.
    """
    offsets = np.zeros(config.n_states + config.n_durations)
    n_cal = min(config.n_subjects, config.calibration_subjects)
    targets = [(config.state_freqs, slice(0, config.n_states)),
               (config.duration_freqs, slice(config.n_states, None))]
    for _ in range(config.calibration_rounds):
        seqs = _cohort(n_cal, config, theta, offsets, templates, static_prob)
        s, d = _marginals(seqs, config)
        for (target, sl), counts in zip(targets, (s, d)):
            if target is None:
                continue
            freq = (counts + 0.5) / (counts.sum() + 0.5 * len(counts))
            offsets[sl] += np.log(np.asarray(target)) - np.log(freq)
            offsets[sl] -= offsets[sl].mean()
    return offsets


def dataset_digest(sequences) -> str:
    from .io import sequence_to_record

    h = hashlib.sha256()
    for seq in sequences:
        h.update(json.dumps(sequence_to_record(seq), sort_keys=True, separators=(",", ":")).encode())
        h.update(b"\n")
    return h.hexdigest()
