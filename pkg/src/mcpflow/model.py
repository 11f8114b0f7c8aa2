"""Fitted predictors sharing one interface: per-event state and duration distributions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Catalog, EventSequence, FeatureSpace, KernelConfig, build_feature
from .errors import ValidationError
from .learner import HierarchicalChain, class_probabilities


@dataclass
class FlowModel:
    """Parameter matrix plus everything needed to rebuild features."""

    params: np.ndarray
    kernel: KernelConfig
    space: FeatureSpace
    state_labels: tuple[str, ...]
    duration_labels: tuple[str, ...]
    catalog_hash: str = ""
    report: dict = field(default_factory=dict)

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=np.float64)
        self.state_labels = tuple(self.state_labels)
        self.duration_labels = tuple(self.duration_labels)
        expect = (self.space.size, self.n_states + self.n_durations)
        if self.params.shape != expect:
            raise ValidationError(f"parameter matrix shape {self.params.shape} != {expect}")

    @classmethod
    def zeros(cls, kernel: KernelConfig, catalog: Catalog) -> "FlowModel":
        k = catalog.n_states + catalog.n_durations
        return cls(np.zeros((catalog.space.size, k)), kernel, catalog.space, catalog.states, catalog.durations,
                   catalog.digest())

    @property
    def n_states(self) -> int:
        return len(self.state_labels)

    @property
    def n_durations(self) -> int:
        return len(self.duration_labels)

    @property
    def state_params(self) -> np.ndarray:
        return self.params[:, : self.n_states]

    @property
    def duration_params(self) -> np.ndarray:
        return self.params[:, self.n_states :]

    def feature(self, seq: EventSequence, history_len: int, t: float) -> np.ndarray:
        return build_feature(seq, history_len, t, self.kernel, self.space)

    def probabilities(self, seq: EventSequence, history_len: int, t: float):
        f = self.feature(seq, history_len, t)
        return class_probabilities(self.state_params, f), class_probabilities(self.duration_params, f)

    def predict(self, seq: EventSequence, history_len: int, t: float) -> tuple[int, int]:
        ps, pd = self.probabilities(seq, history_len, t)
        return int(np.argmax(ps)) + 1, int(np.argmax(pd)) + 1

    def predict_features(self, features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """0-based argmax classes for a batch of feature rows (ties to the lowest index)."""
        z = np.asarray(features) @ self.params
        return np.argmax(z[:, : self.n_states], axis=1), np.argmax(z[:, self.n_states :], axis=1)


@dataclass
class HierarchicalModel:
    """One MAJORITY/MINORITY cascade per head."""

    state_chain: HierarchicalChain
    duration_chain: HierarchicalChain
    kernel: KernelConfig
    space: FeatureSpace
    state_labels: tuple[str, ...]
    duration_labels: tuple[str, ...]
    catalog_hash: str = ""
    report: dict = field(default_factory=dict)

    @property
    def n_states(self) -> int:
        return len(self.state_labels)

    @property
    def n_durations(self) -> int:
        return len(self.duration_labels)

    def probabilities(self, seq: EventSequence, history_len: int, t: float):
        # cascades are deterministic: the verdict gets probability one
        c, d = self.predict(seq, history_len, t)
        ps, pd = np.zeros(self.n_states), np.zeros(self.n_durations)
        ps[c - 1] = 1.0
        pd[d - 1] = 1.0
        return ps, pd

    def predict(self, seq: EventSequence, history_len: int, t: float) -> tuple[int, int]:
        f = build_feature(seq, history_len, t, self.kernel, self.space)
        return self.state_chain.predict(f) + 1, self.duration_chain.predict(f) + 1

    def predict_features(self, features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.state_chain.predict_many(features), self.duration_chain.predict_many(features)
