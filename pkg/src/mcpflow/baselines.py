"""First-order Markov-chain baseline for states and duration buckets."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .core import EventSequence
from .errors import ValidationError


@dataclass(frozen=True)
class TransitionTable:
    """Row-stochastic K x K matrix over 1-based labels, plus the initial distribution."""

    matrix: np.ndarray
    initial: np.ndarray

    @property
    def n_labels(self) -> int:
        return len(self.initial)

    def row(self, label: int) -> np.ndarray:
        if not 1 <= label <= self.n_labels:
            raise ValidationError(f"label {label} outside 1..{self.n_labels}")
        return self.matrix[label - 1]

    def to_dict(self) -> dict:
        return {"matrix": self.matrix.tolist(), "initial": self.initial.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "TransitionTable":
        return cls(np.asarray(d["matrix"], dtype=np.float64), np.asarray(d["initial"], dtype=np.float64))


def mc_fit(chains: Iterable[Iterable[int]], n_labels: int) -> TransitionTable:
    """Count-based transition probabilities; rows with no outgoing transitions are uniform."""
    counts = np.zeros((n_labels, n_labels))
    first = np.zeros(n_labels)
    seen = False
    for chain in chains:
        chain = list(chain)
        if not chain:
            continue
        seen = True
        if any(not 1 <= c <= n_labels for c in chain):
            raise ValidationError(f"label outside 1..{n_labels} in chain {chain}")
        first[chain[0] - 1] += 1
        for a, b in zip(chain, chain[1:]):
            counts[a - 1, b - 1] += 1
    if not seen:
        raise ValidationError("no label chains to fit")
    if not counts.any():
        raise ValidationError("no transitions observed")
    totals = counts.sum(axis=1, keepdims=True)
    matrix = np.where(totals > 0, counts / np.where(totals > 0, totals, 1.0), 1.0 / n_labels)
    initial = first / first.sum()
    return TransitionTable(matrix, initial)


def mc_predict(table: TransitionTable, current: int) -> int:
    """Most likely next label; ties go to the smallest label."""
    return int(np.argmax(table.row(current))) + 1


def state_chains(sequences: Iterable[EventSequence]):
    return [[e.state for e in s.events] for s in sequences]


def duration_chains(sequences: Iterable[EventSequence]):
    return [[e.duration for e in s.events if e.duration is not None] for s in sequences]


@dataclass(frozen=True)
class MarkovBaseline:
    """Independent chains for destination states and for duration buckets.

    The next state is predicted from the current state; the next duration
    from the previous duration (or the initial duration distribution when
    none has been observed yet).
    """

    states: TransitionTable
    durations: TransitionTable

    @property
    def n_states(self) -> int:
        return len(self.states.initial)

    @property
    def n_durations(self) -> int:
        return len(self.durations.initial)

    @classmethod
    def fit(cls, sequences, n_states: int, n_durations: int) -> "MarkovBaseline":
        sequences = list(sequences)
        if not sequences:
            raise ValidationError("empty training set")
        dur = duration_chains(sequences)
        if not any(dur):
            raise ValidationError("no durations observed")
        return cls(mc_fit(state_chains(sequences), n_states), mc_fit(dur, n_durations))

    def probabilities(self, seq: EventSequence, history_len: int, t: float | None = None):
        events = seq.events[:history_len]
        p_state = self.states.initial if not events else self.states.row(events[-1].state)
        durs = [e.duration for e in events if e.duration is not None]
        p_dur = self.durations.initial if not durs else self.durations.row(durs[-1])
        return p_state, p_dur

    def predict(self, seq: EventSequence, history_len: int, t: float | None = None) -> tuple[int, int]:
        ps, pd = self.probabilities(seq, history_len, t)
        return int(np.argmax(ps)) + 1, int(np.argmax(pd)) + 1
