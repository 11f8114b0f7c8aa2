"""Next-event prediction, accuracy metrics and week-ahead occupancy simulation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Event, EventSequence, build_samples
from .errors import ValidationError
from .model import FlowModel, HierarchicalModel


def predict_next(model, seq: EventSequence, history_len: int, t: float) -> tuple[int, int]:
    """Argmax state and argmax duration (1-based) given the first ``history_len`` events."""
    return model.predict(seq, history_len, t)


def predict_events(model, sequences: Sequence[EventSequence]):
    """Predictions for every event of every sequence, each made at the previous event's time.

    Returns ``(pred_states, true_states, pred_durations, true_durations)``
    as 1-based integer arrays; events with a null duration are left out of
    the duration pair.
    """
    sequences = [s for s in sequences if s.events]
    if not sequences:
        raise ValidationError("no events to predict")
    if isinstance(model, (FlowModel, HierarchicalModel)):
        samples = build_samples(sequences, model.kernel, model.space, model.n_states, model.n_durations)
        ps, pd = model.predict_features(samples.features)
        has_d = samples.durations >= 0
        return ps + 1, samples.states + 1, pd[has_d] + 1, samples.durations[has_d] + 1
    ps, ts, pd, td = [], [], [], []
    for seq in sequences:
        for i, ev in enumerate(seq.events):
            t = seq.events[i - 1].time if i else 0.0
            c, d = model.predict(seq, i, t)
            ps.append(c)
            ts.append(ev.state)
            if ev.duration is not None:
                pd.append(d)
                td.append(ev.duration)
    return np.array(ps), np.array(ts), np.array(pd, dtype=np.int64), np.array(td, dtype=np.int64)


@dataclass(frozen=True)
class AccuracyReport:
    """Per-class accuracy (None for classes absent from the truths) and the overall accuracy."""

    per_class: dict
    counts: dict
    overall: float

    def rows(self, names: Sequence[str] | None = None):
        for label, acc in self.per_class.items():
            name = names[label - 1] if names else str(label)
            yield name, self.counts[label], acc


def accuracy_report(predictions, truths, labels) -> AccuracyReport:
    """AC_k = correct_k / total_k; overall = sum_k (total_k / total) AC_k."""
    predictions = np.asarray(predictions)
    truths = np.asarray(truths)
    if predictions.shape != truths.shape:
        raise ValidationError(f"{len(predictions)} predictions for {len(truths)} truths")
    if len(truths) == 0:
        raise ValidationError("no predictions to score")
    per_class, counts = {}, {}
    overall = 0.0
    for k in labels:
        mask = truths == k
        n = int(mask.sum())
        counts[k] = n
        if n == 0:
            per_class[k] = None
            continue
        acc = float(np.count_nonzero(predictions[mask] == k)) / n
        per_class[k] = acc
        overall += n / len(truths) * acc
    return AccuracyReport(per_class, counts, overall)


@dataclass
class OccupancyMatrix:
    """counts[c, d]: patients in state c+1 on day d+1."""

    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.float64)
        if self.counts.ndim != 2 or np.any(self.counts < 0):
            raise ValidationError("occupancy must be a non-negative states x days matrix")

    @property
    def daily_totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def horizon(self) -> int:
        return self.counts.shape[1]


def _state_at(seq: EventSequence, when: float) -> int | None:
    state = None
    for ev in seq.events:
        if ev.time > when:
            break
        state = ev.state
    return state


def occupancy_from_sequences(
    sequences: Sequence[EventSequence], starts: Sequence[float], horizon: int, n_states: int
) -> OccupancyMatrix:
    """Observed occupancy: day k counts the state held at start + k.

    Patients stay in their last observed state past the end of their record.
    Patients with no event by their start time are not counted.
    """
    counts = np.zeros((n_states, horizon))
    for seq, start in zip(sequences, starts):
        for day in range(horizon):
            s = _state_at(seq, start + day + 1)
            if s is not None:
                counts[s - 1, day] += 1
    return OccupancyMatrix(counts)


def _draw(p: np.ndarray, u: float) -> int:
    cdf = np.cumsum(p)
    return min(int(np.searchsorted(cdf, u * cdf[-1], side="right")), len(p) - 1)


def simulate_cohort(
    model,
    cohort: Sequence[EventSequence],
    horizon: int = 7,
    rounds: int = 1,
    seed: int = 0,
    starts: Sequence[float] | None = None,
    duration_model=None,
) -> OccupancyMatrix:
    """Roll each patient forward and average daily occupancy over ``rounds``.

    At each step a duration bucket and a destination are drawn from the
    distributions at the current event time (bucket d holds the patient for
    d days). The simulated event is appended to the history, carrying the
    features of the patient's last observed event. Patients never leave.
    ``starts`` defaults to each patient's last event time; day k is the
    state held at start + k (an event exactly at that time counts). Randomness is derived from
    (seed, round, patient index).
    """
    if not cohort:
        raise ValidationError("empty cohort")
    if horizon < 1 or rounds < 1:
        raise ValidationError("horizon and rounds must be >= 1")
    duration_model = duration_model or model
    n_states = model.n_states
    if starts is None:
        starts = [s.events[-1].time if s.events else 0.0 for s in cohort]
    total = np.zeros((n_states, horizon))
    for r in range(rounds):
        for idx, (seq, start) in enumerate(zip(cohort, starts)):
            if not seq.events:
                raise ValidationError(f"{seq.subject_id}: cannot simulate a patient with no events")
            last = seq.events[-1]
            if start < last.time:
                raise ValidationError(f"{seq.subject_id}: start {start} precedes last event at {last.time}")
            rng = np.random.default_rng([seed, r, idx])
            t, unit, carry = last.time, last.state, last.features
            day = 0
            while day < horizon:
                p_state = model.probabilities(seq, len(seq.events), t)[0]
                p_dur = duration_model.probabilities(seq, len(seq.events), t)[1]
                d = _draw(p_dur, rng.random()) + 1
                c = _draw(p_state, rng.random()) + 1
                t_next = t + d
                while day < horizon and start + day + 1 < t_next:
                    total[unit - 1, day] += 1
                    day += 1
                seq = seq.extended(Event(t_next, c, d, carry))
                t, unit = t_next, c
    return OccupancyMatrix(total / rounds)


@dataclass(frozen=True)
class SimulationError:
    per_state: list  # Err_c, None where every day had zero real occupancy
    overall: float | None
    skipped_cells: int


def relative_sim_error(real: OccupancyMatrix, sim: OccupancyMatrix) -> SimulationError:
    """Err_c = mean_d |N_cd - N^_cd| / N_cd and Err_C on daily totals; zero real cells are skipped."""
    if real.counts.shape != sim.counts.shape:
        raise ValidationError(f"shape mismatch {real.counts.shape} vs {sim.counts.shape}")
    per_state = []
    skipped = 0
    for c in range(real.counts.shape[0]):
        n, m = real.counts[c], sim.counts[c]
        ok = n > 0
        skipped += int((~ok).sum())
        per_state.append(float(np.mean(np.abs(n[ok] - m[ok]) / n[ok])) if ok.any() else None)
    n, m = real.daily_totals, sim.daily_totals
    ok = n > 0
    skipped += int((~ok).sum())
    overall = float(np.mean(np.abs(n[ok] - m[ok]) / n[ok])) if ok.any() else None
    return SimulationError(per_state, overall, skipped)


def split_for_simulation(sequences: Sequence[EventSequence]):
    """Cut each sequence after its middle event: (prefix, start time) pairs for week-ahead checks."""
    prefixes, starts, kept = [], [], []
    for seq in sequences:
        if len(seq.events) < 2:
            continue
        cut = (len(seq.events) + 1) // 2
        prefixes.append(seq.prefix(cut))
        starts.append(seq.events[cut - 1].time)
        kept.append(seq)
    return prefixes, starts, kept
