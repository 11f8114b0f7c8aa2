"""File formats: line-delimited datasets, catalog sidecars and model documents.

Dataset line::

    {"subject_id": "...", "window_end": 30.0, "static": [0, 4],
     "events": [{"time": 1.0, "state": 2, "duration": null, "features": [3, 7]}, ...]}

Feature entries may be integer indices or catalog names; names missing from
the catalog are dropped. States may be 1-based integers or catalog names.
Records written by the oversampler carry ``"synthetic": true`` and an
optional ``"history_residual": [[index, value], ...]``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .baselines import MarkovBaseline, TransitionTable
from .core import Catalog, Event, EventSequence, FeatureSpace, KernelConfig
from .errors import ValidationError
from .learner import BinaryStep, HierarchicalChain
from .model import FlowModel, HierarchicalModel

MODEL_FORMAT = "mcpflow-model"
MODEL_VERSION = 1


def catalog_path_for(data_path: str | Path) -> Path:
    p = Path(data_path)
    name = p.name
    for suffix in (".jsonl", ".json", ".ndjson"):
        if name.endswith(suffix):
            name = name[: -len(suffix)]
            break
    return p.with_name(name + ".catalog.json")


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_catalog(catalog: Catalog, path: str | Path) -> None:
    Path(path).write_text(json.dumps(catalog.to_dict(), indent=1, sort_keys=True) + "\n")


def read_catalog(path: str | Path) -> Catalog:
    return Catalog.from_dict(json.loads(Path(path).read_text()))


def sequence_to_record(seq: EventSequence) -> dict:
    rec = {
        "subject_id": seq.subject_id,
        "window_end": seq.window_end,
        "static": list(seq.static_features),
        "events": [
            {"time": e.time, "state": e.state, "duration": e.duration, "features": list(e.features)}
            for e in seq.events
        ],
    }
    if seq.synthetic:
        rec["synthetic"] = True
        if seq.history_residual:
            rec["history_residual"] = [list(p) for p in seq.history_residual]
    return rec


def _resolve(entries, lookup, where):
    out = []
    for x in entries:
        if isinstance(x, str):
            idx = lookup(x)
            if idx is not None:
                out.append(idx)
        elif isinstance(x, int) and not isinstance(x, bool):
            out.append(x)
        else:
            raise ValidationError(f"{where}: bad feature entry {x!r}")
    return sorted(set(out))


def record_to_sequence(rec: dict, catalog: Catalog | None = None) -> EventSequence:
    try:
        sid = str(rec["subject_id"])
        events = []
        for k, e in enumerate(rec["events"]):
            state = e["state"]
            if isinstance(state, str):
                if catalog is None or state not in catalog.states:
                    raise ValidationError(f"{sid}: unknown state {state!r}")
                state = catalog.states.index(state) + 1
            dur = e.get("duration")
            feats = _resolve(
                e.get("features", []),
                catalog.dynamic_index if catalog else (lambda _: None),
                f"{sid} event {k + 1}",
            )
            events.append(Event(float(e["time"]), int(state), None if dur is None else int(dur), feats))
        static = _resolve(rec.get("static", []), catalog.static_index if catalog else (lambda _: None), sid)
        return EventSequence(
            sid,
            static,
            events,
            float(rec["window_end"]),
            synthetic=bool(rec.get("synthetic", False)),
            history_residual=[tuple(p) for p in rec.get("history_residual", [])],
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed record: {exc!r}") from None


def write_dataset(sequences, path: str | Path) -> None:
    with open(path, "w") as fh:
        for seq in sequences:
            fh.write(_dump(sequence_to_record(seq)) + "\n")


def read_dataset(path: str | Path, catalog: Catalog | None = None) -> list[EventSequence]:
    """Parse and validate a dataset file (against ``catalog`` when given)."""
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
            seq = record_to_sequence(rec, catalog)
            if catalog is not None:
                seq.validate(catalog.space, catalog.n_states, catalog.n_durations)
            out.append(seq)
    return out


def _sparse_rows(mat: np.ndarray) -> dict:
    rows = np.flatnonzero(np.any(mat != 0, axis=1))
    return {"shape": list(mat.shape), "rows": rows.tolist(), "values": mat[rows].tolist()}


def _dense_rows(d: dict) -> np.ndarray:
    out = np.zeros(tuple(d["shape"]))
    if d["rows"]:
        out[np.asarray(d["rows"], dtype=np.int64)] = np.asarray(d["values"], dtype=np.float64)
    return out


def _header(kind, model) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": kind,
        "state_labels": list(model.state_labels),
        "duration_labels": list(model.duration_labels),
    }


def _chain_dict(chain: HierarchicalChain) -> dict:
    return {
        "n_classes": chain.n_classes,
        "last": chain.last,
        "steps": [{"majority": s.majority, "params": _sparse_rows(s.params)} for s in chain.steps],
    }


def _chain_from(d: dict) -> HierarchicalChain:
    steps = [BinaryStep(s["majority"], _dense_rows(s["params"])) for s in d["steps"]]
    return HierarchicalChain(steps, d["last"], d["n_classes"])


def model_document(model, extra: dict | None = None) -> dict:
    if isinstance(model, MarkovBaseline):
        doc = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "kind": "markov",
            "states": model.states.to_dict(),
            "durations": model.durations.to_dict(),
        }
    else:
        kind = "dmcp-hierarchical" if isinstance(model, HierarchicalModel) else "dmcp"
        doc = _header(kind, model)
        doc.update(
            kernel={"variant": model.kernel.variant, "sigma": model.kernel.sigma},
            feature_space={"n_static": model.space.n_static, "n_dynamic": model.space.n_dynamic},
            catalog_hash=model.catalog_hash,
            report=model.report,
        )
        if kind == "dmcp":
            doc["params"] = _sparse_rows(model.params)
        else:
            doc["state_chain"] = _chain_dict(model.state_chain)
            doc["duration_chain"] = _chain_dict(model.duration_chain)
    if extra:
        doc.update(extra)
    return doc


def save_model(model, path: str | Path, extra: dict | None = None) -> None:
    Path(path).write_text(json.dumps(model_document(model, extra), sort_keys=True, indent=1) + "\n")


def load_model(path: str | Path, catalog: Catalog | None = None):
    """Load any model kind; refuses a catalog whose hash differs from the one recorded."""
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != MODEL_FORMAT:
        raise ValidationError(f"{path}: not a model file")
    if doc.get("version") != MODEL_VERSION:
        raise ValidationError(f"{path}: unsupported model version {doc.get('version')}")
    kind = doc["kind"]
    if kind == "markov":
        return MarkovBaseline(TransitionTable.from_dict(doc["states"]), TransitionTable.from_dict(doc["durations"]))
    if catalog is not None and doc.get("catalog_hash") and doc["catalog_hash"] != catalog.digest():
        raise ValidationError(f"{path}: feature catalog hash does not match the dataset catalog")
    kernel = KernelConfig(doc["kernel"]["variant"], doc["kernel"]["sigma"])
    space = FeatureSpace(doc["feature_space"]["n_static"], doc["feature_space"]["n_dynamic"])
    if kind == "dmcp":
        return FlowModel(_dense_rows(doc["params"]), kernel, space, doc["state_labels"], doc["duration_labels"],
                         doc.get("catalog_hash", ""), doc.get("report", {}))
    if kind == "dmcp-hierarchical":
        return HierarchicalModel(
            _chain_from(doc["state_chain"]), _chain_from(doc["duration_chain"]), kernel, space,
            tuple(doc["state_labels"]), tuple(doc["duration_labels"]), doc.get("catalog_hash", ""),
            doc.get("report", {}),
        )
    raise ValidationError(f"{path}: unknown model kind {kind!r}")
