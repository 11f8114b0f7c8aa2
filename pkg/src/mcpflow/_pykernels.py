"""Numpy implementations of the inner loops, used when the extension is absent."""

from __future__ import annotations

import numpy as np

MCP, SCP, MPP, LR = 0, 1, 2, 3


def history_block(times, indptr, indices, eval_times, hist_lens, variant, sigma, n_dynamic):
    n_eval = len(eval_times)
    out = np.zeros((n_eval, n_dynamic), dtype=np.float64)
    for e in range(n_eval):
        hl = int(hist_lens[e])
        if hl == 0:
            continue
        if variant == LR:
            out[e, indices[indptr[hl - 1]:indptr[hl]]] += 1.0
            continue
        if variant == MCP:
            lag = (eval_times[e] - times[:hl]) / sigma
            w = np.exp(-lag * lag)
        else:
            w = np.ones(hl)
        counts = np.diff(indptr[: hl + 1])
        np.add.at(out[e], indices[: indptr[hl]], np.repeat(w, counts))
    return out


def softmax_xent(logits, labels, weights, resid):
    active = labels >= 0
    resid[~active] = 0.0
    if not active.any():
        return 0.0
    z = logits[active]
    m = z.max(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", over="ignore"):
        lse = m[:, 0] + np.log(np.exp(z - m).sum(axis=1))
    if not np.all(np.isfinite(lse)):
        bad = int(np.flatnonzero(active)[np.flatnonzero(~np.isfinite(lse))[0]])
        raise FloatingPointError(f"non-finite logits in row {bad}")
    lab = labels[active]
    w = weights[active]
    rows = np.arange(len(lab))
    p = np.exp(z - lse[:, None]) * w[:, None]
    p[rows, lab] -= w
    resid[active] = p
    return float(-(w * (z[rows, lab] - lse)).sum())
