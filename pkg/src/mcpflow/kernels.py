"""Backend selection for the hot loops.

The compiled module is used when importable; set ``MCPFLOW_PURE_PYTHON=1``
to force the numpy fallback. Both expose the same two functions:

``history_block(times, indptr, indices, eval_times, hist_lens, variant, sigma, n_dynamic)``
    Kernel-weighted sums of sparse event feature rows (CSR layout), one
    output row per evaluation point, using the first ``hist_lens[e]`` events.
``softmax_xent(logits, labels, weights, resid)``
    Weighted cross-entropy of a softmax head; writes ``w * (p - onehot)``
    into ``resid`` and returns the loss. Rows with label -1 are skipped.
"""

from __future__ import annotations

import os

from . import _pykernels

VARIANT_CODES = {"mcp": 0, "scp": 1, "mpp": 2, "lr": 3}

_ckernels = None
if not os.environ.get("MCPFLOW_PURE_PYTHON"):
    try:
        from . import _ckernels
    except ImportError:
        _ckernels = None

_impl = _ckernels if _ckernels is not None else _pykernels
BACKEND = "cython" if _ckernels is not None else "python"

history_block = _impl.history_block
softmax_xent = _impl.softmax_xent


def backends() -> dict:
    """All importable backends by name, for benchmarks and cross-checks."""
    out = {"python": _pykernels}
    if _ckernels is not None:
        out["cython"] = _ckernels
    return out
