"""Discriminative learning of the intensity parameters.

The parameter matrix has one row per feature dimension and one column per
class of each prediction head (states first, then durations). Its rows are
the group-lasso groups, so a zeroed feature is dropped by both heads at once.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import SampleSet
from .errors import SolverError, ValidationError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    """ADMM settings.

    ``beta0`` is the initial gradient step, or ``"auto"`` for the inverse of
    a Lipschitz bound of the Theta sub-problem. Step ``l`` of each inner loop
    uses ``beta0 * beta_decay / (beta_decay + l)``; the default decay of 1
    gives beta0 / k with k counted from 1.
    """

    gamma: float = 1.0
    rho: float = 1.0
    beta0: float | str = 1e-4
    epsilon: float = 0.01
    max_outer: int = 200
    max_inner: int = 100
    seed: int = 0
    beta_decay: float = 1.0
    batch_size: int | None = None
    init_scale: float = 0.01

    def __post_init__(self):
        if self.gamma < 0:
            raise ValidationError("gamma must be >= 0")
        for name in ("rho", "epsilon", "beta_decay", "init_scale"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be > 0")
        if self.beta0 != "auto" and not (isinstance(self.beta0, (int, float)) and self.beta0 > 0):
            raise ValidationError("beta0 must be > 0 or 'auto'")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValidationError("iteration caps must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")


@dataclass
class FitResult:
    """Solver output. ``params`` is the sparse X iterate and is the model."""

    params: np.ndarray
    theta: np.ndarray
    loss: float
    theta_loss: float
    objective: float
    residual: float
    outer_iterations: int
    inner_iterations: int
    converged: bool
    beta0: float
    history: list = field(default_factory=list)

    def report(self) -> dict:
        return {
            "returned_iterate": "X",
            "loss": self.loss,
            "theta_loss": self.theta_loss,
            "objective": self.objective,
            "primal_residual": self.residual,
            "outer_iterations": self.outer_iterations,
            "inner_iterations": self.inner_iterations,
            "converged": self.converged,
            "beta0": float(self.beta0),
            "nonzero_rows": int(np.count_nonzero(np.any(self.params != 0, axis=1))),
        }


def class_probabilities(theta_block: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Normalized intensities exp(theta_k . f) / sum_k' exp(theta_k' . f)."""
    theta_block = np.asarray(theta_block, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    if theta_block.ndim != 2 or f.ndim != 1 or theta_block.shape[0] != f.shape[0]:
        raise ValidationError(
            f"dimension mismatch: theta block {theta_block.shape} vs feature {f.shape}"
        )
    if theta_block.shape[1] < 1:
        raise ValidationError("need at least one class")
    z = f @ theta_block
    z = z - z.max()
    p = np.exp(z)
    return p / p.sum()


def _heads(samples: SampleSet):
    return [(samples.states, samples.n_states), (samples.durations, samples.n_durations)]


def _objective(theta, features, heads, weights):
    """Weighted cross-entropy summed over heads, and its gradient."""
    logits = features @ theta
    resid = np.empty_like(logits)
    total = 0.0
    start = 0
    for labels, k in heads:
        z = np.ascontiguousarray(logits[:, start : start + k])
        r = np.empty_like(z)
        try:
            total += kernels.softmax_xent(z, labels, weights, r)
        except FloatingPointError as exc:
            raise SolverError(str(exc)) from None
        resid[:, start : start + k] = r
        start += k
    return total, features.T @ resid


def _check_theta(theta, samples: SampleSet) -> None:
    k = samples.n_states + samples.n_durations
    if theta.shape != (samples.n_features, k):
        raise ValidationError(f"theta shape {theta.shape} != ({samples.n_features}, {k})")
    if len(samples) == 0:
        raise ValidationError("empty sample set")


def loss(theta: np.ndarray, samples: SampleSet) -> float:
    """-sum_i w_i [log p(c_i|f_i) + log p(d_i|f_i)]; null durations skip the second term."""
    theta = np.asarray(theta, dtype=np.float64)
    _check_theta(theta, samples)
    return _objective(theta, samples.features, _heads(samples), samples.weights)[0]


def gradient(theta: np.ndarray, samples: SampleSet) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    _check_theta(theta, samples)
    return _objective(theta, samples.features, _heads(samples), samples.weights)[1]


def group_lasso_prox(v: np.ndarray, tau: float) -> np.ndarray:
    """argmin_X 0.5 ||V - X||_F^2 + tau * sum_m ||X_m||_2 (row-wise block soft-threshold)."""
    if tau < 0:
        raise ValidationError("tau must be >= 0")
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise SolverError("non-finite input to group_lasso_prox")
    norms = np.linalg.norm(v, axis=1)
    out = np.zeros_like(v)  # zeroed rows are +0.0, so sparse serialization round-trips bit-exactly
    keep = norms > tau
    out[keep] = v[keep] * (1.0 - tau / norms[keep])[:, None]
    return out


def group_norm(theta: np.ndarray) -> float:
    """||Theta||_{1,2}: sum of row l2 norms."""
    return float(np.linalg.norm(np.asarray(theta, dtype=np.float64), axis=1).sum())


def lipschitz_step(features: np.ndarray, weights: np.ndarray, rho: float) -> float:
    """1 / (0.5 * lambda_max(F^T W F) + rho), a safe constant step for the Theta sub-problem.

    The softmax cross-entropy Hessian of each head is bounded by
    0.5 * F^T W F (Kronecker) I.
    """
    fw = features * np.sqrt(weights)[:, None]
    lam = np.linalg.norm(fw, 2) ** 2 if fw.size else 0.0
    return 1.0 / (0.5 * lam + rho)


def _relative_change(new, old, outer, inner) -> float:
    with np.errstate(over="ignore", invalid="ignore"):
        top, bottom = np.linalg.norm(new - old), np.linalg.norm(new)
    if not (np.isfinite(top) and np.isfinite(bottom)):
        where = f"outer {outer}" + ("" if inner is None else f", inner {inner}")
        raise SolverError(f"iterate norm overflowed at {where}; reduce beta0")
    return float(top / max(bottom, 1e-300))


def _fit(features, heads, weights, config: SolverConfig) -> FitResult:
    n, m = features.shape
    k = sum(size for _, size in heads)
    rng = np.random.default_rng(config.seed)
    theta = rng.uniform(-config.init_scale, config.init_scale, size=(m, k))
    x = theta.copy()
    y = np.zeros_like(theta)
    beta0 = lipschitz_step(features, weights, config.rho) if config.beta0 == "auto" else float(config.beta0)
    rho, eps = config.rho, config.epsilon
    tau = config.gamma / rho

    batch = config.batch_size if config.batch_size and config.batch_size < n else None
    batch_rng = np.random.default_rng([config.seed, 1])

    def objective(th):
        if batch is None:
            return _objective(th, features, heads, weights)
        idx = np.sort(batch_rng.choice(n, size=batch, replace=False))
        val, g = _objective(th, features[idx], [(lab[idx], s) for lab, s in heads], weights[idx])
        return val * n / batch, g * (n / batch)

    total_inner = 0
    converged = False
    history = []
    outer = 0
    for outer in range(1, config.max_outer + 1):
        prev = theta
        th = theta
        for inner in range(config.max_inner):
            beta = beta0 * config.beta_decay / (config.beta_decay + inner)
            val, g = objective(th)
            if not np.isfinite(val):
                raise SolverError(f"loss became non-finite at outer {outer}, inner {inner}")
            step = g + rho * (th - x + y)
            new = th - beta * step
            if not np.all(np.isfinite(new)):
                raise SolverError(f"iterate became non-finite at outer {outer}, inner {inner}")
            total_inner += 1
            change = _relative_change(new, th, outer, inner)
            th = new
            if change <= eps:
                break
        theta = th
        x = group_lasso_prox(theta + y, tau)
        y = y + (theta - x)
        theta_norm = np.linalg.norm(theta)
        rel = _relative_change(theta, prev, outer, None)
        resid = np.linalg.norm(theta - x)
        history.append((outer, float(val), float(rel), float(resid)))
        if rel <= eps and resid <= eps * max(theta_norm, 1e-12):
            converged = True
            break
        if log.isEnabledFor(logging.DEBUG):
            log.debug("outer %d loss %.6g rel %.3g resid %.3g", outer, val, rel, resid)

    final_loss = _objective(x, features, heads, weights)[0]
    theta_loss = _objective(theta, features, heads, weights)[0]
    return FitResult(
        params=x,
        theta=theta,
        loss=float(final_loss),
        theta_loss=float(theta_loss),
        objective=float(final_loss + config.gamma * group_norm(x)),
        residual=float(np.linalg.norm(theta - x)),
        outer_iterations=outer,
        inner_iterations=total_inner,
        converged=converged,
        beta0=beta0,
        history=history,
    )


def admm_fit(samples: SampleSet, config: SolverConfig | None = None) -> FitResult:
    """Minimize loss(Theta) + gamma * ||Theta||_{1,2} by ADMM.

    Theta^(0) ~ U(-init_scale, init_scale) from ``config.seed``, X^(0) =
    Theta^(0), Y^(0) = 0. Each outer iteration runs gradient steps on
    loss + rho/2 ||Theta - X + Y||^2, then X = prox(Theta + Y, gamma/rho)
    and Y += Theta - X. Stops when the relative change of Theta and the
    relative primal residual ||Theta - X|| both fall below epsilon.
    """
    config = config or SolverConfig()
    if len(samples) == 0:
        raise ValidationError("empty sample set")
    return _fit(samples.features, _heads(samples), samples.weights, config)


@dataclass
class BinaryStep:
    majority: int
    params: np.ndarray  # (M, 2): column 0 MAJORITY, column 1 MINORITY


@dataclass
class HierarchicalChain:
    """Cascade of MAJORITY-vs-MINORITY classifiers over 0-based class indices."""

    steps: list[BinaryStep]
    last: int
    n_classes: int

    @property
    def order(self) -> list[int]:
        return [s.majority for s in self.steps]

    def predict(self, f: np.ndarray) -> int:
        f = np.asarray(f, dtype=np.float64)
        for step in self.steps:
            z = f @ step.params
            if z[0] >= z[1]:
                return step.majority
        return self.last

    def predict_many(self, features: np.ndarray) -> np.ndarray:
        out = np.full(len(features), self.last, dtype=np.int64)
        undecided = np.ones(len(features), dtype=bool)
        for step in self.steps:
            z = features @ step.params
            hit = undecided & (z[:, 0] >= z[:, 1])
            out[hit] = step.majority
            undecided &= ~hit
        return out


def hierarchical_fit(
    features: np.ndarray,
    labels: np.ndarray,
    n_classes: int,
    config: SolverConfig | None = None,
    weights: np.ndarray | None = None,
) -> HierarchicalChain:
    """Rank classes by count (ties to the smaller index), peel off the majority one at a time.

    Samples with label -1 are ignored.
    """
    config = config or SolverConfig()
    labels = np.asarray(labels, dtype=np.int64)
    keep = labels >= 0
    features, labels = np.asarray(features, dtype=np.float64)[keep], labels[keep]
    weights = np.ones(len(labels)) if weights is None else np.asarray(weights, dtype=np.float64)[keep]
    counts = np.bincount(labels, minlength=n_classes)
    present = [c for c in sorted(range(n_classes), key=lambda c: (-counts[c], c)) if counts[c] > 0]
    if len(present) < 2:
        raise ValidationError("hierarchical fit needs at least two classes present")
    steps = []
    remaining = np.ones(len(labels), dtype=bool)
    for majority in present[:-1]:
        f = features[remaining]
        binary = np.where(labels[remaining] == majority, 0, 1).astype(np.int64)
        res = _fit(f, [(binary, 2)], weights[remaining], config)
        steps.append(BinaryStep(majority, res.params))
        remaining &= labels != majority
    return HierarchicalChain(steps, present[-1], n_classes)


def hierarchical_predict(chain: HierarchicalChain, f: np.ndarray) -> int:
    return chain.predict(f)
