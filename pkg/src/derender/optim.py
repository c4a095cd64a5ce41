"""Deterministic first-order minimization (fixed-step gradient descent and
Adam) plus the finite-difference oracle used to validate analytic
gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class OptimizationError(RuntimeError):
    """Raised when an objective or gradient turns non-finite mid-run.

    Carries the partial report so callers can inspect the trace.
    """

    def __init__(self, message: str, report: "ObjectiveReport | None" = None):
        super().__init__(message)
        self.report = report


@dataclass
class OptimConfig:
    iters: int = 100
    lr: float = 0.01
    # Optional box constraint: (lower, upper) arrays or scalars, applied
    # after each step. None leaves the parameters unconstrained.
    projection: tuple | None = None
    # "gd" takes fixed steps along the raw gradient. "adam" rescales each
    # coordinate by running moment estimates, which keeps the published
    # learning rates usable on badly conditioned objectives. "gd_ls" is
    # gradient descent with a backtracking line search: the step starts at lr,
    # doubles after an accepted step and halves on rejection, so the trace is
    # non-increasing by construction.
    method: str = "gd"
    beta1: float = 0.8
    beta2: float = 0.8
    adam_eps: float = 1e-8
    max_backtracks: int = 30

    def __post_init__(self):
        if self.iters < 0:
            raise ValueError("iters must be >= 0")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.method not in ("gd", "adam", "gd_ls"):
            raise ValueError(f"unknown method {self.method!r}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")


@dataclass
class ObjectiveReport:
    trace: list = field(default_factory=list)
    params: np.ndarray | None = None
    converged: bool = False
    # Per-trace-entry auxiliary data for objectives that report it (only
    # populated by block_descent).
    aux: list | None = None


def _project(x: np.ndarray, projection) -> np.ndarray:
    if projection is None:
        return x
    lo, hi = projection
    return np.clip(x, lo, hi)


def gradient_descent(objective, init: np.ndarray, cfg: OptimConfig) -> ObjectiveReport:
    """First-order minimization with a fixed step and optional box projection.

    ``objective(params) -> (value, gradient)``. The run is deterministic for
    fixed inputs; convergence is flagged when the relative decrease over the
    last 10 iterations drops below 1e-8. With ``method="adam"`` the step is
    the bias-corrected Adam update at the same learning rate.
    """
    x = _project(np.array(init, dtype=np.float64), cfg.projection)
    report = ObjectiveReport()
    value, grad = objective(x)
    if not np.isfinite(value):
        raise OptimizationError("objective non-finite at the initial point", report)
    report.trace.append(float(value))
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    lr = cfg.lr
    for t in range(1, cfg.iters + 1):
        grad = np.asarray(grad, dtype=np.float64)
        if not np.all(np.isfinite(grad)):
            report.params = x
            raise OptimizationError("gradient turned non-finite", report)
        if cfg.method == "adam":
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad**2
            m_hat = m / (1.0 - cfg.beta1**t)
            v_hat = v / (1.0 - cfg.beta2**t)
            step = m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
        else:
            step = grad
        if cfg.method == "gd_ls":
            for _ in range(cfg.max_backtracks):
                cand = _project(x - lr * step, cfg.projection)
                if np.array_equal(cand, x):
                    break
                v2, g2 = objective(cand)
                if not np.isfinite(v2):
                    report.params = x
                    raise OptimizationError("objective turned non-finite", report)
                if v2 <= value:
                    x, value, grad = cand, v2, g2
                    lr *= 2.0
                    break
                lr /= 2.0
            report.trace.append(float(value))
            continue
        x = _project(x - cfg.lr * step, cfg.projection)
        value, grad = objective(x)
        if not np.isfinite(value):
            report.params = x
            raise OptimizationError("objective turned non-finite", report)
        report.trace.append(float(value))
    report.params = x
    if len(report.trace) > 10:
        prev, last = report.trace[-11], report.trace[-1]
        report.converged = abs(prev - last) <= 1e-8 * max(1.0, abs(prev))
    return report


def block_descent(objective, init: np.ndarray, cfg: OptimConfig, blocks) -> ObjectiveReport:
    """Blockwise descent along Adam directions with per-block backtracking.

    ``objective(params) -> (value, gradient, aux)``; ``blocks`` is a list of
    slices into the parameter vector, updated in order within each iteration.
    Each block keeps its own step size, doubling after an accepted step (capped
    at cfg.lr) and halving on rejection, so the trace is non-increasing by
    construction. The per-coordinate Adam scaling handles parameter blocks
    whose gradient magnitudes differ by orders of magnitude.

    The report gains an ``aux`` attribute: the accepted point's aux per trace
    entry.
    """
    x = _project(np.array(init, dtype=np.float64), cfg.projection)
    report = ObjectiveReport()
    value, grad, aux = objective(x)
    if not np.isfinite(value):
        raise OptimizationError("objective non-finite at the initial point", report)
    grad = np.asarray(grad, dtype=np.float64)
    report.trace.append(float(value))
    aux_trace = [aux]
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    steps = [cfg.lr] * len(blocks)
    for t in range(1, cfg.iters + 1):
        if not np.all(np.isfinite(grad)):
            report.params = x
            report.aux = aux_trace
            raise OptimizationError("gradient turned non-finite", report)
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad**2
        d = (m / (1.0 - cfg.beta1**t)) / (np.sqrt(v / (1.0 - cfg.beta2**t)) + cfg.adam_eps)
        for bi, sl in enumerate(blocks):
            for _ in range(cfg.max_backtracks):
                cand = x.copy()
                cand[sl] = x[sl] - steps[bi] * d[sl]
                cand = _project(cand, cfg.projection)
                if np.array_equal(cand, x):
                    break
                v2, g2, aux2 = objective(cand)
                if not np.isfinite(v2):
                    report.params = x
                    report.aux = aux_trace
                    raise OptimizationError("objective turned non-finite", report)
                if v2 <= value:
                    x, value, aux = cand, float(v2), aux2
                    grad = np.asarray(g2, dtype=np.float64)
                    steps[bi] = min(steps[bi] * 2.0, cfg.lr)
                    break
                steps[bi] /= 2.0
        report.trace.append(value)
        aux_trace.append(aux)
    report.params = x
    report.aux = aux_trace
    if len(report.trace) > 10:
        prev, last = report.trace[-11], report.trace[-1]
        report.converged = abs(prev - last) <= 1e-8 * max(1.0, abs(prev))
    return report


def finite_diff(objective, params: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Coordinate-wise central differences of a scalar objective."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.array(params, dtype=np.float64)
    grad = np.empty_like(x)
    flat = x.ravel()
    g = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = objective(x)
        flat[i] = orig - eps
        fm = objective(x)
        flat[i] = orig
        g[i] = (fp - fm) / (2.0 * eps)
    return grad


def grad_check(value_and_grad, params: np.ndarray, eps: float = 1e-5) -> float:
    """Max relative error between an analytic gradient and central differences.

    ``value_and_grad(params) -> (value, gradient)``; the finite-difference
    oracle only ever calls it for the value.
    """
    if not (1e-6 <= eps <= 1e-3):
        raise ValueError("eps must lie in [1e-6, 1e-3]")
    _, analytic = value_and_grad(np.asarray(params, dtype=np.float64))
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = finite_diff(lambda p: value_and_grad(p)[0], params, eps)
    if not np.all(np.isfinite(numeric)):
        raise OptimizationError("objective non-finite at a perturbed point")
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1.0)
    return float(np.max(np.abs(analytic - numeric) / denom))
