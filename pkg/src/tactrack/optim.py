"""Adam for small dense problems, plus a finite-difference gradient checker."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Union

import numpy as np

FD_STEP = 1e-6


class NonFiniteObjective(FloatingPointError):
    """The objective returned NaN or inf."""


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    max_iterations: int = 200
    relative_tolerance: float = 1e-8
    # Stop when the best value improved by less than relative_tolerance over
    # this many iterations.
    window: int = 10

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.window < 1:
            raise ValueError("window must be >= 1")


class OptimizeResult(NamedTuple):
    x: np.ndarray
    fun: float
    iterations: int


def central_difference(objective: Callable, x, step: float = FD_STEP) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (objective(x + e) - objective(x - e)) / (2.0 * step)
    return g


def _checked(f) -> float:
    f = float(f)
    if not math.isfinite(f):
        raise NonFiniteObjective(f"objective returned {f}")
    return f


def minimize(
    objective: Callable,
    x0,
    gradient: Union[Callable, bool, None] = None,
    config: Optional[OptimizerConfig] = None,
) -> OptimizeResult:
    """Minimize ``objective`` with Adam, returning the best iterate seen.

    ``gradient`` may be a callable, ``None`` (central differences), or ``True``
    when ``objective`` itself returns ``(value, gradient)``.
    """
    cfg = config or OptimizerConfig()
    x = np.array(x0, dtype=float)

    if gradient is True:
        def evaluate(z):
            f, g = objective(z)
            return _checked(f), np.asarray(g, dtype=float)
    else:
        grad_fn = gradient if callable(gradient) else (lambda z: central_difference(objective, z))

        def evaluate(z):
            f = _checked(objective(z))
            return f, np.asarray(grad_fn(z), dtype=float)

    f, g = evaluate(x)
    best_x, best_f = x.copy(), f
    history = [best_f]
    recent = [f]
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    b1, b2 = cfg.beta1, cfg.beta2
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        if not np.all(np.isfinite(g)):
            raise NonFiniteObjective("gradient is not finite")
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        m_hat = m / (1.0 - b1**it)
        v_hat = v / (1.0 - b2**it)
        x = x - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
        f, g = evaluate(x)
        if f < best_f:
            best_x, best_f = x.copy(), f
        history.append(best_f)
        recent.append(f)
        if it >= cfg.window:
            ref = history[-1 - cfg.window]
            tol = cfg.relative_tolerance * abs(ref)
            # A stalled best value alone also happens while Adam overshoots;
            # require the recent iterates to have settled as well.
            spread = max(recent[-cfg.window:]) - best_f
            if ref - best_f <= tol and spread <= tol:
                break
    return OptimizeResult(best_x, best_f, it)


def gradient_check(objective: Callable, gradient: Callable, x, step: float = FD_STEP) -> float:
    """Largest relative gap between ``gradient`` and central differences."""
    x = np.asarray(x, dtype=float)
    fd = central_difference(objective, x, step)
    analytic = np.asarray(gradient(x), dtype=float)
    return float(np.max(np.abs(analytic - fd) / np.maximum(1.0, np.abs(fd))))
