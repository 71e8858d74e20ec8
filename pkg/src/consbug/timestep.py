"""Explicit Runge-Kutta tableaus and a matrix-valued stepper."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ButcherTableau:
    label: str
    a: np.ndarray  # strictly lower triangular, shape (s, s)
    b: np.ndarray

    def __post_init__(self):
        s = len(self.b)
        if self.a.shape != (s, s):
            raise ValueError("a must be s x s")
        if np.any(np.triu(self.a) != 0):
            raise ValueError("explicit tableaus need a strictly lower triangular a")
        if abs(np.sum(self.b) - 1.0) > 1e-15:
            raise ValueError("weights b must sum to one")

    @property
    def stages(self):
        return len(self.b)

    @property
    def c(self):
        return self.a.sum(axis=1)


_TABLEAUS = {
    "euler": ([[0.0]], [1.0]),
    "heun": ([[0.0, 0.0], [1.0, 0.0]], [0.5, 0.5]),
    "midpoint": ([[0.0, 0.0], [0.5, 0.0]], [0.0, 1.0]),
    "rk4": (
        [[0.0, 0.0, 0.0, 0.0], [0.5, 0.0, 0.0, 0.0], [0.0, 0.5, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]],
        [1 / 6, 1 / 3, 1 / 3, 1 / 6],
    ),
}

TABLEAU_LABELS = tuple(_TABLEAUS)


def tableau(label):
    """Classical coefficients for ``euler``, ``heun``, ``midpoint`` or ``rk4``."""
    if isinstance(label, ButcherTableau):
        return label
    try:
        a, b = _TABLEAUS[label]
    except KeyError:
        raise ValueError(f"unknown tableau {label!r}; expected one of {TABLEAU_LABELS}") from None
    return ButcherTableau(label, np.array(a, dtype=float), np.array(b, dtype=float))


def rk_step(rhs, y0, dt, tab):
    """One explicit RK step of ``y' = rhs(y)``.

    Returns ``(y1, stages)`` where ``stages[i]`` is the i-th stage slope
    ``rhs(y0 + dt * sum_j a_ij stages[j])``. Stages are evaluated in order.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    tab = tableau(tab)
    y0 = np.asarray(y0, dtype=float)
    stages = []
    for i in range(tab.stages):
        yi = y0
        for j in range(i):
            if tab.a[i, j] != 0.0:
                yi = yi + (dt * tab.a[i, j]) * stages[j]
        F = np.asarray(rhs(yi), dtype=float)
        if F.shape != y0.shape:
            raise ValueError(f"rhs returned shape {F.shape}, expected {y0.shape}")
        stages.append(F)
    y1 = y0
    for bi, F in zip(tab.b, stages):
        if bi != 0.0:
            y1 = y1 + (dt * bi) * F
    return y1, stages
