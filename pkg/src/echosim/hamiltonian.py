"""Driven chaotic Hamiltonian and its forked (perturbed) branches.

H = p^2/(2m) - kappa*cos(x - l*sin(t)) + a*(x + s*epsilon)^2/2

with s = 0 for the base branch and s = +/-1 for the perturbed branches.
The branch difference is the linear perturbation V = H_plus - H_minus
= 2*a*epsilon*x.  Time is always absolute so the drive phase never resets
across a fork.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

_BRANCH_SHIFT = {"base": 0.0, "plus": 1.0, "minus": -1.0}


@dataclass(frozen=True)
class DrivenHamiltonian:
    m: float = 1.0
    kappa: float = 0.36
    l: float = 3.8
    a: float = 0.01
    epsilon: float = 0.5
    branch: str = "base"

    def __post_init__(self):
        if self.branch not in _BRANCH_SHIFT:
            raise ValueError(f"unknown branch {self.branch!r}; expected base/plus/minus")
        if self.m <= 0:
            raise ValueError("mass must be positive")

    @property
    def shift(self) -> float:
        """Harmonic-center shift s*epsilon of this branch."""
        return _BRANCH_SHIFT[self.branch] * self.epsilon

    def with_branch(self, branch: str) -> "DrivenHamiltonian":
        return replace(self, branch=branch)


def potential_value(h: DrivenHamiltonian, x, t: float):
    """V(x, t) = -kappa*cos(x - l*sin t) + a*(x + s*eps)^2/2 for this branch."""
    return -h.kappa * np.cos(x - h.l * np.sin(t)) + 0.5 * h.a * (x + h.shift) ** 2


def force_value(h: DrivenHamiltonian, x, t: float):
    """-dV/dx = -kappa*sin(x - l*sin t) - a*(x + s*eps)."""
    return -h.kappa * np.sin(x - h.l * np.sin(t)) - h.a * (x + h.shift)


def perturbation_value(h: DrivenHamiltonian, x):
    """V = H_plus - H_minus = 2*a*epsilon*x, independent of time and branch."""
    return 2.0 * h.a * h.epsilon * np.asarray(x, dtype=float)
