"""Pointwise Hamiltonian and the two continuous-control optimizers.

The decision-maker's intervention q maximizes -r(q) a(x) p - h(q) over a
discrete candidate grid (ties broken toward the smallest q, i.e. toward no
intervention); nature's drift distortion lambda minimizes the quadratic
-sigma lambda a(x) p + lambda^2 / (2 psi0) in closed form with clamping to
[-lambda_max, lambda_max].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ProblemSpec


@dataclass(frozen=True)
class ControlSample:
    """One admissible control point; used for bound checks in tests."""

    q: float
    lam: float
    theta1: float
    theta2: float

    def admissible(self, spec: ProblemSpec) -> bool:
        return (0.0 <= self.q <= spec.q_max
                and abs(self.lam) <= spec.lambda_max
                and 0.0 <= self.theta1 <= spec.theta_max
                and 0.0 <= self.theta2 <= spec.theta_max)


def lambda_field(spec: ProblemSpec, a_vals: np.ndarray, p_vals: np.ndarray):
    """Vectorized worst-case drift distortion and its objective value."""
    lam = np.clip(spec.psi0 * spec.sigma * a_vals * p_vals,
                  -spec.lambda_max, spec.lambda_max)
    value = -spec.sigma * lam * a_vals * p_vals + lam ** 2 / (2.0 * spec.psi0)
    return lam, value


def q_field(spec: ProblemSpec, a_vals: np.ndarray, p_vals: np.ndarray):
    """Vectorized discrete argmax of -r(q) a p - h(q); first (smallest) q wins ties.

    Returns (q_star, max_value, r_at_q_star).
    """
    qs = spec.q_grid()
    r_vals = np.asarray(spec.growth_rate_r(qs), dtype=float)
    h_vals = np.asarray(spec.cost_h(qs), dtype=float)
    objective = -np.outer(r_vals, a_vals * p_vals) - h_vals[:, None]
    k = np.argmax(objective, axis=0)
    cols = np.arange(objective.shape[1])
    return qs[k], objective[k, cols], r_vals[k]


def optimal_lambda(spec: ProblemSpec, x: float, p: float) -> tuple[float, float]:
    a = np.asarray(spec.growth_a(x), dtype=float).reshape(1)
    lam, value = lambda_field(spec, a, np.asarray([float(p)]))
    return float(lam[0]), float(value[0])


def optimal_q(spec: ProblemSpec, x: float, p: float) -> tuple[float, float]:
    a = np.asarray(spec.growth_a(x), dtype=float).reshape(1)
    q, value, _ = q_field(spec, a, np.asarray([float(p)]))
    return float(q[0]), float(value[0])


def hamiltonian(spec: ProblemSpec, x: float, p: float) -> float:
    """f(x) minus the intervention maximum minus the distortion minimum."""
    f = float(np.asarray(spec.disutility_f(x), dtype=float))
    _, q_value = optimal_q(spec, x, p)
    _, lam_value = optimal_lambda(spec, x, p)
    return f - q_value - lam_value
