"""Quadrature rows for the jump expectations and the worst-case jump operators.

Each mesh node gets one nonnegative weight row W[i, :] such that (W @ phi)[i]
approximates the expectation of phi at the post-jump state: a downward jump
maps x to (1-z)x, an upward jump maps x to z + (1-z)x, with z drawn from the
jump-size density. Rows are renormalized to sum exactly to one so constants
pass through the expectation unchanged, which is what keeps the discrete
operators comparison-preserving.

The worst-case intensity distortion has the closed form theta* = exp(-psi *
delta) with delta = phi(x) - E[phi(post-jump)], and the distorted operator
value is (nu/psi) * (1 - exp(-psi * delta)).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.sparse as sp
from scipy.special import xlogy

from .grid import Mesh, interp_weights_many
from .model import JumpDensity

TransformKind = Literal["down", "up"]


def entropy_penalty(theta):
    """Relative-entropy rate theta ln theta + 1 - theta, with 0 ln 0 = 0."""
    theta = np.asarray(theta, dtype=float)
    return xlogy(theta, theta) + 1.0 - theta


@dataclass(frozen=True, eq=False)
class JumpQuadrature:
    weights: sp.csr_matrix      # (n_nodes, n_nodes), rows sum to 1
    transform_kind: TransformKind

    @property
    def n_nodes(self) -> int:
        return self.weights.shape[0]


def _transform(kind: TransformKind, z: np.ndarray, x: np.ndarray) -> np.ndarray:
    if kind == "down":
        return (1.0 - z) * x
    if kind == "up":
        return z + (1.0 - z) * x
    raise ValueError(f"unknown transform kind {kind!r}")


def build_jump_quadrature(mesh: Mesh, density: JumpDensity,
                          transform_kind: TransformKind,
                          n_quad: int = 64) -> JumpQuadrature:
    """Midpoint-rule quadrature of the jump expectation, one row per node."""
    if n_quad < 2:
        raise ValueError("n_quad must be >= 2")
    if transform_kind not in ("down", "up"):
        raise ValueError(f"unknown transform kind {transform_kind!r}")
    lo, hi = density.support_lo, density.support_hi
    if not (0.0 < lo <= hi < 1.0):
        raise ValueError("jump density support must satisfy 0 < lo <= hi < 1")

    if density.is_point_mass:
        z = np.asarray([lo])
        w = np.asarray([1.0])
    else:
        dz = (hi - lo) / n_quad
        z = lo + (np.arange(n_quad) + 0.5) * dz
        w = np.asarray(density.density(z), dtype=float) * dz
        if np.any(w < 0.0) or w.sum() <= 0.0:
            raise ValueError("jump density must be nonnegative with positive mass")

    n = mesh.n_nodes
    ys = np.clip(_transform(transform_kind, z[None, :], mesh.nodes[:, None]), 0.0, 1.0)
    idx, lw, rw = interp_weights_many(mesh, ys.ravel())
    rows = np.repeat(np.arange(n), z.size)
    w_flat = np.tile(w, n)
    data = np.concatenate([w_flat * lw, w_flat * rw])
    cols = np.concatenate([idx, idx + 1])
    mat = sp.coo_matrix((data, (np.concatenate([rows, rows]), cols)),
                        shape=(n, n)).tocsr()
    row_sums = np.asarray(mat.sum(axis=1)).ravel()
    inv = sp.diags(1.0 / row_sums)
    return JumpQuadrature(weights=(inv @ mat).tocsr(), transform_kind=transform_kind)


def apply_expectation(quad: JumpQuadrature, phi: np.ndarray) -> np.ndarray:
    """Row-wise post-jump expectation W @ phi."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (quad.n_nodes,):
        raise ValueError(f"field has shape {phi.shape}, quadrature expects "
                         f"({quad.n_nodes},)")
    return quad.weights @ phi


def apply_nonlocal(quad: JumpQuadrature, phi: np.ndarray, nu: float, psi: float,
                   theta_max: float):
    """Worst-case distorted jump operator and its minimizing intensity factor.

    Returns (values, delta, theta_star) with delta = phi - W @ phi,
    values = (nu/psi)(1 - exp(-psi delta)) and theta_star = exp(-psi delta)
    clamped into [0, theta_max].
    """
    if psi <= 0.0:
        raise ValueError("psi must be > 0")
    delta = np.asarray(phi, dtype=float) - apply_expectation(quad, phi)
    values = (nu / psi) * (-np.expm1(-psi * delta))
    theta_star = np.minimum(np.exp(-psi * delta), theta_max)
    return values, delta, theta_star
