"""Fully implicit backward marching for the robust-control HJBI equation.

One backward step solves, by policy iteration, the discrete equation

    phi/dt - D phi_xx - b(controls) phi_x + (nu1 th1 + nu2 th2) phi
        = phi_next/dt + source(controls) + nu1 th1 (W1 phi_lag) + nu2 th2 (W2 phi_lag)

where D = sigma^2 a^2 / 2, b = gamma1 - (gamma0+gamma1)x + (r(q) + sigma
lambda) a, and W1, W2 are the jump-expectation quadratures. The drift is
discretized centrally wherever 2D/dx >= |b| and upwind along b otherwise, so
every assembled row is an M-matrix row. The jump expectations are lagged at
the current policy iterate, which keeps every linear solve tridiagonal; the
local parts nu theta phi stay implicit.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .grid import Mesh, TimeGrid
from .jump_ops import (JumpQuadrature, apply_nonlocal, build_jump_quadrature,
                       entropy_penalty)
from .local_ops import lambda_field, q_field
from .model import ProblemSpec, validate_spec


class SchemeError(RuntimeError):
    """An assembled row violated the M-matrix structure (scheme bug)."""


class SingularSystemError(RuntimeError):
    """Tridiagonal elimination hit a zero pivot."""


class PolicyIterationError(RuntimeError):
    def __init__(self, message: str, residual: float, time_label: float):
        super().__init__(message)
        self.residual = residual
        self.time_label = time_label


# ---------------------------------------------------------------------------
# fields and reports
# ---------------------------------------------------------------------------

@dataclass
class ValueField:
    values: np.ndarray
    time_label: float


@dataclass
class ControlField:
    q_star: np.ndarray
    lambda_star: np.ndarray
    theta1_star: np.ndarray
    theta2_star: np.ndarray
    time_label: float


@dataclass
class TridiagonalSystem:
    lower: np.ndarray   # subdiagonal, length n-1
    diag: np.ndarray    # length n
    upper: np.ndarray   # superdiagonal, length n-1
    rhs: np.ndarray


@dataclass
class ErgodicReport:
    E_mean: float
    E_spread: float
    per_node_E: np.ndarray


@dataclass
class Snapshot:
    time: float
    value: ValueField
    controls: ControlField | None


@dataclass
class ControlTable:
    """Control fields on the PDE time levels; nearest-in-time lookup."""

    times: np.ndarray           # ascending
    nodes: np.ndarray
    q: np.ndarray               # (n_times, n_nodes)
    lam: np.ndarray
    theta1: np.ndarray
    theta2: np.ndarray

    @property
    def spacing(self) -> float:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0

    def slice_index(self, t: float) -> int:
        pos = np.searchsorted(self.times, t)
        if pos == 0:
            return 0
        if pos == self.times.size:
            return self.times.size - 1
        return int(pos if self.times[pos] - t < t - self.times[pos - 1] else pos - 1)

    def controls_at(self, t: float) -> ControlField:
        j = self.slice_index(t)
        return ControlField(self.q[j], self.lam[j], self.theta1[j],
                            self.theta2[j], float(self.times[j]))

    @classmethod
    def constant(cls, nodes: np.ndarray, q: float, lam: float, theta1: float,
                 theta2: float, time: float = 0.0) -> "ControlTable":
        n = len(nodes)
        one = np.ones((1, n))
        return cls(times=np.asarray([time]), nodes=np.asarray(nodes, dtype=float),
                   q=q * one, lam=lam * one, theta1=theta1 * one, theta2=theta2 * one)


@dataclass
class SolveResult:
    final_value: ValueField
    final_controls: ControlField
    ergodic: ErgodicReport
    iteration_stats: np.ndarray
    snapshots: list[Snapshot]
    mesh: Mesh
    time_grid: TimeGrid
    control_table: ControlTable | None = None


@dataclass(frozen=True)
class PolicyConfig:
    tol: float = 1e-9
    max_iter: int = 50


# ---------------------------------------------------------------------------
# discretized operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SchemeOperators:
    spec: ProblemSpec
    mesh: Mesh
    quad_down: JumpQuadrature
    quad_up: JumpQuadrature
    a_vals: np.ndarray
    f_vals: np.ndarray
    base_drift: np.ndarray      # gamma1 - (gamma0 + gamma1) x
    diffusion: np.ndarray       # sigma^2 a^2 / 2


def build_scheme(spec: ProblemSpec, mesh: Mesh, n_quad: int = 64) -> SchemeOperators:
    x = mesh.nodes
    a_vals = np.asarray(spec.growth_a(x), dtype=float)
    return SchemeOperators(
        spec=spec,
        mesh=mesh,
        quad_down=build_jump_quadrature(mesh, spec.jump_density_1, "down", n_quad),
        quad_up=build_jump_quadrature(mesh, spec.jump_density_2, "up", n_quad),
        a_vals=a_vals,
        f_vals=np.asarray(spec.disutility_f(x), dtype=float),
        base_drift=spec.gamma1 - (spec.gamma0 + spec.gamma1) * x,
        diffusion=0.5 * spec.sigma ** 2 * a_vals ** 2,
    )


def controlled_drift(ops: SchemeOperators, r_of_q: np.ndarray,
                     lam: np.ndarray) -> np.ndarray:
    return ops.base_drift + (r_of_q + ops.spec.sigma * lam) * ops.a_vals


def _central_mask(ops: SchemeOperators, drift: np.ndarray) -> np.ndarray:
    central = 2.0 * ops.diffusion / ops.mesh.dx >= np.abs(drift)
    central[0] = False
    central[-1] = False
    return central


def _gradient(ops: SchemeOperators, phi: np.ndarray,
              drift: np.ndarray) -> np.ndarray:
    """Slope field using the same central/upwind stencil as the assembly."""
    dx = ops.mesh.dx
    fwd = np.empty_like(phi)
    bwd = np.empty_like(phi)
    diffs = np.diff(phi) / dx
    fwd[:-1] = diffs
    fwd[-1] = diffs[-1]
    bwd[1:] = diffs
    bwd[0] = diffs[0]
    cen = 0.5 * (fwd + bwd)
    p = np.where(_central_mask(ops, drift), cen, np.where(drift > 0.0, fwd, bwd))
    p[0] = fwd[0]
    p[-1] = bwd[-1]
    return p


def assemble_system(ops: SchemeOperators, dt: float, controls: ControlField,
                    phi_next: np.ndarray, phi_lagged: np.ndarray,
                    expectations: tuple[np.ndarray, np.ndarray] | None = None
                    ) -> TridiagonalSystem:
    """One implicit backward-Euler system at fixed controls.

    `expectations` may carry precomputed (W1 phi_lagged, W2 phi_lagged) rows;
    otherwise they are evaluated here.
    """
    spec = ops.spec
    mesh = ops.mesh
    n = mesh.n_nodes
    dx = mesh.dx
    D = ops.diffusion
    th1 = controls.theta1_star
    th2 = controls.theta2_star
    lam = controls.lambda_star
    q = controls.q_star

    r_q = np.asarray(spec.growth_rate_r(q), dtype=float)
    drift = controlled_drift(ops, r_q, lam)
    central = _central_mask(ops, drift)
    b_plus = np.maximum(drift, 0.0)
    b_minus = np.minimum(drift, 0.0)

    Dxx = D / dx ** 2
    low_central = -(Dxx - drift / (2.0 * dx))
    up_central = -(Dxx + drift / (2.0 * dx))
    low_upwind = -Dxx + b_minus / dx
    up_upwind = -Dxx - b_plus / dx
    row_low = np.where(central, low_central, low_upwind)
    row_up = np.where(central, up_central, up_upwind)
    row_diag = np.where(central, 2.0 * Dxx, 2.0 * Dxx + np.abs(drift) / dx)

    lower = np.zeros(n - 1)
    upper = np.zeros(n - 1)
    diag = np.full(n, 1.0 / dt) + spec.nu1 * th1 + spec.nu2 * th2
    lower[: n - 2] = row_low[1:-1]
    upper[1:] = row_up[1:-1]
    diag[1:-1] += row_diag[1:-1]
    # boundary rows: one-sided upwind, inward-pointing drift only (the
    # diffusion degenerates there because a vanishes at 0 and 1)
    upper[0] = -b_plus[0] / dx
    diag[0] += b_plus[0] / dx
    lower[-1] = b_minus[-1] / dx
    diag[-1] += -b_minus[-1] / dx

    if expectations is None:
        expectations = (ops.quad_down.weights @ phi_lagged,
                        ops.quad_up.weights @ phi_lagged)
    w1, w2 = expectations

    source = (ops.f_vals + np.asarray(spec.cost_h(q), dtype=float)
              - lam ** 2 / (2.0 * spec.psi0)
              - (spec.nu1 / spec.psi1) * entropy_penalty(th1)
              - (spec.nu2 / spec.psi2) * entropy_penalty(th2))
    rhs = phi_next / dt + source + spec.nu1 * th1 * w1 + spec.nu2 * th2 * w2

    sys = TridiagonalSystem(lower=lower, diag=diag, upper=upper, rhs=rhs)
    _check_m_matrix(sys, dt)
    return sys


def _check_m_matrix(sys: TridiagonalSystem, dt: float) -> None:
    scale = max(float(np.max(sys.diag)), 1.0)
    slack = 1e-9 * scale
    if np.any(sys.lower > slack) or np.any(sys.upper > slack):
        raise SchemeError("positive off-diagonal entry in assembled system")
    off = np.zeros_like(sys.diag)
    off[1:] += np.abs(sys.lower)
    off[:-1] += np.abs(sys.upper)
    if np.any(sys.diag < 1.0 / dt - slack) or np.any(sys.diag < off - slack):
        raise SchemeError("assembled system lost diagonal dominance")


def thomas_solve(sys: TridiagonalSystem) -> np.ndarray:
    """Solve the tridiagonal system by pivot-free elimination.

    Diagonal dominance of the scheme rows makes partial pivoting a no-op, so
    the LAPACK gtsv elimination reduces to the classical forward/backward
    Thomas sweep.
    """
    n = sys.diag.size
    if sys.lower.size != n - 1 or sys.upper.size != n - 1 or sys.rhs.size != n:
        raise ValueError("inconsistent tridiagonal system shapes")
    if n == 1:
        if sys.diag[0] == 0.0:
            raise SingularSystemError("zero pivot in 1x1 system")
        return sys.rhs / sys.diag
    _, _, _, x, info = lapack.dgtsv(sys.lower, sys.diag, sys.upper, sys.rhs)
    if info > 0:
        raise SingularSystemError(f"zero pivot at row {info - 1}")
    if info < 0:
        raise ValueError(f"invalid argument {-info} passed to tridiagonal solve")
    return x


# ---------------------------------------------------------------------------
# policy iteration and the time march
# ---------------------------------------------------------------------------

def _extract_controls(ops: SchemeOperators, phi: np.ndarray,
                      stencil_drift: np.ndarray, time_label: float):
    """Pointwise optimizers at the current iterate.

    Returns (controls, expectations, drift) with the jump expectations reused
    both for theta* and for the lagged right-hand side.
    """
    spec = ops.spec
    p = _gradient(ops, phi, stencil_drift)
    lam, _ = lambda_field(spec, ops.a_vals, p)
    q, _, r_q = q_field(spec, ops.a_vals, p)
    _, delta1, th1 = apply_nonlocal(ops.quad_down, phi, spec.nu1, spec.psi1,
                                    spec.theta_max)
    _, delta2, th2 = apply_nonlocal(ops.quad_up, phi, spec.nu2, spec.psi2,
                                    spec.theta_max)
    controls = ControlField(q_star=q, lambda_star=lam, theta1_star=th1,
                            theta2_star=th2, time_label=time_label)
    expectations = (phi - delta1, phi - delta2)
    return controls, expectations, controlled_drift(ops, r_q, lam)


def step_backward(ops: SchemeOperators, dt: float, phi_next: ValueField,
                  policy: PolicyConfig | None = None):
    """One implicit step from phi_next down to time_label - dt.

    Policy iteration alternates control extraction on the current iterate
    with one tridiagonal solve until the slice stops moving in max norm.
    Returns (value, controls, n_iterations).
    """
    policy = policy or PolicyConfig()
    spec = ops.spec
    t_new = phi_next.time_label - dt
    phi = phi_next.values
    # first stencil choice uses the uncontrolled drift (q = 0, lambda = 0)
    r0 = float(np.asarray(spec.growth_rate_r(0.0), dtype=float))
    drift = controlled_drift(ops, r0, np.zeros_like(phi))

    change = np.inf
    for iteration in range(1, policy.max_iter + 1):
        controls, expectations, drift = _extract_controls(ops, phi, drift, t_new)
        sys = assemble_system(ops, dt, controls, phi_next.values, phi,
                              expectations=expectations)
        phi_new = thomas_solve(sys)
        change = float(np.max(np.abs(phi_new - phi)))
        phi = phi_new
        if change <= policy.tol:
            break
    else:
        raise PolicyIterationError(
            f"policy iteration stalled at t={t_new:.6g} "
            f"(residual {change:.3e} after {policy.max_iter} iterations)",
            residual=change, time_label=t_new)

    # re-extract so the reported controls are consistent with the converged slice
    controls, _, _ = _extract_controls(ops, phi, drift, t_new)
    return ValueField(values=phi, time_label=t_new), controls, iteration


def ergodic_estimate(phi_t0: ValueField, phi_t1: ValueField,
                     dt: float) -> ErgodicReport:
    """Backward-difference estimate of -dPhi/dt from two adjacent slices."""
    if phi_t0.values.shape != phi_t1.values.shape:
        raise ValueError("ergodic estimate needs slices on the same mesh")
    earlier, later = ((phi_t0, phi_t1) if phi_t0.time_label <= phi_t1.time_label
                      else (phi_t1, phi_t0))
    gap = later.time_label - earlier.time_label
    if abs(gap - dt) > 1e-9 * max(1.0, dt):
        raise ValueError(f"slice labels differ by {gap}, expected dt={dt}")
    per_node = (earlier.values - later.values) / dt
    mean = float(np.mean(per_node))
    spread = float(np.max(np.abs(per_node - mean)))
    return ErgodicReport(E_mean=mean, E_spread=spread, per_node_E=per_node)


def switching_points(q_field_values: np.ndarray, mesh: Mesh,
                     q_threshold: float = 0.5) -> list[tuple[float, float]]:
    """Maximal node intervals where the intervention exceeds the threshold."""
    mask = np.asarray(q_field_values) > q_threshold
    padded = np.concatenate(([False], mask, [False])).astype(int)
    edges = np.flatnonzero(np.diff(padded))
    starts, stops = edges[::2], edges[1::2]
    return [(float(mesh.nodes[i]), float(mesh.nodes[j - 1]))
            for i, j in zip(starts, stops)]


def solve_backward(spec: ProblemSpec, mesh: Mesh, time_grid: TimeGrid,
                   policy: PolicyConfig | None = None,
                   snapshot_times: tuple[float, ...] = (),
                   n_quad: int = 64,
                   record_controls: bool = False,
                   validate: bool = True) -> SolveResult:
    """March the terminal condition Phi(T, .) = 0 back to t = 0.

    The last two slices feed the ergodic estimate of the effective
    Hamiltonian. `record_controls` keeps the control fields of every step
    (memory scales with n_steps; intended for short horizons, e.g. the Monte
    Carlo cross-check). `validate=False` admits deliberately degenerate
    configurations (such as zero growth everywhere) used as analytic checks.
    """
    if validate:
        check = validate_spec(spec)
        if not check.ok:
            raise ValueError("invalid problem spec:\n"
                             + "\n".join(check.violations))
    policy = policy or PolicyConfig()
    ops = build_scheme(spec, mesh, n_quad=n_quad)
    dt = time_grid.dt
    n_steps = time_grid.n_steps

    snap_levels = {}
    for t in snapshot_times:
        level = int(round(t / dt))
        if 0 <= level <= n_steps:
            snap_levels.setdefault(level, float(t))

    phi = ValueField(values=np.zeros(mesh.n_nodes), time_label=time_grid.horizon)
    snapshots: list[Snapshot] = []
    if n_steps in snap_levels:
        snapshots.append(Snapshot(time=snap_levels[n_steps],
                                  value=ValueField(phi.values.copy(),
                                                   phi.time_label),
                                  controls=None))
    iteration_counts = np.zeros(n_steps, dtype=int)
    recorded: list[ControlField] = []
    previous = phi
    controls = None
    for m in range(n_steps - 1, -1, -1):
        previous = phi
        phi, controls, iters = step_backward(ops, dt, phi, policy)
        iteration_counts[m] = iters
        if record_controls:
            recorded.append(controls)
        if m in snap_levels:
            snapshots.append(Snapshot(time=snap_levels[m], value=phi,
                                      controls=controls))

    ergodic = ergodic_estimate(phi, previous, dt)
    table = None
    if record_controls:
        recorded.reverse()
        table = ControlTable(
            times=dt * np.arange(n_steps),
            nodes=mesh.nodes,
            q=np.stack([c.q_star for c in recorded]),
            lam=np.stack([c.lambda_star for c in recorded]),
            theta1=np.stack([c.theta1_star for c in recorded]),
            theta2=np.stack([c.theta2_star for c in recorded]),
        )
    snapshots.sort(key=lambda s: s.time)
    return SolveResult(final_value=phi, final_controls=controls,
                       ergodic=ergodic, iteration_stats=iteration_counts,
                       snapshots=snapshots, mesh=mesh, time_grid=time_grid,
                       control_table=table)


# ---------------------------------------------------------------------------
# concurrent parameter sweeps
# ---------------------------------------------------------------------------

def _solve_job(args) -> SolveResult:
    spec, mesh, time_grid, policy, snapshot_times, n_quad = args
    return solve_backward(spec, mesh, time_grid, policy=policy,
                          snapshot_times=snapshot_times, n_quad=n_quad)


def solve_many(specs, mesh: Mesh, time_grid: TimeGrid,
               policy: PolicyConfig | None = None,
               snapshot_times: tuple[float, ...] = (),
               n_quad: int = 64, workers: int = 1) -> list[SolveResult]:
    """Independent solves, optionally dispatched over a process pool."""
    jobs = [(spec, mesh, time_grid, policy, snapshot_times, n_quad)
            for spec in specs]
    if workers <= 1 or len(jobs) <= 1:
        return [_solve_job(job) for job in jobs]
    with concurrent.futures.ProcessPoolExecutor(
            max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_solve_job, jobs))
