"""Lagrangian flow maps, renormalization residuals, and transport duality.

Contents:

- time-interpolated velocity and scalar snapshot series;
- RK4 particle tracing of dx/dt = u(t, x) with bicubic space and linear
  time interpolation (trace_flow), trajectories leaving the truncated
  domain are frozen at exit and excluded from norms;
- transport identity checks along the flow: scalar composition
  (composition_check) and the vorticity/Jacobian relation omega(t, phi) =
  omega_0 * phi_r / r (jacobian_check);
- a built-in family of bounded C^1 renormalization functions vanishing
  near zero, and the weak-form renormalization residual tested against a
  library of space-time bumps;
- forward passive transport and the backward dual problem
  -d_t f - u . grad f = chi + nu (f_rr - (1/r) f_r + f_zz), integrated with
  the same splitting machinery, plus the duality defect between the two.

Sign convention of the duality identity as implemented:

    int_0^T int theta chi r d(r,z) dt
        = int theta(0) f(0) r d(r,z) - int theta(T) f(T) r d(r,z),

which is the orientation consistent with the backward equation above (for
u = 0, chi = c on a box and f(T) = 0 it gives f(0) = cT and both sides
equal cT * int theta_0 over the box, positive).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .biot_savart import apply_stream_operator, stream_operator_diagonal
from .exceptions import NumericalBlowupError
from .grid import HalfPlaneGrid, ScalarField, VelocityField
from .interpolation import interp_bicubic, sample_velocity
from .solvers import weighted_pcg
from .test_functions import SpaceTimeBump


# ---------------------------------------------------------------------------
# snapshot series with linear time interpolation


def _locate(times: np.ndarray, t: float):
    if t <= times[0]:
        return 0, 0, 0.0
    if t >= times[-1]:
        return len(times) - 1, len(times) - 1, 0.0
    k = int(np.searchsorted(times, t, side="right") - 1)
    k1 = min(k + 1, len(times) - 1)
    span = times[k1] - times[k]
    w = 0.0 if span == 0.0 else (t - times[k]) / span
    return k, k1, float(w)


class VelocitySeries:
    """Velocity snapshots on a shared grid, linearly interpolated in time."""

    def __init__(self, times, fields):
        times = np.asarray(times, dtype=np.float64)
        if times.ndim != 1 or len(fields) != times.size or times.size < 1:
            raise ValueError("times and fields must have equal positive length")
        if np.any(np.diff(times) <= 0.0):
            raise ValueError("snapshot times must be strictly increasing")
        grid = fields[0].grid
        for f in fields:
            if not f.grid.same_geometry(grid):
                raise ValueError("all snapshots must share one grid")
        self.times = times
        self.fields = list(fields)
        self.grid = grid

    @classmethod
    def frozen(cls, u: VelocityField, T: float):
        return cls(np.array([0.0, T]), [u, u])

    def at(self, t: float) -> VelocityField:
        k, k1, w = _locate(self.times, t)
        if w == 0.0:
            return self.fields[k]
        a, b = self.fields[k], self.fields[k1]
        return VelocityField(
            self.grid,
            (1.0 - w) * a.u_r + w * b.u_r,
            (1.0 - w) * a.u_z + w * b.u_z,
        )

    def max_speeds(self):
        mr = max(float(np.max(np.abs(f.u_r))) for f in self.fields)
        mz = max(float(np.max(np.abs(f.u_z))) for f in self.fields)
        return mr, mz


class ScalarSeries:
    """Scalar snapshots on a shared grid, linearly interpolated in time."""

    def __init__(self, times, fields):
        times = np.asarray(times, dtype=np.float64)
        if times.ndim != 1 or len(fields) != times.size or times.size < 1:
            raise ValueError("times and fields must have equal positive length")
        if np.any(np.diff(times) <= 0.0):
            raise ValueError("snapshot times must be strictly increasing")
        grid = fields[0].grid
        role = fields[0].role
        for f in fields:
            if not f.grid.same_geometry(grid) or f.role != role:
                raise ValueError("all snapshots must share one grid and role")
        self.times = times
        self.fields = list(fields)
        self.grid = grid
        self.role = role

    @classmethod
    def frozen(cls, f: ScalarField, T: float):
        return cls(np.array([0.0, T]), [f, f])

    def values_at(self, t: float) -> np.ndarray:
        k, k1, w = _locate(self.times, t)
        if w == 0.0:
            return self.fields[k].values
        return (1.0 - w) * self.fields[k].values + w * self.fields[k1].values

    def sample(self, t: float, r, z) -> np.ndarray:
        from .grid import AXIS_SYMMETRY

        vals = self.values_at(t)
        return interp_bicubic(vals, self.grid, r, z, AXIS_SYMMETRY[self.role])


def replay_run_series(doc):
    """Re-run a configured simulation, collecting every step as a series.

    Deterministic replay of a run directory's config, returning
    (xi ScalarSeries, VelocitySeries) on the native step grid; the weak-form
    residual quadratures need the full trajectory, which runs do not persist.
    """
    from dataclasses import replace

    from .config import RunConfig
    from .evolution import make_state, run
    from .initial_conditions import make_initial_condition

    config = doc if isinstance(doc, RunConfig) else RunConfig.from_dict(doc)
    grid = config.build_grid()
    xi0, _ = make_initial_condition(config.initial_condition, grid, monitor_ps=config.p_list)
    state = make_state(
        grid, xi0, config.nu, solve=True,
        stream_tol=config.stream_tol, boundary=config.boundary,
    )
    plan = replace(config.time_step_plan(), sample_every=1)
    times, xis, us = [], [], []

    def hook(s, k):
        times.append(s.t)
        xis.append(s.xi.copy())
        us.append(s.u.copy())
        return None

    run(state, config.tfinal, plan, sample_hook=hook)
    return ScalarSeries(np.array(times), xis), VelocitySeries(np.array(times), us)


# ---------------------------------------------------------------------------
# flow maps


@dataclass
class FlowMap:
    seeds: np.ndarray          # (n, 2)
    times: np.ndarray          # (m+1,)
    positions: np.ndarray      # (m+1, n, 2)
    active: np.ndarray         # (n,) False once a trajectory left the domain
    axis_flagged: np.ndarray   # (n,) True if r dipped below -axis_tol
    grid: HalfPlaneGrid

    def final_positions(self) -> np.ndarray:
        return self.positions[-1]

    def to_csv(self, path: str) -> None:
        lines = ["seed_id,t,phi_r,phi_z"]
        for j in range(self.seeds.shape[0]):
            for k, t in enumerate(self.times):
                pr, pz = self.positions[k, j]
                lines.append(f"{j},{repr(float(t))},{repr(float(pr))},{repr(float(pz))}")
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("\n".join(lines) + "\n")


def _in_domain(grid: HalfPlaneGrid, pos: np.ndarray) -> np.ndarray:
    r, z = pos[:, 0], pos[:, 1]
    return (r < grid.r_max) & (z > grid.z_min) & (z < grid.z_max)


def trace_flow(
    series: VelocitySeries,
    seeds,
    T: float,
    t0: float = 0.0,
    cfl: float = 0.5,
    n_steps: int | None = None,
    axis_tol: float = 1e-8,
) -> FlowMap:
    """Integrate particle trajectories through a velocity series.

    Classical RK4 with velocity sampled by bicubic interpolation in space
    (odd/even parity across the axis) and linear interpolation in time.
    The step count honors the advective CFL bound unless n_steps is forced.
    Trajectories that exit the truncated domain are frozen at their last
    interior position and marked inactive; trajectories whose r-coordinate
    drops below -axis_tol are flagged (axisymmetry forbids axis crossing).
    """
    seeds = np.atleast_2d(np.asarray(seeds, dtype=np.float64))
    if seeds.shape[1] != 2:
        raise ValueError("seeds must have shape (n, 2)")
    if np.any(seeds[:, 0] <= 0.0):
        raise ValueError("seeds must lie strictly inside the half plane (r > 0)")
    if T < 0.0:
        raise ValueError("trace duration must be nonnegative")
    grid = series.grid
    if n_steps is None:
        mr, mz = series.max_speeds()
        bound = np.inf
        if mr > 0.0:
            bound = min(bound, cfl * grid.hr / mr)
        if mz > 0.0:
            bound = min(bound, cfl * grid.hz / mz)
        n_steps = 1 if not np.isfinite(bound) or T == 0.0 else max(int(np.ceil(T / bound)), 1)
    if n_steps < 1:
        raise ValueError("n_steps must be positive")
    dt = T / n_steps if n_steps else 0.0

    n = seeds.shape[0]
    positions = np.empty((n_steps + 1, n, 2))
    positions[0] = seeds
    times = t0 + dt * np.arange(n_steps + 1)
    active = np.ones(n, dtype=bool)
    flagged = np.zeros(n, dtype=bool)

    def vel(t, pos):
        u = series.at(t)
        ur, uz = sample_velocity(u, pos[:, 0], pos[:, 1])
        return np.column_stack([ur, uz])

    x = seeds.copy()
    for k in range(n_steps):
        t = times[k]
        k1 = vel(t, x)
        k2 = vel(t + 0.5 * dt, x + 0.5 * dt * k1)
        k3 = vel(t + 0.5 * dt, x + 0.5 * dt * k2)
        k4 = vel(t + dt, x + dt * k3)
        x_new = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        inside = _in_domain(grid, x_new)
        keep = active & inside
        x = np.where(keep[:, None], x_new, x)  # exits stay frozen at last interior point
        active &= inside
        flagged |= x[:, 0] < -abs(axis_tol)
        positions[k + 1] = x
    return FlowMap(seeds, times, positions, active, flagged, grid)


def composition_check(xi_series: ScalarSeries, flow: FlowMap, stride: int = 1) -> float:
    """max over active seeds and sampled times of |xi(t, phi(t)) - xi(0, seed)|."""
    base = xi_series.sample(flow.times[0], flow.seeds[:, 0], flow.seeds[:, 1])
    worst = 0.0
    for k in range(0, len(flow.times), max(stride, 1)):
        pos = flow.positions[k]
        vals = xi_series.sample(flow.times[k], pos[:, 0], pos[:, 1])
        d = np.abs(vals - base)[flow.active]
        if d.size:
            worst = max(worst, float(np.max(d)))
    return worst


def jacobian_check(omega_series: ScalarSeries, flow: FlowMap, stride: int = 1) -> float:
    """max defect of omega(t, phi(t, r, z)) = omega_0(r, z) * phi_r(t) / r.

    Equivalent to checking that r / phi_r is the Jacobian of the flow in
    the r-weighted area element.
    """
    seeds_r = flow.seeds[:, 0]
    base = omega_series.sample(flow.times[0], seeds_r, flow.seeds[:, 1])
    worst = 0.0
    for k in range(0, len(flow.times), max(stride, 1)):
        pos = flow.positions[k]
        vals = omega_series.sample(flow.times[k], pos[:, 0], pos[:, 1])
        pred = base * pos[:, 0] / seeds_r
        d = np.abs(vals - pred)[flow.active]
        if d.size:
            worst = max(worst, float(np.max(d)))
    return worst


# ---------------------------------------------------------------------------
# renormalization functions


@dataclass(frozen=True)
class RenormFunction:
    """Bounded C^1 function vanishing identically near zero.

    beta(s) = rho(|s|) * clip_M(|s|^power) * (sign(s) if odd), where rho is
    a C^1 smoothstep vanishing on [0, delta] and equal to 1 beyond 2*delta,
    and clip_M(x) = M tanh(x / M) saturates at the level M (power = 0 drops
    the clip and leaves the plateau M itself).
    """

    name: str
    power: float
    level: float
    delta: float
    odd: bool

    def __post_init__(self):
        if self.delta <= 0.0 or self.level <= 0.0 or self.power < 0.0:
            raise ValueError("delta and level must be positive, power nonnegative")

    def _rho(self, x):
        u = np.clip((x - self.delta) / self.delta, 0.0, 1.0)
        rho = 3.0 * u**2 - 2.0 * u**3
        drho = (6.0 * u - 6.0 * u**2) / self.delta
        return rho, drho

    def _core(self, x):
        M = self.level
        if self.power == 0.0:
            return np.full_like(x, M), np.zeros_like(x)
        xp = x**self.power
        t = np.tanh(xp / M)
        core = M * t
        dcore = (1.0 - t**2) * self.power * np.where(x > 0.0, xp / np.where(x > 0.0, x, 1.0), 0.0)
        return core, dcore

    def value(self, s):
        s = np.asarray(s, dtype=np.float64)
        x = np.abs(s)
        rho, _ = self._rho(x)
        core, _ = self._core(x)
        out = rho * core
        return np.where(s < 0.0, -out, out) if self.odd else out

    def derivative(self, s):
        s = np.asarray(s, dtype=np.float64)
        x = np.abs(s)
        rho, drho = self._rho(x)
        core, dcore = self._core(x)
        g = drho * core + rho * dcore
        return g if self.odd else g * np.sign(s)


def built_in_renorm_functions(delta: float = 0.05, level: float = 1.0):
    """The four stock members used by the regression suite and the CLI."""
    return {
        "quadratic_clip": RenormFunction("quadratic_clip", 2.0, level, delta, odd=False),
        "cubic_odd": RenormFunction("cubic_odd", 3.0, level, delta, odd=True),
        "linear_plateau": RenormFunction("linear_plateau", 1.0, 0.5 * level, delta, odd=True),
        "sign_plateau": RenormFunction("sign_plateau", 0.0, level, delta, odd=True),
    }


def beta_integral(xi: ScalarField, beta: RenormFunction) -> float:
    """integral of beta(xi) r d(r,z) over the half plane (flat, no 2 pi)."""
    grid = xi.grid
    return float(np.sum(beta.value(xi.values) * grid.r_col) * grid.cell_area)


def renorm_residual(
    xi_series: ScalarSeries,
    velocity_series: VelocitySeries,
    beta: RenormFunction,
    tests,
) -> float:
    """Weak-form renormalization residual, maximized over a test library.

    For each space-time test function f supported in [0, T) x H:

        R(f) = int_0^T int beta(xi)(f_t + u^r f_r + u^z f_z) r d(r,z) dt
             + int beta(xi(0)) f(0) r d(r,z),

    evaluated by trapezoid in time over the shared snapshot grid and
    midpoint quadrature in space, normalized by the test-function norm.
    R vanishes (to discretization order) iff xi is transported in the
    renormalized sense for this beta.
    """
    times = xi_series.times
    if times.size != velocity_series.times.size or np.max(
        np.abs(times - velocity_series.times)
    ) > 1e-10 * max(1.0, float(times[-1])):
        raise ValueError("xi and velocity series must share the time grid")
    grid = xi_series.grid
    r2d, z2d = grid.meshes()
    w = grid.r_col * grid.cell_area
    beta_k = [beta.value(f.values) for f in xi_series.fields]

    worst = 0.0
    for f in tests:
        spatial = np.empty(times.size)
        if isinstance(f, SpaceTimeBump):
            # separable bump: evaluate the spatial factor once, sweep the
            # time weights as scalars
            b = f.space.value(r2d, z2d)
            br, bz = f.space.gradient(r2d, z2d)
            wt, dwt = f.time_weight(times)
            for k in range(times.size):
                u = velocity_series.fields[k]
                integrand = dwt[k] * b + wt[k] * (u.u_r * br + u.u_z * bz)
                spatial[k] = np.sum(beta_k[k] * integrand * w)
            f0 = wt[0] * b
        else:
            for k, t in enumerate(times):
                u = velocity_series.fields[k]
                integrand = f.dt(t, r2d, z2d)
                gr, gz = f.gradient(t, r2d, z2d)
                integrand = integrand + u.u_r * gr + u.u_z * gz
                spatial[k] = np.sum(beta_k[k] * integrand * w)
            f0 = f.value(times[0], r2d, z2d)
        dt = np.diff(times)
        total = float(np.sum(0.5 * dt * (spatial[1:] + spatial[:-1])))
        total += float(np.sum(beta_k[0] * f0 * w))
        worst = max(worst, abs(total) / f.norm())
    return worst


# ---------------------------------------------------------------------------
# forward and backward transport


def _as_source(chi):
    """Normalize a source term to a callable (t, r, z) -> array or None.

    Accepts None, a callable, or a ScalarSeries (sampled in time with the
    role's axis parity).
    """
    if chi is None or callable(chi):
        return chi
    if isinstance(chi, ScalarSeries):
        return lambda t, r, z: chi.sample(t, r, z)
    raise ValueError(
        f"source must be None, a callable, or a ScalarSeries, got {type(chi).__name__}"
    )


def _advect_with_source(values, role_symmetry, u: VelocityField, dt, t, chi, sign=1.0):
    """One semi-Lagrangian step of d_t q + sign * u . grad q = chi.

    Characteristic feet via RK2 midpoint; the source is accumulated by the
    trapezoid rule along the characteristic.  chi is callable (t, r, z) or
    None.
    """
    grid = u.grid
    r2d, z2d = grid.meshes()
    ur0, uz0 = sign * u.u_r, sign * u.u_z
    rm = r2d - 0.5 * dt * ur0
    zm = z2d - 0.5 * dt * uz0
    urm, uzm = sample_velocity(u, rm, zm)
    dep_r = r2d - dt * sign * urm
    dep_z = z2d - dt * sign * uzm
    out = interp_bicubic(values, grid, dep_r, dep_z, role_symmetry, clip=True)
    if chi is not None:
        out = out + 0.5 * dt * (chi(t, dep_r, dep_z) + chi(t + dt, r2d, z2d))
    return out


def _diffuse_dual(values, grid, nu, dt, theta=0.5, tol=1e-12, maxiter=20000):
    """Theta-scheme step of d_t f = nu (f_rr - (1/r) f_r + f_zz).

    The dual diffusion operator is the negative of the stream operator with
    homogeneous Dirichlet closures on every boundary; it is self-adjoint in
    the 1/r-weighted inner product.
    """
    c = theta * nu * dt

    def dual_lap(v):
        return -apply_stream_operator(v, grid)

    rhs = values + ((1.0 - theta) * nu * dt) * dual_lap(values)
    weight = np.broadcast_to(1.0 / grid.r_col, rhs.shape)
    diag = 1.0 + c * stream_operator_diagonal(grid)
    sol, res = weighted_pcg(
        lambda v: v - c * dual_lap(v), rhs, weight, diag, x0=values, tol=tol, maxiter=maxiter
    )
    if not res.converged:
        raise NumericalBlowupError(
            f"dual diffusion solve stalled at residual {res.residual:.3e}"
        )
    return sol


def solve_forward_transport(
    velocity_series: VelocitySeries,
    theta0: ScalarField,
    T: float,
    n_steps: int,
    nu: float = 0.0,
    source=None,
    theta_scheme: float = 0.5,
) -> ScalarSeries:
    """March d_t theta + u . grad theta = source + nu*(5-D radial Laplacian).

    Returns the full snapshot series on the uniform step grid.  With nu > 0
    diffusion is Strang-split around the advection exactly as in the main
    solver.
    """
    from .evolution import diffuse_relative_vorticity

    if n_steps < 1 or T <= 0.0:
        raise ValueError("need T > 0 and at least one step")
    source = _as_source(source)
    grid = velocity_series.grid
    if not theta0.grid.same_geometry(grid):
        raise ValueError("initial data and velocity series grids differ")
    dt = T / n_steps
    times = dt * np.arange(n_steps + 1)
    cur = theta0.copy()
    fields = [cur]
    from .grid import AXIS_SYMMETRY

    sym = AXIS_SYMMETRY[theta0.role]
    for k in range(n_steps):
        t = times[k]
        work = cur
        if nu > 0.0:
            work = diffuse_relative_vorticity(work, nu, 0.5 * dt, theta_scheme)
        u = velocity_series.at(t + 0.5 * dt)
        vals = _advect_with_source(work.values, sym, u, dt, t, source, sign=1.0)
        work = work.with_values(vals)
        if nu > 0.0:
            work = diffuse_relative_vorticity(work, nu, 0.5 * dt, theta_scheme)
        cur = work
        fields.append(cur)
    return ScalarSeries(times, fields)


def solve_backward_transport(
    velocity_series: VelocitySeries,
    chi,
    T: float,
    n_steps: int,
    nu: float = 0.0,
    f_final: ScalarField | None = None,
    theta_scheme: float = 0.5,
) -> ScalarSeries:
    """Solve -d_t f - u . grad f = chi + nu (f_rr - (1/r) f_r + f_zz) on [0, T].

    chi is callable (t, r, z) -> array (or None).  The final datum f(T)
    defaults to zero.  Substituting tau = T - t turns this into forward
    advection by the reversed velocity with source chi(T - tau) and the
    dual (Dirichlet) diffusion operator; that forward problem is integrated
    with the same splitting as the primary solver.  The returned series is
    indexed by physical time t, ascending.
    """
    if n_steps < 1 or T <= 0.0:
        raise ValueError("need T > 0 and at least one step")
    chi = _as_source(chi)
    grid = velocity_series.grid
    if f_final is None:
        f_final = ScalarField(grid, np.zeros((grid.nr, grid.nz)), role="dual")
    elif not f_final.grid.same_geometry(grid):
        raise ValueError("final datum grid differs from velocity grid")
    dt = T / n_steps
    cur = f_final.copy()
    fields_desc = [cur]

    from .grid import AXIS_SYMMETRY

    sym = AXIS_SYMMETRY[cur.role]
    chi_tau = None
    if chi is not None:
        def chi_tau(tau, r, z):
            return chi(T - tau, r, z)

    for k in range(n_steps):
        tau = k * dt
        work = cur
        if nu > 0.0:
            work = work.with_values(_diffuse_dual(work.values, grid, nu, 0.5 * dt, theta_scheme))
        u = velocity_series.at(T - (tau + 0.5 * dt))
        vals = _advect_with_source(work.values, sym, u, dt, tau, chi_tau, sign=-1.0)
        work = work.with_values(vals)
        if nu > 0.0:
            work = work.with_values(_diffuse_dual(work.values, grid, nu, 0.5 * dt, theta_scheme))
        cur = work
        fields_desc.append(cur)
    times = dt * np.arange(n_steps + 1)
    return ScalarSeries(times, fields_desc[::-1])


def duality_check(theta_series: ScalarSeries, f_series: ScalarSeries, chi, T: float) -> float:
    """Normalized defect of the transport duality identity.

    LHS = int_0^T int theta chi r d(r,z) dt (trapezoid in t), RHS =
    int theta(0) f(0) r - int theta(T) f(T) r; returns
    |LHS - RHS| / (|LHS| + |RHS| + eps).
    """
    times = theta_series.times
    if times.size != f_series.times.size or np.max(np.abs(times - f_series.times)) > 1e-10 * max(
        1.0, float(T)
    ):
        raise ValueError("theta and f series must share the time grid")
    chi = _as_source(chi)
    grid = theta_series.grid
    r2d, z2d = grid.meshes()
    w = grid.r_col * grid.cell_area
    lhs = 0.0
    if chi is not None:
        vals = np.empty(times.size)
        for k, t in enumerate(times):
            vals[k] = np.sum(theta_series.fields[k].values * chi(t, r2d, z2d) * w)
        dt = np.diff(times)
        lhs = float(np.sum(0.5 * dt * (vals[1:] + vals[:-1])))
    b0 = float(np.sum(theta_series.fields[0].values * f_series.fields[0].values * w))
    bT = float(np.sum(theta_series.fields[-1].values * f_series.fields[-1].values * w))
    rhs = b0 - bT
    return abs(lhs - rhs) / (abs(lhs) + abs(rhs) + 1e-300)
