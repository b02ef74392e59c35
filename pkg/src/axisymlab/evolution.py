"""Time evolution of axisymmetric swirl-free flow in vorticity form.

The state variable is the relative vorticity xi = omega / r, which rides
along particle paths and diffuses under the radial part of the
five-dimensional Laplacian:

    d(xi)/dt + u . grad(xi) = nu * [ (1/r^3) d/dr (r^3 d(xi)/dr) + d2(xi)/dz2 ].

Time stepping is Strang-split: a half step of implicit diffusion
(theta-scheme, Crank-Nicolson by default), a full semi-Lagrangian advection
step along RK2 characteristics, another diffusion half step, then one
stream-function solve to refresh the velocity.

An alternative conservative update evolves omega itself with a MUSCL
finite-volume flux, for which the plain cell sum of omega telescopes to
round-off; it serves as a cross-check on the semi-Lagrangian route.

Checkpoints use a single-line JSON header followed by raw little-endian
float64 field bytes (format tag AXF1).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .biot_savart import (
    StreamFunction,
    apply_stream_operator,
    solve_stream_function,
    stream_operator_diagonal,
    velocity_from_stream,
)
from .exceptions import NumericalBlowupError
from .grid import HalfPlaneGrid, ScalarField, VelocityField, build_grid
from .interpolation import interp_bicubic, sample_velocity
from .solvers import weighted_pcg

CHECKPOINT_MAGIC = "AXF1"


# ---------------------------------------------------------------------------
# state


@dataclass
class FluidState:
    grid: HalfPlaneGrid
    xi: ScalarField
    nu: float
    t: float = 0.0
    step_index: int = 0
    psi: StreamFunction | None = None
    u: VelocityField | None = None

    def omega_field(self) -> ScalarField:
        return ScalarField(self.grid, self.grid.r_col * self.xi.values, role="vorticity")

    def max_speed(self) -> float:
        if self.u is None:
            return 0.0
        mr, mz = self.u.max_speeds()
        return max(mr, mz)


def refresh_velocity(
    state: FluidState, tol: float = 1e-10, boundary: str = "zero"
) -> FluidState:
    """Recompute stream function and velocity from the current xi."""
    psi0 = state.psi.values if state.psi is not None else None
    psi, _ = solve_stream_function(
        state.omega_field(), tol=tol, psi0=psi0, boundary=boundary
    )
    return replace(state, psi=psi, u=velocity_from_stream(psi))


def make_state(
    grid: HalfPlaneGrid,
    xi,
    nu: float,
    t: float = 0.0,
    solve: bool = True,
    stream_tol: float = 1e-10,
    boundary: str = "zero",
) -> FluidState:
    """Assemble a FluidState from raw xi values, optionally solving for velocity."""
    if nu < 0.0:
        raise ValueError(f"viscosity must be nonnegative, got {nu}")
    if not isinstance(xi, ScalarField):
        xi = ScalarField(grid, np.asarray(xi, dtype=np.float64), role="relative_vorticity")
    elif xi.role != "relative_vorticity":
        raise ValueError(f"state field must have role 'relative_vorticity', got {xi.role!r}")
    state = FluidState(grid=grid, xi=xi, nu=float(nu), t=float(t))
    if solve:
        state = refresh_velocity(state, tol=stream_tol, boundary=boundary)
    return state


# ---------------------------------------------------------------------------
# diffusion of xi: radial 5-D Laplacian + axial Laplacian, zero-flux closures


def _xi_volumes(grid: HalfPlaneGrid) -> np.ndarray:
    """Exact per-cell average of r^3 times hr, as a column.

    Using the exact integral of r^3 over each cell (instead of the midpoint
    value) makes the axis closure of the radial operator exact on xi = c r^2;
    the midpoint weight is off by a factor of two in the first cell.
    """
    i = np.arange(grid.nr, dtype=np.float64)
    return (((i + 1.0) ** 4 - i**4) * grid.hr**3 / 4.0)[:, None]


def apply_xi_diffusion(values: np.ndarray, grid: HalfPlaneGrid) -> np.ndarray:
    """(1/r^3) d/dr (r^3 d xi/dr) + d2 xi/dz2 with zero-flux boundaries.

    The r^3 face weight vanishes at the axis, so the axis needs no closure;
    zero flux on the outer faces makes the cell sum against the r^3 volumes
    an exact invariant and the operator self-adjoint in that weight.
    """
    nr, nz = grid.nr, grid.nz
    hr, hz = grid.hr, grid.hz
    face3 = ((np.arange(1, nr) * hr) ** 3)[:, None]
    vol = _xi_volumes(grid) * hr

    f = np.zeros((nr + 1, nz))
    f[1:nr] = face3 * (values[1:] - values[:-1]) / hr
    out = (f[1:] - f[:-1]) / vol

    g = np.zeros((nr, nz + 1))
    g[:, 1:nz] = (values[:, 1:] - values[:, :-1]) / hz
    out += (g[:, 1:] - g[:, :-1]) / hz
    return out


def _xi_diffusion_diagonal(grid: HalfPlaneGrid) -> np.ndarray:
    nr, nz = grid.nr, grid.nz
    hr, hz = grid.hr, grid.hz
    face3 = np.zeros(nr + 1)
    face3[1:nr] = (np.arange(1, nr) * hr) ** 3
    vol = _xi_volumes(grid)[:, 0] * hr
    diag_r = (face3[1:] + face3[:-1]) / vol
    diag_z = np.full(nz, 2.0 / hz**2)
    diag_z[0] = 1.0 / hz**2
    diag_z[-1] = 1.0 / hz**2
    return diag_r[:, None] + diag_z[None, :]


def diffuse_relative_vorticity(
    xi: ScalarField,
    nu: float,
    dt: float,
    theta: float = 0.5,
    tol: float = 1e-12,
    maxiter: int = 20000,
) -> ScalarField:
    """One theta-scheme diffusion step for xi.

    theta = 0.5 is Crank-Nicolson (second order in dt), theta = 1 backward
    Euler.  The implicit system is solved by conjugate gradients in the
    exact r^3 volume weight, in which the operator is symmetric positive
    definite.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not (0.5 <= theta <= 1.0):
        raise ValueError(f"theta must lie in [0.5, 1], got {theta}")
    if nu == 0.0:
        return xi.copy()
    grid = xi.grid
    c = theta * nu * dt
    lap = apply_xi_diffusion(xi.values, grid)
    rhs = xi.values + ((1.0 - theta) * nu * dt) * lap
    weight = np.broadcast_to(_xi_volumes(grid), rhs.shape)
    diag = 1.0 + c * _xi_diffusion_diagonal(grid)
    sol, res = weighted_pcg(
        lambda v: v - c * apply_xi_diffusion(v, grid),
        rhs,
        weight,
        diag,
        x0=xi.values,
        tol=tol,
        maxiter=maxiter,
    )
    if not res.converged:
        raise NumericalBlowupError(
            f"diffusion solve stalled at residual {res.residual:.3e}"
        )
    return xi.with_values(sol)


def diffuse_vorticity(
    omega: ScalarField,
    nu: float,
    dt: float,
    theta: float = 0.5,
    tol: float = 1e-12,
    maxiter: int = 20000,
) -> ScalarField:
    """Theta-scheme step for the omega diffusion operator.

    The viscous term for omega is d/dr((1/r) d(r omega)/dr) + d2 omega/dz2,
    applied here as -(1/r) B(r omega) with zero-flux truncation closures so
    the operator is self-adjoint in the r weight.  The only cell-sum leak of
    omega is the physical one through the axis.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not (0.5 <= theta <= 1.0):
        raise ValueError(f"theta must lie in [0.5, 1], got {theta}")
    if nu == 0.0:
        return omega.copy()
    grid = omega.grid
    r = grid.r_col
    c = theta * nu * dt

    def diff_op(w):
        return -apply_stream_operator(r * w, grid, outer_r="neumann", z_bc="neumann") / r

    rhs = omega.values + ((1.0 - theta) * nu * dt) * diff_op(omega.values)
    weight = np.broadcast_to(r, rhs.shape)
    diag = 1.0 + c * stream_operator_diagonal(grid, outer_r="neumann", z_bc="neumann")
    sol, res = weighted_pcg(
        lambda v: v - c * diff_op(v),
        rhs,
        weight,
        diag,
        x0=omega.values,
        tol=tol,
        maxiter=maxiter,
    )
    if not res.converged:
        raise NumericalBlowupError(
            f"omega diffusion solve stalled at residual {res.residual:.3e}"
        )
    return omega.with_values(sol)


# ---------------------------------------------------------------------------
# advection


def advect_semi_lagrangian(field: ScalarField, u: VelocityField, dt: float) -> ScalarField:
    """Transport a field along characteristics of u over time dt.

    Departure points come from an RK2 midpoint integration of dx/dt = u
    backward in time; values are picked up by monotone-clipped bicubic
    interpolation with the field's own axis parity, so trajectories dipping
    across r = 0 are handled by reflection.
    """
    grid = field.grid
    r2d, z2d = grid.meshes()
    rm = r2d - 0.5 * dt * u.u_r
    zm = z2d - 0.5 * dt * u.u_z
    urm, uzm = sample_velocity(u, rm, zm)
    dep_r = r2d - dt * urm
    dep_z = z2d - dt * uzm
    vals = interp_bicubic(
        field.values, grid, dep_r, dep_z, field.axis_symmetry, clip=True
    )
    return field.with_values(vals)


def cfl_dt(state: FluidState, cfl: float = 0.5, dt_max: float = np.inf) -> float:
    """Advective time-step bound cfl * min(hr/max|u_r|, hz/max|u_z|).

    Capped by dt_max; a state at rest returns dt_max itself.  Diffusion is
    integrated implicitly and contributes no constraint.
    """
    if not (0.0 < cfl <= 1.0):
        raise ValueError(f"cfl must lie in (0, 1], got {cfl}")
    if not (dt_max > 0.0):
        raise ValueError(f"dt_max must be positive, got {dt_max}")
    if state.u is None:
        raise ValueError("state has no cached velocity; call refresh_velocity first")
    mr, mz = state.u.max_speeds()
    grid = state.grid
    out = dt_max
    if mr > 0.0:
        out = min(out, cfl * grid.hr / mr)
    if mz > 0.0:
        out = min(out, cfl * grid.hz / mz)
    return float(out)


# ---------------------------------------------------------------------------
# full steps


def _require_dt(plan: "TimeStepPlan") -> float:
    plan.validated()
    if plan.dt is None:
        raise ValueError("a single step needs plan.dt set; run() fills it adaptively")
    return plan.dt


def step_viscous(state: FluidState, plan: "TimeStepPlan", refresh: bool = True) -> FluidState:
    """One Strang-split step: diffuse dt/2, advect dt, diffuse dt/2, re-solve.

    plan.dt must be set; tolerances, theta, and the outer boundary treatment
    are read from the plan as well.
    """
    dt = _require_dt(plan)
    if state.u is None:
        state = refresh_velocity(state, tol=plan.stream_tol, boundary=plan.boundary)
    xi = state.xi
    if state.nu > 0.0:
        xi = diffuse_relative_vorticity(
            xi, state.nu, 0.5 * dt, plan.theta, tol=plan.diffusion_tol
        )
    xi = advect_semi_lagrangian(xi, state.u, dt)
    if state.nu > 0.0:
        xi = diffuse_relative_vorticity(
            xi, state.nu, 0.5 * dt, plan.theta, tol=plan.diffusion_tol
        )
    new = replace(state, xi=xi, t=state.t + dt, step_index=state.step_index + 1)
    if refresh:
        new = refresh_velocity(new, tol=plan.stream_tol, boundary=plan.boundary)
    else:
        new = replace(new, psi=None, u=None)
    return new


def _van_leer_slopes(values: np.ndarray, axis: int, axis_symmetry: str) -> np.ndarray:
    """Limited slopes per cell along one axis (van Leer harmonic limiter)."""
    v = values if axis == 0 else values.T
    pad_lo = -v[0] if axis_symmetry == "odd" and axis == 0 else v[0]
    ext = np.concatenate([pad_lo[None, :], v, v[-1][None, :]], axis=0)
    a = ext[1:-1] - ext[:-2]
    b = ext[2:] - ext[1:-1]
    prod = a * b
    denom = a + b
    s = np.where(prod > 0.0, 2.0 * prod / np.where(denom != 0.0, denom, 1.0), 0.0)
    return s if axis == 0 else s.T


def _muscl_rhs(omega: np.ndarray, u: VelocityField) -> np.ndarray:
    """-div(u omega) in the (r, z) plane with limited upwind face fluxes.

    Face normal velocities average the adjacent cells; the axis face carries
    exactly zero radial velocity and the outer faces use the boundary cell
    value (fields in conservation studies vanish there).  The flux sum over
    cells telescopes, so the plain cell sum of omega is conserved up to the
    open outer faces.
    """
    grid = u.grid
    nr, nz = grid.nr, grid.nz
    hr, hz = grid.hr, grid.hz

    sr = _van_leer_slopes(omega, 0, "odd")
    ur_face = np.zeros((nr + 1, nz))
    ur_face[1:nr] = 0.5 * (u.u_r[1:] + u.u_r[:-1])
    ur_face[nr] = u.u_r[-1]
    left = np.concatenate([-(omega[0] + 0.5 * sr[0])[None, :], omega + 0.5 * sr], axis=0)
    right = np.concatenate([omega - 0.5 * sr, (omega[-1] + 0.5 * sr[-1])[None, :]], axis=0)
    fr = np.where(ur_face >= 0.0, ur_face * left, ur_face * right)
    out = -(fr[1:] - fr[:-1]) / hr

    sz = _van_leer_slopes(omega, 1, "none")
    uz_face = np.zeros((nr, nz + 1))
    uz_face[:, 1:nz] = 0.5 * (u.u_z[:, 1:] + u.u_z[:, :-1])
    uz_face[:, 0] = u.u_z[:, 0]
    uz_face[:, nz] = u.u_z[:, -1]
    left = np.concatenate([(omega[:, 0] - 0.5 * sz[:, 0])[:, None], omega + 0.5 * sz], axis=1)
    right = np.concatenate([omega - 0.5 * sz, (omega[:, -1] + 0.5 * sz[:, -1])[:, None]], axis=1)
    fz = np.where(uz_face >= 0.0, uz_face * left, uz_face * right)
    out -= (fz[:, 1:] - fz[:, :-1]) / hz
    return out


def step_conservative_omega(
    state: FluidState, plan: "TimeStepPlan", refresh: bool = True
) -> FluidState:
    """One step of the conservative omega route (SSP-RK2 MUSCL + diffusion).

    Advection is in the divergence form of the omega equation, whose flux
    sum telescopes exactly; with nu > 0 the omega diffusion operator is
    applied in a Strang split around it.
    """
    dt = _require_dt(plan)
    if state.u is None:
        state = refresh_velocity(state, tol=plan.stream_tol, boundary=plan.boundary)
    grid = state.grid
    omega = state.omega_field()
    if state.nu > 0.0:
        omega = diffuse_vorticity(
            omega, state.nu, 0.5 * dt, plan.theta, tol=plan.diffusion_tol
        )
    w = omega.values
    w1 = w + dt * _muscl_rhs(w, state.u)
    w2 = 0.5 * w + 0.5 * (w1 + dt * _muscl_rhs(w1, state.u))
    omega = omega.with_values(w2)
    if state.nu > 0.0:
        omega = diffuse_vorticity(
            omega, state.nu, 0.5 * dt, plan.theta, tol=plan.diffusion_tol
        )
    xi = state.xi.with_values(omega.values / grid.r_col)
    new = replace(state, xi=xi, t=state.t + dt, step_index=state.step_index + 1)
    if refresh:
        new = refresh_velocity(new, tol=plan.stream_tol, boundary=plan.boundary)
    else:
        new = replace(new, psi=None, u=None)
    return new


# ---------------------------------------------------------------------------
# driver


@dataclass(frozen=True)
class TimeStepPlan:
    """Bundle of time-stepping controls for run().

    dt = None selects adaptive steps from the advective CFL bound; a fixed
    dt is truncated on the final step to land on t_final exactly.
    """

    dt: float | None = None
    dt_max: float | None = None
    cfl: float = 0.5
    theta: float = 0.5
    scheme: str = "viscous"
    boundary: str = "zero"
    stream_tol: float = 1e-10
    diffusion_tol: float = 1e-12
    sample_every: int = 1
    blowup_limit: float = 1e6
    max_steps: int = 10_000_000

    def validated(self) -> "TimeStepPlan":
        if self.dt is not None and self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.dt_max is not None and self.dt_max <= 0.0:
            raise ValueError(f"dt_max must be positive, got {self.dt_max}")
        if self.scheme not in ("viscous", "conservative"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.sample_every < 1:
            raise ValueError("sample_every must be at least 1")
        if not (0.5 <= self.theta <= 1.0):
            raise ValueError(f"theta must lie in [0.5, 1], got {self.theta}")
        if not (0.0 < self.cfl <= 1.0):
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.blowup_limit <= 0.0 or self.max_steps < 1:
            raise ValueError("blowup_limit and max_steps must be positive")
        return self


def run(
    state: FluidState,
    t_final: float,
    plan: TimeStepPlan | None = None,
    sample_hook=None,
):
    """Advance a state to t_final.

    sample_hook(state, step_index) is invoked on the initial state, every
    sample_every accepted steps, and on the final state; non-None returns
    are collected and handed back (and attached to NumericalBlowupError if
    the run dies, so partial diagnostics survive).
    """
    plan = (plan or TimeStepPlan()).validated()
    if t_final < state.t:
        raise ValueError(f"t_final {t_final} is before state time {state.t}")
    if state.u is None:
        state = refresh_velocity(state, tol=plan.stream_tol, boundary=plan.boundary)
    stepper = step_viscous if plan.scheme == "viscous" else step_conservative_omega

    records = []
    if sample_hook is not None:
        out = sample_hook(state, 0)
        if out is not None:
            records.append(out)

    limit = plan.blowup_limit * max(float(np.max(np.abs(state.xi.values))), 1.0)
    step = 0
    while state.t < t_final - 1e-12 * max(1.0, abs(t_final)):
        if step >= plan.max_steps:
            raise NumericalBlowupError(
                f"exceeded max_steps={plan.max_steps} before reaching t_final",
                step_index=step,
                records=records,
            )
        cap = plan.dt_max if plan.dt_max is not None else np.inf
        dt = plan.dt if plan.dt is not None else cfl_dt(state, plan.cfl, dt_max=cap)
        if not np.isfinite(dt):
            dt = t_final - state.t
        dt = min(dt, t_final - state.t)
        try:
            state = stepper(state, replace(plan, dt=dt))
        except ValueError as exc:
            # fields validate finiteness on construction, so a ValueError mid
            # step means the update went non-finite
            raise NumericalBlowupError(
                f"step {step + 1} aborted: {exc}", step_index=step + 1, records=records
            ) from exc
        step += 1
        m = float(np.max(np.abs(state.xi.values)))
        if not np.isfinite(m) or m > limit:
            raise NumericalBlowupError(
                f"field magnitude {m:.3e} exceeded blowup guard at t={state.t:.6g}",
                step_index=step,
                records=records,
            )
        at_end = state.t >= t_final - 1e-12 * max(1.0, abs(t_final))
        if sample_hook is not None and (step % plan.sample_every == 0 or at_end):
            out = sample_hook(state, step)
            if out is not None:
                records.append(out)
    return state, records


# ---------------------------------------------------------------------------
# checkpoints


def write_checkpoint(state: FluidState, path: str) -> None:
    """Write a single-field checkpoint: JSON header line + raw <f8 bytes."""
    grid = state.grid
    header = {
        "magic": CHECKPOINT_MAGIC,
        "nr": grid.nr,
        "nz": grid.nz,
        "r_max": grid.r_max,
        "z_min": grid.z_min,
        "z_max": grid.z_max,
        "t": state.t,
        "nu": state.nu,
        "fields": ["xi"],
    }
    with open(path, "wb") as f:
        f.write((json.dumps(header) + "\n").encode("utf-8"))
        f.write(np.ascontiguousarray(state.xi.values, dtype="<f8").tobytes())


def read_checkpoint(path: str, solve: bool = False) -> FluidState:
    """Load a checkpoint written by write_checkpoint."""
    with open(path, "rb") as f:
        header_line = f.readline()
        payload = f.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"unreadable checkpoint header in {path}: {exc}") from exc
    if header.get("magic") != CHECKPOINT_MAGIC:
        raise ValueError(f"bad checkpoint magic in {path}: {header.get('magic')!r}")
    if header.get("fields") != ["xi"]:
        raise ValueError(f"unsupported checkpoint fields {header.get('fields')!r}")
    grid = build_grid(
        int(header["nr"]),
        int(header["nz"]),
        float(header["r_max"]),
        float(header["z_min"]),
        float(header["z_max"]),
    )
    expected = grid.nr * grid.nz * 8
    if len(payload) != expected:
        raise ValueError(
            f"checkpoint payload is {len(payload)} bytes, expected {expected}"
        )
    values = np.frombuffer(payload, dtype="<f8").reshape(grid.nr, grid.nz).copy()
    return make_state(
        grid, values, float(header["nu"]), t=float(header["t"]), solve=solve
    )
