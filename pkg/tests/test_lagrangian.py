import numpy as np
import pytest

from axisymlab import (
    RenormFunction,
    ScalarField,
    ScalarSeries,
    VelocityField,
    VelocitySeries,
    beta_integral,
    build_grid,
    built_in_renorm_functions,
    composition_check,
    duality_check,
    jacobian_check,
    renorm_residual,
    renorm_test_library,
    solve_backward_transport,
    solve_forward_transport,
    trace_flow,
)


def uniform_axial(grid, w):
    z = np.zeros((grid.nr, grid.nz))
    return VelocityField(grid, z, np.full_like(z, w))


def test_velocity_series_time_interpolation():
    g = build_grid(16, 16, 2.0, -1.0, 1.0)
    a = uniform_axial(g, 1.0)
    b = uniform_axial(g, 3.0)
    series = VelocitySeries([0.0, 1.0], [a, b])
    assert np.allclose(series.at(0.5).u_z, 2.0)
    assert np.allclose(series.at(-1.0).u_z, 1.0)  # clamped below
    assert np.allclose(series.at(7.0).u_z, 3.0)  # clamped above
    frozen = VelocitySeries.frozen(a, 2.0)
    assert np.array_equal(frozen.at(1.3).u_z, a.u_z)
    assert series.max_speeds() == (0.0, 3.0)


def test_series_validation():
    g = build_grid(16, 16, 2.0, -1.0, 1.0)
    g2 = build_grid(16, 16, 3.0, -1.0, 1.0)
    a = uniform_axial(g, 1.0)
    with pytest.raises(ValueError):
        VelocitySeries([0.0, 0.0], [a, a])  # not increasing
    with pytest.raises(ValueError):
        VelocitySeries([0.0], [a, a])  # length mismatch
    with pytest.raises(ValueError):
        VelocitySeries([0.0, 1.0], [a, uniform_axial(g2, 1.0)])
    f = ScalarField(g, np.ones((16, 16)), role="passive_scalar")
    f2 = ScalarField(g, np.ones((16, 16)), role="dual")
    with pytest.raises(ValueError):
        ScalarSeries([0.0, 1.0], [f, f2])  # role mismatch


def test_scalar_series_sampling():
    g = build_grid(32, 32, 2.0, -1.0, 1.0)
    r2d, z2d = g.meshes()
    f0 = ScalarField(g, r2d**2, role="passive_scalar")
    f1 = ScalarField(g, 3.0 * r2d**2, role="passive_scalar")
    series = ScalarSeries([0.0, 1.0], [f0, f1])
    got = series.sample(0.5, np.array([1.0, 1.5]), np.array([0.0, 0.3]))
    assert np.allclose(got, 2.0 * np.array([1.0, 1.5]) ** 2, atol=1e-10)


def test_trace_flow_uniform_translation():
    g = build_grid(48, 96, 2.0, -2.0, 2.0)
    series = VelocitySeries.frozen(uniform_axial(g, 0.5), 1.0)
    seeds = np.array([[0.5, -1.0], [1.2, 0.0], [1.8, 0.7]])
    flow = trace_flow(series, seeds, T=1.0, n_steps=10)
    assert flow.times.shape == (11,)
    assert np.isclose(flow.times[-1], 1.0)
    expected = seeds + np.array([0.0, 0.5])
    assert np.max(np.abs(flow.final_positions() - expected)) < 1e-12
    assert flow.active.all()
    assert not flow.axis_flagged.any()
    # zero duration collapses to the seeds
    still = trace_flow(series, seeds, T=0.0)
    assert np.array_equal(still.final_positions(), seeds)


def test_trace_flow_shear_sampling_accuracy():
    # u_z = cos(r) is constant along each trajectory, so the only error is
    # the bicubic pickup of the velocity samples
    g = build_grid(96, 96, 3.0, -2.0, 2.0)
    r2d, _ = g.meshes()
    u = VelocityField(g, np.zeros_like(r2d), np.cos(r2d))
    series = VelocitySeries.frozen(u, 1.0)
    seeds = np.array([[0.7, -0.4], [1.37, 0.0], [2.21, 0.5]])
    flow = trace_flow(series, seeds, T=1.0, n_steps=8)
    exact_z = seeds[:, 1] + np.cos(seeds[:, 0])
    assert np.max(np.abs(flow.final_positions()[:, 0] - seeds[:, 0])) < 1e-9
    assert np.max(np.abs(flow.final_positions()[:, 1] - exact_z)) < 1e-6


def test_trace_flow_cfl_step_count():
    g = build_grid(32, 64, 2.0, -2.0, 2.0)
    series = VelocitySeries.frozen(uniform_axial(g, 1.0), 1.0)
    flow = trace_flow(series, [[1.0, 0.0]], T=1.0, cfl=0.5)
    # hz = 1/16, so the advective bound forces at least T / (0.5 hz) steps
    assert len(flow.times) - 1 >= 32
    dts = np.diff(flow.times)
    assert np.allclose(dts, dts[0])


def test_trace_flow_exit_freezes():
    g = build_grid(32, 32, 2.0, -1.0, 1.0)
    series = VelocitySeries.frozen(uniform_axial(g, 2.0), 1.0)
    flow = trace_flow(series, [[1.0, 0.8], [1.0, -0.9]], T=0.5, n_steps=10)
    assert not flow.active[0]  # left through z = 1
    assert flow.active[1]
    z_path = flow.positions[:, 0, 1]
    assert z_path[-1] < 1.0  # frozen at last interior point
    moved = np.flatnonzero(np.diff(z_path) > 0.0)
    assert 0 < len(moved) < len(z_path) - 1  # advanced, then froze mid-run
    assert np.all(z_path[moved[-1] + 1 :] == z_path[moved[-1] + 1])


def test_trace_flow_validation():
    g = build_grid(16, 16, 2.0, -1.0, 1.0)
    series = VelocitySeries.frozen(uniform_axial(g, 1.0), 1.0)
    with pytest.raises(ValueError):
        trace_flow(series, [[0.0, 0.0]], T=1.0)  # on the axis
    with pytest.raises(ValueError):
        trace_flow(series, [[1.0, 0.0, 0.0]], T=1.0)  # bad shape
    with pytest.raises(ValueError):
        trace_flow(series, [[1.0, 0.0]], T=-1.0)
    with pytest.raises(ValueError):
        trace_flow(series, [[1.0, 0.0]], T=1.0, n_steps=0)


def test_flow_map_csv(tmp_path):
    g = build_grid(16, 16, 2.0, -1.0, 1.0)
    series = VelocitySeries.frozen(uniform_axial(g, 0.5), 1.0)
    flow = trace_flow(series, [[1.0, 0.0], [0.5, -0.5]], T=0.4, n_steps=2)
    path = tmp_path / "flow.csv"
    flow.to_csv(str(path))
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "seed_id,t,phi_r,phi_z"
    assert len(lines) == 1 + 2 * 3
    sid, t, pr, pz = lines[-1].split(",")
    assert sid == "1"
    assert float(t) == flow.times[-1]
    assert float(pr) == flow.positions[-1, 1, 0]
    assert float(pz) == flow.positions[-1, 1, 1]


def stretching_flow_case(n, a=0.3, T=0.5, n_snap=16):
    """Incompressible stretching u = (a r, -2 a z): the map is
    (r, z) -> (r e^{at}, z e^{-2at}) and omega = r xi is transported with
    the r-ratio Jacobian factor exactly."""
    g = build_grid(n, n, 3.0, -1.5, 1.5)
    r2d, z2d = g.meshes()
    u = VelocityField(g, a * r2d, -2.0 * a * z2d)
    vseries = VelocitySeries.frozen(u, T)
    times = np.linspace(0.0, T, n_snap + 1)

    def xi_at(t):
        # pullback of the initial ring bump along the flow
        rb = r2d * np.exp(-a * t)
        zb = z2d * np.exp(2.0 * a * t)
        return np.exp(-8.0 * ((rb - 1.0) ** 2 + zb**2))

    xis = [ScalarField(g, xi_at(t), role="relative_vorticity") for t in times]
    omegas = [ScalarField(g, r2d * f.values, role="vorticity") for f in xis]
    return g, vseries, ScalarSeries(times, xis), ScalarSeries(times, omegas), times


def test_composition_and_jacobian_on_stretching_flow():
    _, vseries, xi_series, omega_series, times = stretching_flow_case(96)
    seeds = np.array([[0.8, 0.2], [1.0, 0.0], [1.3, -0.4]])
    flow = trace_flow(vseries, seeds, T=times[-1], n_steps=len(times) - 1)
    # xi is constant along trajectories
    assert composition_check(xi_series, flow) < 2e-4
    assert composition_check(xi_series, flow, stride=4) < 2e-4
    # omega picks up the radial stretching factor
    assert jacobian_check(omega_series, flow) < 5e-4
    # a deliberately wrong series must be caught
    bad = ScalarSeries(times, [xi_series.fields[0]] * len(times))
    assert composition_check(bad, flow) > 1e-2


def test_renorm_function_shapes():
    fns = built_in_renorm_functions(delta=0.05, level=1.0)
    assert set(fns) == {"quadratic_clip", "cubic_odd", "linear_plateau", "sign_plateau"}
    s = np.linspace(-4.0, 4.0, 401)
    for beta in fns.values():
        v = beta.value(s)
        assert np.all(v[np.abs(s) <= 0.05] == 0.0)  # dead zone near 0
        assert np.max(np.abs(v)) <= beta.level + 1e-12
        if beta.odd:
            assert np.allclose(beta.value(-s), -v)
        else:
            assert np.allclose(beta.value(-s), v)
    # plateau member saturates exactly at its level
    sp = fns["sign_plateau"]
    assert np.allclose(sp.value(np.array([0.5, 2.0])), sp.level)
    with pytest.raises(ValueError):
        RenormFunction("bad", 2.0, 1.0, -0.1, odd=False)
    with pytest.raises(ValueError):
        RenormFunction("bad", -1.0, 1.0, 0.1, odd=False)


def test_renorm_function_derivative_matches_differences():
    h = 1e-6
    s = np.concatenate([np.linspace(-3.0, 3.0, 173), [0.04, 0.07, 0.11, -0.09]])
    for beta in built_in_renorm_functions().values():
        num = (beta.value(s + h) - beta.value(s - h)) / (2.0 * h)
        assert np.max(np.abs(beta.derivative(s) - num)) < 1e-5


def test_beta_integral_constant_field():
    g = build_grid(32, 48, 2.0, -1.0, 2.0)
    xi = ScalarField(g, np.full((32, 48), 3.0), role="relative_vorticity")
    beta = built_in_renorm_functions()["sign_plateau"]
    # plateau value times the flat measure of the rectangle, integral r dr dz
    expected = beta.level * (2.0**2 / 2.0) * 3.0
    assert abs(beta_integral(xi, beta) - expected) < 1e-12 * expected


def test_renorm_residual_static_field():
    # u = 0 and xi frozen: the weak form telescopes to the fundamental
    # theorem of calculus in t, so the residual is pure trapezoid error
    g = build_grid(48, 48, 3.0, -2.0, 2.0)
    r2d, z2d = g.meshes()
    xi = ScalarField(g, np.exp(-3.0 * ((r2d - 1.2) ** 2 + z2d**2)), role="relative_vorticity")
    u = VelocityField(g, np.zeros_like(r2d), np.zeros_like(r2d))
    beta = built_in_renorm_functions()["quadratic_clip"]
    tests = renorm_test_library(4, 0.8, rng_seed=7)

    def residual(n_snap):
        times = np.linspace(0.0, 0.8, n_snap + 1)
        xis = ScalarSeries(times, [xi] * (n_snap + 1))
        us = VelocitySeries(times, [u] * (n_snap + 1))
        return renorm_residual(xis, us, beta, tests)

    coarse, fine = residual(8), residual(16)
    assert coarse < 2e-5
    assert fine < coarse / 3.0  # trapezoid is at least second order in dt


def test_renorm_residual_flags_fake_dynamics():
    # xi growing in time under zero velocity is not a transport solution
    g = build_grid(48, 48, 3.0, -2.0, 2.0)
    r2d, z2d = g.meshes()
    base = np.exp(-3.0 * ((r2d - 1.2) ** 2 + z2d**2))
    u = VelocityField(g, np.zeros_like(r2d), np.zeros_like(r2d))
    times = np.linspace(0.0, 0.8, 33)
    xis = ScalarSeries(
        times,
        [ScalarField(g, (1.0 + 2.0 * t) * base, role="relative_vorticity") for t in times],
    )
    us = VelocitySeries(times, [u] * 33)
    beta = built_in_renorm_functions()["quadratic_clip"]
    tests = renorm_test_library(4, 0.8, rng_seed=7)
    assert renorm_residual(xis, us, beta, tests) > 1e-3


def test_renorm_residual_time_grid_mismatch():
    g = build_grid(16, 16, 2.0, -1.0, 1.0)
    xi = ScalarField(g, np.ones((16, 16)), role="relative_vorticity")
    u = uniform_axial(g, 0.0)
    xis = ScalarSeries([0.0, 0.5, 1.0], [xi] * 3)
    us = VelocitySeries([0.0, 1.0], [u] * 2)
    beta = built_in_renorm_functions()["quadratic_clip"]
    with pytest.raises(ValueError):
        renorm_residual(xis, us, beta, renorm_test_library(1, 1.0, rng_seed=0))


def test_forward_transport_constant_source():
    g = build_grid(32, 32, 2.0, -1.0, 1.0)
    series = VelocitySeries.frozen(uniform_axial(g, 0.0), 1.0)
    theta0 = ScalarField(g, np.zeros((32, 32)), role="passive_scalar")
    out = solve_forward_transport(series, theta0, T=1.0, n_steps=8, source=lambda t, r, z: 3.0 + 0.0 * r)
    assert out.times.shape == (9,)
    assert np.max(np.abs(out.fields[-1].values - 3.0)) < 1e-12
    # the same source supplied as a frozen scalar series
    chi = ScalarSeries.frozen(ScalarField(g, np.full((32, 32), 3.0), role="passive_scalar"), 1.0)
    out2 = solve_forward_transport(series, theta0, T=1.0, n_steps=8, source=chi)
    assert np.max(np.abs(out2.fields[-1].values - 3.0)) < 1e-10


def test_backward_transport_constant_source():
    g = build_grid(32, 32, 2.0, -1.0, 1.0)
    series = VelocitySeries.frozen(uniform_axial(g, 0.0), 1.0)
    out = solve_backward_transport(series, lambda t, r, z: 2.0 + 0.0 * r, T=1.0, n_steps=8)
    # -f_t = 2 with f(T) = 0 gives f(0) = 2T
    assert np.max(np.abs(out.fields[0].values - 2.0)) < 1e-12
    assert out.times[0] == 0.0 and out.times[-1] == 1.0
    # final datum carried backward untouched when chi = 0
    g2, _ = g.meshes()
    f_final = ScalarField(g, np.cos(g2), role="dual")
    out2 = solve_backward_transport(series, None, T=1.0, n_steps=8, f_final=f_final)
    assert np.max(np.abs(out2.fields[0].values - f_final.values)) < 1e-12


def test_transport_validation():
    g = build_grid(16, 16, 2.0, -1.0, 1.0)
    g2 = build_grid(16, 16, 3.0, -1.0, 1.0)
    series = VelocitySeries.frozen(uniform_axial(g, 0.0), 1.0)
    theta0 = ScalarField(g, np.ones((16, 16)), role="passive_scalar")
    with pytest.raises(ValueError):
        solve_forward_transport(series, theta0, T=0.0, n_steps=4)
    with pytest.raises(ValueError):
        solve_forward_transport(series, theta0, T=1.0, n_steps=0)
    with pytest.raises(ValueError):
        solve_forward_transport(
            series, ScalarField(g2, np.ones((16, 16)), role="passive_scalar"), T=1.0, n_steps=4
        )
    with pytest.raises(ValueError):
        solve_forward_transport(series, theta0, T=1.0, n_steps=4, source=3.0)
    with pytest.raises(ValueError):
        solve_backward_transport(
            series, None, T=1.0, n_steps=4,
            f_final=ScalarField(g2, np.ones((16, 16)), role="dual"),
        )


def test_duality_box_closed_form():
    g = build_grid(32, 32, 2.0, -1.0, 1.0)
    series = VelocitySeries.frozen(uniform_axial(g, 0.0), 1.0)
    r2d, z2d = g.meshes()
    theta0 = ScalarField(g, np.exp(-2.0 * ((r2d - 1.0) ** 2 + z2d**2)), role="passive_scalar")
    theta = solve_forward_transport(series, theta0, T=1.0, n_steps=8)

    def chi(t, r, z):
        return 1.5 + 0.0 * r

    f = solve_backward_transport(series, chi, T=1.0, n_steps=8)
    assert duality_check(theta, f, chi, T=1.0) < 1e-12
    # series-valued source and the source-free adjoint identity
    chi_series = ScalarSeries.frozen(ScalarField(g, np.full((32, 32), 1.5), role="dual"), 1.0)
    f2 = solve_backward_transport(series, chi_series, T=1.0, n_steps=8)
    assert duality_check(theta, f2, chi_series, T=1.0) < 1e-12
    final = ScalarField(g, theta0.values.copy(), role="dual")
    f3 = solve_backward_transport(series, None, T=1.0, n_steps=8, f_final=final)
    assert duality_check(theta, f3, None, T=1.0) < 1e-12


def test_duality_under_shear_flow():
    # nontrivial steady shear, smooth compactly supported source
    g = build_grid(64, 64, 3.0, -1.5, 1.5)
    r2d, z2d = g.meshes()
    u = VelocityField(g, np.zeros_like(r2d), 0.4 * np.cos(1.1 * r2d))
    series = VelocitySeries.frozen(u, 0.5)
    theta0 = ScalarField(g, np.exp(-6.0 * ((r2d - 1.3) ** 2 + z2d**2)), role="passive_scalar")

    def chi(t, r, z):
        return np.exp(-5.0 * ((r - 1.5) ** 2 + (z - 0.2) ** 2))

    theta = solve_forward_transport(series, theta0, T=0.5, n_steps=16)
    f = solve_backward_transport(series, chi, T=0.5, n_steps=16)
    assert duality_check(theta, f, chi, T=0.5) < 2e-3


def test_duality_time_grid_mismatch():
    g = build_grid(16, 16, 2.0, -1.0, 1.0)
    f = ScalarField(g, np.ones((16, 16)), role="passive_scalar")
    a = ScalarSeries([0.0, 0.5, 1.0], [f] * 3)
    b = ScalarSeries([0.0, 1.0], [f] * 2)
    with pytest.raises(ValueError):
        duality_check(a, b, None, T=1.0)
