"""Compactly supported C^1 test functions on the half plane.

Three families, all with closed-form gradients and support strictly inside
{r > 0} so that negative powers of r stay integrable in weighted
quadratures:

- gaussian_bump: anisotropic mollifier exp(1 - 1/(1-q)) with elliptical
  level sets, infinitely smooth, support an ellipse.
- ring_bump: the same mollifier profile in the distance from a circle in
  the (r, z) plane, support an annular shell.
- poly_bump: tensor product of quartic polynomials on a box, C^1 across
  the support boundary.

Integrals of powers and gradients are evaluated on dedicated midpoint
grids over the support bounding box, independent of any simulation grid.
Space-time variants (separable time profile times a spatial bump) feed the
weak-form transport residuals.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


def _mollifier(q: np.ndarray):
    """exp(1 - 1/(1-q)) on q < 1, 0 elsewhere, and its q-derivative."""
    q = np.asarray(q, dtype=np.float64)
    inside = q < 1.0
    qs = np.where(inside, q, 0.0)
    m = np.where(inside, np.exp(1.0 - 1.0 / (1.0 - qs)), 0.0)
    dm = np.where(inside, -m / (1.0 - qs) ** 2, 0.0)
    return m, dm


@dataclass(frozen=True)
class TestFunctionSpec:
    """One member of the built-in compactly supported families."""

    family: str
    params: dict

    def __post_init__(self):
        p = self.params
        if self.family == "gaussian_bump":
            needed = {"r0", "z0", "wr", "wz", "amplitude"}
            if set(p) != needed:
                raise ValueError(f"gaussian_bump needs params {sorted(needed)}")
            if p["wr"] <= 0 or p["wz"] <= 0:
                raise ValueError("bump widths must be positive")
            if p["r0"] - p["wr"] <= 0:
                raise ValueError(
                    f"support touches the axis: r0-wr = {p['r0'] - p['wr']:.3g} <= 0"
                )
        elif self.family == "ring_bump":
            needed = {"r0", "z0", "d0", "w", "amplitude"}
            if set(p) != needed:
                raise ValueError(f"ring_bump needs params {sorted(needed)}")
            if p["w"] <= 0 or p["d0"] <= p["w"]:
                raise ValueError("ring_bump needs d0 > w > 0")
            if p["r0"] - p["d0"] - p["w"] <= 0:
                raise ValueError("ring_bump support touches the axis")
        elif self.family == "poly_bump":
            needed = {"r_lo", "r_hi", "z_lo", "z_hi", "amplitude"}
            if set(p) != needed:
                raise ValueError(f"poly_bump needs params {sorted(needed)}")
            if not (0.0 < p["r_lo"] < p["r_hi"]) or not p["z_lo"] < p["z_hi"]:
                raise ValueError("poly_bump box must satisfy 0 < r_lo < r_hi, z_lo < z_hi")
        else:
            raise ValueError(f"unknown test-function family {self.family!r}")

    # -- geometry ---------------------------------------------------------

    def support_box(self):
        p = self.params
        if self.family == "gaussian_bump":
            return (p["r0"] - p["wr"], p["r0"] + p["wr"], p["z0"] - p["wz"], p["z0"] + p["wz"])
        if self.family == "ring_bump":
            s = p["d0"] + p["w"]
            return (p["r0"] - s, p["r0"] + s, p["z0"] - s, p["z0"] + s)
        return (p["r_lo"], p["r_hi"], p["z_lo"], p["z_hi"])

    def dilated(self, mu: float) -> "TestFunctionSpec":
        """Return the spec of f(mu r, mu z) (same amplitude)."""
        if mu <= 0:
            raise ValueError("dilation factor must be positive")
        p = dict(self.params)
        if self.family == "gaussian_bump":
            for k in ("r0", "z0", "wr", "wz"):
                p[k] = p[k] / mu
        elif self.family == "ring_bump":
            for k in ("r0", "z0", "d0", "w"):
                p[k] = p[k] / mu
        else:
            for k in ("r_lo", "r_hi", "z_lo", "z_hi"):
                p[k] = p[k] / mu
        return replace(self, params=p)

    # -- evaluation -------------------------------------------------------

    def value(self, r, z) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        z = np.asarray(z, dtype=np.float64)
        p = self.params
        if self.family == "gaussian_bump":
            q = ((r - p["r0"]) / p["wr"]) ** 2 + ((z - p["z0"]) / p["wz"]) ** 2
            m, _ = _mollifier(q)
            return p["amplitude"] * m
        if self.family == "ring_bump":
            rho = np.hypot(r - p["r0"], z - p["z0"])
            q = ((rho - p["d0"]) / p["w"]) ** 2
            m, _ = _mollifier(q)
            return p["amplitude"] * m
        return self._poly(r, z)[0]

    def gradient(self, r, z):
        r = np.asarray(r, dtype=np.float64)
        z = np.asarray(z, dtype=np.float64)
        p = self.params
        if self.family == "gaussian_bump":
            xr = (r - p["r0"]) / p["wr"]
            xz = (z - p["z0"]) / p["wz"]
            _, dm = _mollifier(xr**2 + xz**2)
            a = p["amplitude"]
            return a * dm * 2.0 * xr / p["wr"], a * dm * 2.0 * xz / p["wz"]
        if self.family == "ring_bump":
            dr = r - p["r0"]
            dz = z - p["z0"]
            rho = np.hypot(dr, dz)
            safe = np.where(rho > 0.0, rho, 1.0)
            q = ((rho - p["d0"]) / p["w"]) ** 2
            _, dm = _mollifier(q)
            common = p["amplitude"] * dm * 2.0 * (rho - p["d0"]) / p["w"] ** 2 / safe
            common = np.where(rho > 0.0, common, 0.0)
            return common * dr, common * dz
        return self._poly(r, z)[1:]

    def _poly(self, r, z):
        p = self.params
        lr = p["r_hi"] - p["r_lo"]
        lz = p["z_hi"] - p["z_lo"]
        ur = (r - p["r_lo"]) / lr
        uz = (z - p["z_lo"]) / lz
        inside = (ur > 0.0) & (ur < 1.0) & (uz > 0.0) & (uz < 1.0)
        ur = np.where(inside, ur, 0.0)
        uz = np.where(inside, uz, 0.0)
        a = p["amplitude"]
        pr = 16.0 * ur**2 * (1.0 - ur) ** 2
        pz = 16.0 * uz**2 * (1.0 - uz) ** 2
        dpr = 16.0 * (2.0 * ur * (1.0 - ur) ** 2 - 2.0 * ur**2 * (1.0 - ur)) / lr
        dpz = 16.0 * (2.0 * uz * (1.0 - uz) ** 2 - 2.0 * uz**2 * (1.0 - uz)) / lz
        return a * pr * pz, a * dpr * pz, a * pr * dpz


def support_quadrature(spec: TestFunctionSpec, n: int = 256):
    """Midpoint quadrature nodes and cell area covering the support box.

    The box is clipped to r > 0 (supports are constructed strictly inside,
    so this only trims numerically empty margin).
    """
    r_lo, r_hi, z_lo, z_hi = spec.support_box()
    r_lo = max(r_lo, 0.0)
    hr = (r_hi - r_lo) / n
    hz = (z_hi - z_lo) / n
    r = r_lo + (np.arange(n) + 0.5) * hr
    z = z_lo + (np.arange(n) + 0.5) * hz
    r2d, z2d = np.meshgrid(r, z, indexing="ij")
    return r2d, z2d, hr * hz


def integrate_power(
    spec: TestFunctionSpec, power: float, weight_exponent: float, n: int = 256
) -> float:
    """quadrature of |f|^power * r^weight_exponent over the support."""
    r2d, z2d, da = support_quadrature(spec, n)
    v = np.abs(spec.value(r2d, z2d))
    return float(np.sum(v**power * r2d**weight_exponent) * da)


def integrate_gradient_power(
    spec: TestFunctionSpec, power: float, weight_exponent: float, n: int = 256
) -> float:
    """quadrature of |grad f|^power * r^weight_exponent over the support."""
    r2d, z2d, da = support_quadrature(spec, n)
    gr, gz = spec.gradient(r2d, z2d)
    g = np.hypot(gr, gz)
    return float(np.sum(g**power * r2d**weight_exponent) * da)


def sample_on_grid(spec: TestFunctionSpec, grid) -> np.ndarray:
    r2d, z2d = grid.meshes()
    return spec.value(r2d, z2d)


def random_test_functions(
    count: int,
    rng_seed: int,
    r_range=(0.6, 3.0),
    z_range=(-2.0, 2.0),
    width_range=(0.05, 0.4),
    amplitude_range=(0.2, 5.0),
    families=("gaussian_bump", "ring_bump", "poly_bump"),
):
    """Randomized family with supports strictly inside {r > 0}.

    Widths and amplitudes are log-uniform; centers uniform.  Construction
    guarantees the axis margin by shrinking widths that would touch r = 0.
    """
    if count < 1:
        raise ValueError("count must be positive")
    rng = np.random.default_rng(rng_seed)
    out = []
    for i in range(count):
        family = families[i % len(families)]
        r0 = rng.uniform(*r_range)
        z0 = rng.uniform(*z_range)
        w = np.exp(rng.uniform(np.log(width_range[0]), np.log(width_range[1])))
        amp = np.exp(rng.uniform(np.log(amplitude_range[0]), np.log(amplitude_range[1])))
        w = min(w, 0.45 * r0)
        if family == "gaussian_bump":
            wz = w * np.exp(rng.uniform(-0.5, 0.5))
            spec = TestFunctionSpec(
                "gaussian_bump",
                {"r0": r0, "z0": z0, "wr": w, "wz": wz, "amplitude": amp},
            )
        elif family == "ring_bump":
            d0 = 2.2 * w
            if r0 - d0 - w <= 0.0:
                r0 = d0 + w + 0.1
            spec = TestFunctionSpec(
                "ring_bump",
                {"r0": r0, "z0": z0, "d0": d0, "w": w, "amplitude": amp},
            )
        else:
            spec = TestFunctionSpec(
                "poly_bump",
                {
                    "r_lo": r0 - w,
                    "r_hi": r0 + w,
                    "z_lo": z0 - w,
                    "z_hi": z0 + w,
                    "amplitude": amp,
                },
            )
        out.append(spec)
    return out


# ---------------------------------------------------------------------------
# space-time bumps for weak-form transport residuals


@dataclass(frozen=True)
class SpaceTimeBump:
    """Separable test function w(t) * b(r,z), C^2, supported in [0, tau) x H.

    profile "decay": w(t) = (1 - (t/tau)^2)^3, equal to 1 at t = 0 so the
    initial term of the weak form is active.  profile "bump": w vanishes at
    both ends of [0, tau].  Both profiles meet t = tau with two vanishing
    derivatives; trapezoid quadrature of the residual then converges at a
    clean second order regardless of where tau falls between snapshots.
    """

    space: TestFunctionSpec
    tau: float
    profile: str = "decay"

    def __post_init__(self):
        if self.tau <= 0.0:
            raise ValueError("tau must be positive")
        if self.profile not in ("decay", "bump"):
            raise ValueError(f"unknown time profile {self.profile!r}")

    def time_weight(self, t):
        t = np.asarray(t, dtype=np.float64)
        u = np.clip(t / self.tau, 0.0, 1.0)
        if self.profile == "decay":
            w = (1.0 - u**2) ** 3
            dw = -6.0 * u * (1.0 - u**2) ** 2 / self.tau
        else:
            w = 64.0 * u**3 * (1.0 - u) ** 3
            dw = 192.0 * u**2 * (1.0 - u) ** 2 * (1.0 - 2.0 * u) / self.tau
        live = (t >= 0.0) & (t < self.tau)
        return np.where(live, w, 0.0), np.where(live, dw, 0.0)

    def value(self, t, r, z):
        w, _ = self.time_weight(t)
        return w * self.space.value(r, z)

    def dt(self, t, r, z):
        _, dw = self.time_weight(t)
        return dw * self.space.value(r, z)

    def gradient(self, t, r, z):
        w, _ = self.time_weight(t)
        gr, gz = self.space.gradient(r, z)
        return w * gr, w * gz

    def norm(self, n: int = 64) -> float:
        """sup|f| + sup|f_t| + sup|grad f| over a sample of the support."""
        r2d, z2d, _ = support_quadrature(self.space, n)
        v = np.max(np.abs(self.space.value(r2d, z2d)))
        gr, gz = self.space.gradient(r2d, z2d)
        g = np.max(np.hypot(gr, gz))
        ts = np.linspace(0.0, self.tau, 65)
        w, dw = self.time_weight(ts)
        return float(np.max(w) * (v + g) + np.max(np.abs(dw)) * v)


def renorm_test_library(
    count: int,
    T: float,
    rng_seed: int,
    r_range=(0.6, 3.0),
    z_range=(-2.0, 2.0),
    width_range=(0.08, 0.4),
):
    """Space-time bump library spanning [0, T) with mixed time profiles."""
    specs = random_test_functions(
        count, rng_seed, r_range=r_range, z_range=z_range, width_range=width_range
    )
    rng = np.random.default_rng(rng_seed + 1)
    out = []
    for i, s in enumerate(specs):
        tau = T * rng.uniform(0.55, 0.98)
        profile = "decay" if i % 2 == 0 else "bump"
        out.append(SpaceTimeBump(space=s, tau=tau, profile=profile))
    return out
