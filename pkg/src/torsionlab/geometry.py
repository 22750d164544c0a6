"""Closed planar curves, boundary/interior quadrature and geometric quantities.

Points in the plane are stored as complex numbers x + iy throughout.
Curves are parametrized counter-clockwise on [0, 2*pi), so the outward unit
normal is -i times the unit tangent and the signed curvature is positive on
convex arcs (the unit circle has curvature 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import spectral

N_DIM = 2


class CurveError(ValueError):
    """Raised for invalid or degenerate curve descriptions."""


def cross(a, b):
    """z-component of the planar cross product of complex-encoded vectors."""
    return (np.conj(a) * b).imag


def dot(a, b):
    return (np.conj(a) * b).real


@dataclass(frozen=True)
class BoundaryCurve:
    """A smooth closed star-shaped curve with closed-form derivatives.

    kind is one of ``ellipse`` (semi-axes a, b), ``fourier_disk``
    (r(t) = r0 + sum eps_k cos(k t) in polar form) or ``unit_disk``.
    The curve may be translated by ``center``.
    """

    kind: str
    a: float = 1.0
    b: float = 1.0
    r0: float = 1.0
    modes: tuple = ()
    center: complex = 0j

    def __post_init__(self):
        if self.kind not in ("ellipse", "fourier_disk", "unit_disk"):
            raise CurveError(f"unknown curve kind {self.kind!r}")
        if self.kind == "ellipse" and not (self.a > 0 and self.b > 0):
            raise CurveError("ellipse semi-axes must be positive")
        if self.kind == "fourier_disk":
            if self.r0 <= 0:
                raise CurveError("base radius must be positive")
            modes = tuple((int(k), float(e)) for k, e in self.modes)
            if any(k < 1 for k, _ in modes):
                raise CurveError("Fourier modes must be positive integers")
            object.__setattr__(self, "modes", modes)
            if self.r0 - sum(abs(e) for _, e in modes) <= 0:
                raise CurveError("radius function must stay positive")
        object.__setattr__(self, "center", complex(self.center))

    @classmethod
    def ellipse(cls, a, b, center=0j):
        return cls("ellipse", a=float(a), b=float(b), center=center)

    @classmethod
    def fourier_disk(cls, r0, modes=(), center=0j):
        return cls("fourier_disk", r0=float(r0), modes=tuple(modes), center=center)

    @classmethod
    def unit_disk(cls):
        return cls("unit_disk")

    @classmethod
    def disk(cls, radius, center=0j):
        return cls.fourier_disk(radius, (), center=center)

    @classmethod
    def from_dict(cls, desc):
        """Build a curve from its JSON description."""
        try:
            kind = desc["kind"]
            center = complex(*desc.get("center", (0.0, 0.0)))
            if kind == "ellipse":
                return cls.ellipse(desc["a"], desc["b"], center)
            if kind == "fourier_disk":
                return cls.fourier_disk(desc["r0"], [tuple(m) for m in desc.get("modes", [])], center)
            if kind == "unit_disk":
                return cls.unit_disk()
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, CurveError):
                raise
            raise CurveError(f"malformed curve description: {exc}") from exc
        raise CurveError(f"unknown curve kind {kind!r}")

    def to_dict(self):
        if self.kind == "ellipse":
            d = {"kind": "ellipse", "a": self.a, "b": self.b}
        elif self.kind == "fourier_disk":
            d = {"kind": "fourier_disk", "r0": self.r0, "modes": [list(m) for m in self.modes]}
        else:
            d = {"kind": "unit_disk"}
        if self.center != 0:
            d["center"] = [self.center.real, self.center.imag]
        return d

    @property
    def is_disk(self):
        if self.kind == "unit_disk":
            return True
        if self.kind == "ellipse":
            return self.a == self.b
        return all(e == 0 for _, e in self.modes)

    def derivatives(self, t, order=3):
        """Return [gamma, gamma', ..., gamma^(order)] at parameters t."""
        t = np.asarray(t, dtype=float)
        if self.kind in ("ellipse", "unit_disk"):
            a, b = (self.a, self.b) if self.kind == "ellipse" else (1.0, 1.0)
            c, s = np.cos(t), np.sin(t)
            # d/dt cycles (c, s) -> (-s, c) -> (-c, -s) -> (s, -c)
            table = [(c, s), (-s, c), (-c, -s), (s, -c)]
            out = [a * x + 1j * b * y for x, y in table[: order + 1]]
        else:
            r = [np.full_like(t, self.r0)] + [np.zeros_like(t) for _ in range(order)]
            for k, eps in self.modes:
                c, s = np.cos(k * t), np.sin(k * t)
                table = [c, -s, -c, s]
                for m in range(order + 1):
                    r[m] = r[m] + eps * k**m * table[m % 4]
            e = np.exp(1j * t)
            # Leibniz rule with (e^{it})^(m) = i^m e^{it}
            out = []
            for m in range(order + 1):
                acc = np.zeros_like(t, dtype=complex)
                for j in range(m + 1):
                    acc = acc + math.comb(m, j) * r[j] * (1j) ** (m - j)
                out.append(acc * e)
        out[0] = out[0] + self.center
        return out

    def __call__(self, t):
        return self.derivatives(t, order=0)[0]

    def curvature(self, t):
        _, d1, d2 = self.derivatives(t, order=2)
        return cross(d1, d2) / np.abs(d1) ** 3

    def polar_radius(self, theta):
        """Distance from the curve's own center along direction theta."""
        theta = np.asarray(theta, dtype=float)
        if self.kind == "fourier_disk":
            return self.radius_function(theta)
        a, b = (self.a, self.b) if self.kind == "ellipse" else (1.0, 1.0)
        return a * b / np.sqrt((b * np.cos(theta)) ** 2 + (a * np.sin(theta)) ** 2)

    def radius_function(self, t):
        r = np.full_like(np.asarray(t, dtype=float), self.r0)
        for k, eps in self.modes:
            r = r + eps * np.cos(k * t)
        return r


@dataclass(frozen=True)
class Frame:
    point: complex
    tangent: complex
    normal: complex
    curvature: float
    speed: float


def curve_frame(curve, t):
    """Point, unit tangent, outward normal, curvature and speed at parameter t."""
    g, d1, d2 = (complex(v) for v in curve.derivatives(float(t), order=2))
    speed = abs(d1)
    if speed < 1e-12:
        raise CurveError("irregular curve")
    tangent = d1 / speed
    return Frame(g, tangent, -1j * tangent, cross(d1, d2) / speed**3, speed)


class BoundaryGrid:
    """Periodic trapezoidal rule on n equispaced parameter nodes."""

    def __init__(self, curve, n):
        if n < 4 or n % 2:
            raise ValueError("boundary node count must be even and at least 4")
        self.curve = curve
        self.n = n
        self.t = spectral.nodes(n)
        self.x, self.dx, self.ddx, self.dddx = curve.derivatives(self.t, order=3)
        self.speed = np.abs(self.dx)
        if self.speed.min() < 1e-12:
            raise CurveError("irregular curve")
        self.tangent = self.dx / self.speed
        self.normal = -1j * self.tangent
        self.curvature = cross(self.dx, self.ddx) / self.speed**3
        self.h = 2.0 * np.pi / n
        self.weights = self.h * self.speed
        if cross(self.x - curve.center, self.dx).min() <= 0:
            raise CurveError("curve is not simple and star-shaped about its center")

    @property
    def points(self):
        return np.column_stack([self.x.real, self.x.imag])

    def integrate(self, values):
        return float(np.sum(self.weights * values))


class InteriorGrid:
    """Product rule on a star-shaped domain.

    Points are y = c + s (gamma(t) - c) with trapezoidal nodes in t and
    Gauss-Legendre nodes in s on [0, 1]; the weight carries the Jacobian
    s * cross(gamma - c, gamma').
    """

    def __init__(self, curve, n_theta=96, n_r=64, center=None):
        c = curve.center if center is None else complex(center)
        t = spectral.nodes(n_theta)
        g, dg = curve.derivatives(t, order=1)
        jac = cross(g - c, dg)
        if jac.min() <= 0:
            raise CurveError("domain is not star-shaped about the grid center")
        s, ws = np.polynomial.legendre.leggauss(n_r)
        s = 0.5 * (s + 1.0)
        ws = 0.5 * ws
        self.center = c
        self.n_theta = n_theta
        self.n_r = n_r
        self.s = s
        self.t = t
        self.x = (c + np.outer(s, g - c)).ravel()
        self.weights = (np.outer(ws * s, jac) * (2.0 * np.pi / n_theta)).ravel()

    def integrate(self, values):
        return float(np.sum(self.weights * values))


def area_perimeter(grid):
    """Area by Green's theorem, |Omega| = 1/2 int x.nu dS, and perimeter."""
    area = 0.5 * grid.integrate(dot(grid.normal, grid.x))
    return area, float(np.sum(grid.weights))


def reference_constants(area, perimeter):
    """R = N |Omega| / |Gamma| and H0 = 1 / R."""
    R = N_DIM * area / perimeter
    return R, 1.0 / R


def centroid(grid):
    area, _ = area_perimeter(grid)
    x, nu = grid.x, grid.normal
    mx = grid.integrate(0.5 * x.real**2 * nu.real)
    my = grid.integrate(0.5 * x.imag**2 * nu.imag)
    return complex(mx, my) / area


def contains(grid, points):
    """Winding-number test against the boundary polygon."""
    points = np.atleast_1d(np.asarray(points, dtype=complex))
    x = grid.x
    nxt = np.roll(x, -1)
    out = np.empty(points.shape, dtype=bool)
    for i, p in enumerate(points.ravel()):
        winding = np.angle((nxt - p) / (x - p)).sum() / (2 * np.pi)
        out.ravel()[i] = abs(winding - 1.0) < 0.5
    return out


def _refine_extremum(fun, t0, h, sign):
    res = optimize.minimize_scalar(
        lambda t: sign * fun(t), bounds=(t0 - h, t0 + h), method="bounded",
        options={"xatol": 1e-14},
    )
    return float(res.x), sign * float(res.fun)


def rho_in_out(grid, z):
    """Radii of the largest ball about z inside Omega and the smallest containing it."""
    z = complex(z)
    if not contains(grid, z)[0]:
        raise ValueError("center point lies outside the domain")
    curve = grid.curve
    d = np.abs(grid.x - z)

    def dist(t):
        return float(abs(curve(t) - z))

    _, rho_i = _refine_extremum(dist, grid.t[np.argmin(d)], grid.h, 1.0)
    _, rho_e = _refine_extremum(dist, grid.t[np.argmax(d)], grid.h, -1.0)
    return min(rho_i, d.min()), max(rho_e, d.max())


def delta_gamma(curve, points, n_scan=1024, chunk=2048):
    """Distance to the boundary: coarse scan followed by Newton refinement."""
    points = np.atleast_1d(np.asarray(points, dtype=complex))
    flat = points.ravel()
    ts = spectral.nodes(n_scan)
    xs = curve(ts)
    out = np.empty(flat.shape)
    for lo in range(0, flat.size, chunk):
        p = flat[lo:lo + chunk]
        dist = np.abs(xs[None, :] - p[:, None])
        j = np.argmin(dist, axis=1)
        best = dist[np.arange(p.size), j]
        t = ts[j].copy()
        for _ in range(20):
            g, d1, d2 = curve.derivatives(t, order=2)
            f = dot(d1, g - p)
            fp = np.abs(d1) ** 2 + dot(d2, g - p)
            step = np.where(fp > 0, f / np.where(fp > 0, fp, 1.0), 0.0)
            step = np.clip(step, -np.pi / n_scan * 2, np.pi / n_scan * 2)
            t = t - step
            if np.abs(step).max() < 1e-15:
                break
        refined = np.abs(curve(t) - p)
        # Newton may wander to a worse stationary point; keep the scan value then
        out[lo:lo + chunk] = np.minimum(refined, best)
    return out.reshape(points.shape)


def diameter(grid, max_nodes=1024):
    """Largest pairwise boundary distance, refined by local optimisation."""
    stride = max(1, grid.n // max_nodes)
    x, t = grid.x[::stride], grid.t[::stride]
    d = np.abs(x[:, None] - x[None, :])
    i, j = np.unravel_index(np.argmax(d), d.shape)
    curve = grid.curve
    res = optimize.minimize(
        lambda p: -abs(curve(p[0]) - curve(p[1])), x0=[t[i], t[j]],
        method="Nelder-Mead", options={"xatol": 1e-13, "fatol": 1e-15},
    )
    return max(float(-res.fun), float(d[i, j]))


def _extreme_curvature(grid, sign):
    kappa = grid.curvature
    j = np.argmax(sign * kappa)
    _, val = _refine_extremum(lambda t: float(grid.curve.curvature(t)), grid.t[j], grid.h, -sign)
    return max(sign * val, sign * kappa[j]) * sign


def _clearance(x, normal, side):
    """For each node p, the largest ball touching at p on the given side (+1 interior,
    -1 exterior) whose interior misses every other node."""
    n = x.size
    out = np.empty(n)
    for lo in range(0, n, 512):
        p = x[lo:lo + 512, None]
        nu = normal[lo:lo + 512, None]
        diff = x[None, :] - p
        proj = -side * dot(nu, diff)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(proj > 0, np.abs(diff) ** 2 / (2.0 * proj), np.inf)
        out[lo:lo + 512] = r.min(axis=1)
    return out


def sphere_condition_radii(grid, upsample=4):
    """Uniform interior and exterior touching-ball radii (r_i, r_e).

    r_e is +inf for convex curves.
    """
    fine = BoundaryGrid(grid.curve, grid.n * upsample) if upsample > 1 else grid
    k_max = _extreme_curvature(fine, 1.0)
    k_min = _extreme_curvature(fine, -1.0)
    r_i = min(1.0 / k_max if k_max > 0 else np.inf, _clearance(fine.x, fine.normal, 1.0).min())
    if k_min > 0:
        return float(r_i), math.inf
    r_e = min(1.0 / abs(k_min), _clearance(fine.x, fine.normal, -1.0).min())
    return float(r_i), float(r_e)


def is_convex(grid):
    return bool(grid.curvature.min() > 0)


def symmetric_difference_ratio(curve, x, R, n_scan=4096, order=24):
    """|Omega symmetric-difference B_R(x)| / |B_R(x)| for Omega star-shaped about x.

    In polar coordinates about x the symmetric difference has area
    int 1/2 |r(theta)^2 - R^2| dtheta; this is integrated in the curve
    parameter with Gauss-Legendre panels split at the crossings r = R.
    """
    x = complex(x)
    ts = spectral.nodes(n_scan)
    g, dg = curve.derivatives(ts, order=1)
    if cross(g - x, dg).min() <= 0:
        raise ValueError("domain is not star-shaped about the candidate center")

    def gap(t):
        return abs(curve(t) - x) ** 2 - R * R

    vals = np.abs(g - x) ** 2 - R * R
    breaks = [0.0]
    for j in range(n_scan):
        v0, v1 = vals[j], vals[(j + 1) % n_scan]
        if v0 == 0.0:
            breaks.append(ts[j])
        elif v0 * v1 < 0:
            t1 = ts[j] + 2 * np.pi / n_scan
            breaks.append(optimize.brentq(gap, ts[j], t1, xtol=1e-15))
    breaks = sorted(set(b for b in breaks if 0.0 <= b < 2 * np.pi)) + [2 * np.pi]
    # split long panels so each stays well resolved
    edges = []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        m = max(1, int(np.ceil((hi - lo) / (2 * np.pi / 64))))
        edges.extend(np.linspace(lo, hi, m + 1)[:-1])
    edges = np.array(edges + [2 * np.pi])
    s, w = np.polynomial.legendre.leggauss(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    tq = (0.5 * (hi - lo) * s + 0.5 * (hi + lo)).ravel()
    wq = (0.5 * (hi - lo) * w).ravel()
    gq, dgq = curve.derivatives(tq, order=1)
    rel = gq - x
    dtheta = cross(rel, dgq) / np.abs(rel) ** 2
    area = np.sum(wq * 0.5 * np.abs(np.abs(rel) ** 2 - R * R) * dtheta)
    return float(area / (np.pi * R * R))


def asymmetry(grid, candidates, R):
    """Upper bound on the asymmetry A(Omega).

    Minimises the normalised symmetric difference with B_R over the candidate
    centers and over a Nelder-Mead search started from each of them.
    Returns (value, minimising center).
    """
    curve = grid.curve

    def objective(p):
        try:
            return symmetric_difference_ratio(curve, complex(p[0], p[1]), R)
        except ValueError:
            return np.inf

    best, best_x = np.inf, None
    for c in candidates:
        c = complex(c)
        val = objective((c.real, c.imag))
        if val < best:
            best, best_x = val, c
        res = optimize.minimize(
            objective, x0=[c.real, c.imag], method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-14, "initial_simplex": [
                [c.real, c.imag], [c.real + 0.02 * R, c.imag], [c.real, c.imag + 0.02 * R]]},
        )
        if res.fun < best:
            best, best_x = float(res.fun), complex(res.x[0], res.x[1])
    return max(float(best), 0.0), best_x


@dataclass
class GeometrySummary:
    area: float
    perimeter: float
    R: float
    H0: float
    diameter: float
    r_i: float
    r_e: float
    z: complex
    rho_i: float
    rho_e: float
    asymmetry: float
    asymmetry_center: complex
    convex: bool
    delta_z: float
    b0_bound: float = field(init=False)
    L0_bound: float = field(init=False)

    def __post_init__(self):
        self.b0_bound = self.diameter / self.r_i
        self.L0_bound = self.diameter / min(self.r_i, self.delta_z)

    def to_dict(self):
        out = {}
        for k, v in self.__dict__.items():
            if isinstance(v, complex):
                v = [v.real, v.imag]
            elif isinstance(v, (bool, np.bool_)):
                v = bool(v)
            else:
                v = float(v)
            out[k] = v
        return out


def summarize(grid, z, with_asymmetry=True):
    """Collect all scalar geometric quantities of the domain about the point z."""
    area, perimeter = area_perimeter(grid)
    R, H0 = reference_constants(area, perimeter)
    r_i, r_e = sphere_condition_radii(grid)
    rho_i, rho_e = rho_in_out(grid, z)
    if with_asymmetry:
        asym, asym_x = asymmetry(grid, [z, centroid(grid)], R)
    else:
        asym, asym_x = math.nan, complex(math.nan, math.nan)
    return GeometrySummary(
        area=area, perimeter=perimeter, R=R, H0=H0, diameter=diameter(grid),
        r_i=r_i, r_e=r_e, z=complex(z), rho_i=rho_i, rho_e=rho_e,
        asymmetry=asym, asymmetry_center=asym_x, convex=is_convex(grid),
        delta_z=float(delta_gamma(grid.curve, z)[0]),
    )


def random_interior_points(curve, m, rng, margin=1e-3):
    """m points y = c + s (gamma(t) - c), uniform in t and in s^2, with s <= 1 - margin."""
    t = rng.uniform(0.0, 2.0 * np.pi, m)
    s = np.sqrt(rng.uniform(0.0, 1.0, m)) * (1.0 - margin)
    return curve.center + s * (curve(t) - curve.center)
