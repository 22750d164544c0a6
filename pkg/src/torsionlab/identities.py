"""Both sides of the integral identities satisfied by the torsion function."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize

from . import spectral
from .geometry import N_DIM, area_perimeter, dot, reference_constants, rho_in_out

EPS_FLOOR = 1e-14


def relative_residual(lhs, rhs, floor=EPS_FLOOR):
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), floor)


@dataclass
class IdentityReport:
    identity: str
    lhs: float
    rhs: float
    n: int
    n_theta: int | None = None
    n_r: int | None = None
    kind: str = "equality"
    status: str = ""
    cross_check: dict = field(default_factory=dict)
    abs_residual: float = field(init=False)
    rel_residual: float = field(init=False)

    def __post_init__(self):
        self.lhs = float(self.lhs)
        self.rhs = float(self.rhs)
        self.abs_residual = abs(self.lhs - self.rhs)
        self.rel_residual = relative_residual(self.lhs, self.rhs)
        if not self.status:
            self.status = "ok" if self.kind == "equality" else (
                "holds" if self.lhs <= self.rhs else "violated")

    def to_dict(self):
        return asdict(self)


class Context:
    """Boundary and interior samples shared by every identity for one solution."""

    def __init__(self, sol, igrid):
        self.sol = sol
        self.igrid = igrid
        grid = sol.grid
        self.grid = grid
        self.area, self.perimeter = area_perimeter(grid)
        self.R, self.H0 = reference_constants(self.area, self.perimeter)
        self.unu = sol.unu
        self.fields = sol.eval_fields(igrid.x)

    def q_nu(self, z):
        return dot(self.grid.normal, self.grid.x - complex(z))

    def h_nu(self, z):
        return self.q_nu(z) - self.unu

    def bint(self, values):
        return self.grid.integrate(values)

    def vint(self, values):
        return self.igrid.integrate(values)

    def sizes(self):
        return dict(n=self.sol.n, n_theta=self.igrid.n_theta, n_r=self.igrid.n_r)


def serrin_identity(ctx, z):
    """int (-u) {|D^2u|^2 - (Delta u)^2/N} = 1/2 int (u_nu^2 - R^2)(u_nu - q_nu) dS."""
    f = ctx.fields
    deficit_u = f.newton_deficit
    lhs = ctx.vint(-f.u * deficit_u)
    rhs = 0.5 * ctx.bint((ctx.unu**2 - ctx.R**2) * (ctx.unu - ctx.q_nu(z)))
    h_lhs = ctx.vint(-f.u * f.hess_h_sq)
    h_rhs = 0.5 * ctx.bint((ctx.R**2 - ctx.unu**2) * ctx.h_nu(z))
    return IdentityReport(
        "serrin", lhs, rhs, **ctx.sizes(),
        cross_check={"z": [complex(z).real, complex(z).imag], "h_form_lhs": h_lhs,
                     "h_form_rhs": h_rhs,
                     "h_form_rel_residual": relative_residual(h_lhs, h_rhs)})


def sbt_identity(ctx, z):
    """The Soap Bubble identity in its u-form, with the h-form as cross-check."""
    f = ctx.fields
    H = ctx.grid.curvature
    R, H0, unu = ctx.R, ctx.H0, ctx.unu
    qn = ctx.q_nu(z)
    deficit_u = f.newton_deficit
    boundary_lhs = ctx.bint((unu - R) ** 2) / R
    lhs = ctx.vint(deficit_u) / (N_DIM - 1) + boundary_lhs
    tail = ctx.bint((H0 - H) * (unu - R) * qn)
    rhs = ctx.bint((H0 - H) * (unu - qn) * unu) + tail
    h_lhs = ctx.vint(f.hess_h_sq) / (N_DIM - 1) + boundary_lhs
    h_rhs = -ctx.bint((H0 - H) * ctx.h_nu(z) * unu) + tail
    rel_u = relative_residual(lhs, rhs)
    rel_h = relative_residual(h_lhs, h_rhs)
    return IdentityReport(
        "sbt", lhs, rhs, **ctx.sizes(),
        cross_check={"z": [complex(z).real, complex(z).imag], "h_form_lhs": h_lhs,
                     "h_form_rhs": h_rhs, "h_form_rel_residual": rel_h,
                     "form_disagreement": abs(rel_u - rel_h)})


def pohozaev_identity(ctx, z=0j):
    """(N + 2) int |grad u|^2 = int u_nu^2 q_nu dS."""
    f = ctx.fields
    lhs = (N_DIM + 2) * ctx.vint(np.abs(f.grad) ** 2)
    rhs = ctx.bint(ctx.unu**2 * ctx.q_nu(z))
    return IdentityReport("pohozaev", lhs, rhs, **ctx.sizes(),
                          cross_check={"z": [complex(z).real, complex(z).imag]})


def divergence_identity(ctx):
    """int u_nu dS = N |Omega|."""
    return IdentityReport("divergence", ctx.bint(ctx.unu), N_DIM * ctx.area, n=ctx.sol.n)


def minkowski_identity(ctx, z):
    """int H q_nu dS = |Gamma|."""
    return IdentityReport("minkowski", ctx.bint(ctx.grid.curvature * ctx.q_nu(z)),
                          ctx.perimeter, n=ctx.sol.n,
                          cross_check={"z": [complex(z).real, complex(z).imag]})


def fd_laplacian(fun, points, step):
    """Fourth-order nine-point Laplacian (five-point stencil along each axis)."""
    points = np.asarray(points, dtype=complex)
    c = {0: -5.0 / 2.0, 1: 4.0 / 3.0, 2: -1.0 / 12.0}
    acc = 2 * c[0] * fun(points)
    for k in (1, 2):
        for d in (1.0, 1j):
            acc = acc + c[k] * (fun(points + k * step * d) + fun(points - k * step * d))
    return acc / step**2


def pfunction_identity(sol, points, step=None):
    """Delta P = |D^2u|^2 - (Delta u)^2/N at interior points, and P subharmonic.

    The left side expands Delta P by the product rule from the computed
    derivatives of u; a finite-difference Laplacian of P is the independent
    oracle and is reported under ``cross_check``.
    """
    points = np.atleast_1d(np.asarray(points, dtype=complex))
    f = sol.eval_fields(points)
    lap_p = sol.laplacian_P(f)
    deficit = f.hess_u_sq - f.laplacian_u**2 / N_DIM
    if step is None:
        step = 2e-3 * float(np.abs(sol.grid.x - sol.curve.center).max())

    def P(x):
        g = sol.eval_fields(x)
        return g.P

    fd = fd_laplacian(P, points, step)
    diff = np.abs(lap_p - deficit)
    scale = max(np.abs(lap_p).max(), np.abs(deficit).max(), EPS_FLOOR)
    report = IdentityReport(
        "pfunction", lap_p.sum(), deficit.sum(), n=sol.n,
        cross_check={"points": int(points.size), "min_laplacian_P": float(lap_p.min()),
                     "fd_max_abs_diff": float(np.abs(fd - lap_p).max()),
                     "fd_step": step, "subharmonic": bool(lap_p.min() >= -1e-9)})
    # pointwise identity: report the worst point rather than the summed sides
    report.abs_residual = float(diff.max())
    report.rel_residual = float(diff.max() / scale)
    return report


def hessian_boundary(sol, z=0j):
    """grad h and (D^2 h) nu on Gamma by tangential differentiation of grad h.

    D^2 h is symmetric and trace free, so [[p, r], [r, -p]] is fixed by its
    action on the unit tangent, which is d(grad h)/ds.
    """
    grid = sol.grid
    grad_h = (grid.x - complex(z)) - sol.grad_boundary
    d = spectral.differentiate(grad_h) / grid.speed
    T = grid.tangent
    p = T.real * d.real - T.imag * d.imag
    r = T.imag * d.real + T.real * d.imag
    nu = grid.normal
    hn = (p * nu.real + r * nu.imag) + 1j * (r * nu.real - p * nu.imag)
    return grad_h, hn


def hess_norm_crosscheck(ctx, z=0j, flag_tol=1e-3):
    """int |D^2 h|^2 by volume quadrature and as sum_i int h_i (h_i)_nu dS."""
    volume = ctx.vint(ctx.fields.hess_h_sq)
    grad_h, hn = hessian_boundary(ctx.sol, z)
    boundary = ctx.bint(dot(grad_h, hn))
    rep = IdentityReport("hessian_norm", volume, boundary, **ctx.sizes())
    if rep.rel_residual > flag_tol and rep.abs_residual > 1e-10:
        rep.status = "quadrature unreliable"
    return rep


def trace_inequality_report(ctx, r_i, mu_half, z=None):
    """int |grad h|^2 dS <= (2/r_i)(1 + N/(r_i mu_1/2)) int (-u)|D^2h|^2 dx.

    mu_half is an upper bound on the true constant, so a violation is only
    "inconclusive".  The weighted identity behind the bound,
    int |grad h|^2 u_nu dS = N int |grad h|^2 dx + 2 int (-u)|D^2 h|^2 dx,
    is checked alongside.
    """
    sol = ctx.sol
    z = sol.z if z is None else complex(z)
    f = ctx.fields
    grad_h_b = (ctx.grid.x - z) - sol.grad_boundary
    lhs = ctx.bint(np.abs(grad_h_b) ** 2)
    weighted = ctx.vint(-f.u * f.hess_h_sq)
    rhs = (2.0 / r_i) * (1.0 + N_DIM / (r_i * mu_half)) * weighted
    h_nu_sq = ctx.bint(ctx.h_nu(z) ** 2)
    id_lhs = ctx.bint(np.abs(grad_h_b) ** 2 * ctx.unu)
    grad_h_in = (ctx.igrid.x - z) - f.grad
    id_rhs = N_DIM * ctx.vint(np.abs(grad_h_in) ** 2) + 2.0 * weighted
    status = "holds" if lhs <= rhs + 1e-12 else "inconclusive"
    return IdentityReport(
        "trace_inequality", lhs, rhs, **ctx.sizes(), kind="inequality", status=status,
        cross_check={"mu_half": mu_half, "r_i": r_i, "h_nu_sq": h_nu_sq,
                     "lhs_ge_h_nu_sq": bool(lhs >= h_nu_sq - 1e-12),
                     "weighted_identity_lhs": id_lhs, "weighted_identity_rhs": id_rhs,
                     "weighted_identity_rel_residual": relative_residual(id_lhs, id_rhs)})


def oscillation_check(sol, z, a=0.0, refine=True):
    """max h - min h on Gamma against (rho_e^2 - rho_i^2)/2, with h = q there."""
    grid = sol.grid
    # u on Gamma is the (near-zero) solver residual; keep it so h = q - u exactly
    u_b = 0.5 * np.abs(grid.x) ** 2 + sol.g.real
    hb = 0.5 * (np.abs(grid.x - z) ** 2 - a) - u_b
    ext = []
    for sign in (1.0, -1.0):
        j = int(np.argmax(sign * hb))
        val = sign * hb[j]
        if refine:
            res = optimize.minimize_scalar(
                lambda t: -sign * float(spectral.evaluate(hb, t)[0]),
                bounds=(grid.t[j] - grid.h, grid.t[j] + grid.h), method="bounded",
                options={"xatol": 1e-14})
            val = max(val, -float(res.fun))
        ext.append(sign * val)
    rho_i, rho_e = rho_in_out(grid, z)
    return ext[0] - ext[1], 0.5 * (rho_e**2 - rho_i**2)


def run_all(sol, igrid, z_choices=None, geom=None, mu_half=None):
    """Every identity report for one solved domain."""
    z = sol.z
    ctx = Context(sol, igrid)
    if z_choices is None:
        z_choices = [z, z + 0.1 * (1 + 1j) * ctx.R]
    reports = []
    for zz in z_choices:
        reports.append(serrin_identity(ctx, zz))
        reports.append(sbt_identity(ctx, zz))
    reports.append(pohozaev_identity(ctx, 0j))
    reports.append(divergence_identity(ctx))
    reports.append(minkowski_identity(ctx, z))
    reports.append(hess_norm_crosscheck(ctx, z))
    if geom is not None and mu_half is not None:
        reports.append(trace_inequality_report(ctx, geom.r_i, mu_half, z))
    return ctx, reports
