"""Torsion function Delta u = 2 in Omega, u = 0 on Gamma, by boundary integrals.

u = |x|^2/2 + v with v harmonic and v = -|x|^2/2 on Gamma.  v is sought as
a double-layer potential; the second-kind Nystrom system

    (K - I/2) phi = -|x|^2/2,
    K(x, y) = (x - y).nu_y / (2 pi |x - y|^2),   K(x, x) = -kappa(x) / (4 pi),

is solved densely.  Because D[phi] = -Re F with F the Cauchy integral of
phi, v is the real part of the analytic function G = -F.  Its boundary
trace g is computed once (principal-value Cauchy sum with the smooth
diagonal limit phi'(t)); derivatives on Gamma follow from spectral
differentiation, G' = g_t / gamma', and interior values of G, G', G'' use
the barycentric Cauchy formula, which stays accurate up to the boundary.
Computing u_nu this way differentiates the density, with no hypersingular
operator and no offset-curve extrapolation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy import optimize

from . import spectral
from .geometry import BoundaryGrid, InteriorGrid, centroid, contains, dot

log = logging.getLogger(__name__)

MIN_NODES = 32
COND_LIMIT = 1e12
UPSAMPLE = 4


class SolverError(RuntimeError):
    pass


def nystrom_matrix(grid):
    """Matrix of K - I/2 with trapezoidal weights folded into the columns."""
    x = grid.x
    diff = x[:, None] - x[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        k = dot(grid.normal[None, :], diff) / (2.0 * np.pi * np.abs(diff) ** 2)
    k[np.diag_indices_from(k)] = -grid.curvature / (4.0 * np.pi)
    a = k * grid.weights[None, :]
    a[np.diag_indices_from(a)] -= 0.5
    return a


def cauchy_trace(grid, phi):
    """Interior boundary limit of F(z) = (1/2 pi i) int phi(tau) / (tau - z) dtau."""
    x, dx = grid.x, grid.dx
    dphi = spectral.differentiate(phi)
    diff = x[None, :] - x[:, None]
    np.fill_diagonal(diff, 1.0)
    quot = (phi[None, :] - phi[:, None]) / diff * dx[None, :]
    quot[np.diag_indices_from(quot)] = dphi
    return phi + quot.sum(axis=1) * grid.h / (2j * np.pi)


class _Boundary:
    """Nodes, complex weights and traces of G, G', G'', G''' for barycentric evaluation."""

    def __init__(self, x, cw, traces):
        self.x = x
        self.cw = cw
        self.traces = traces


def _barycentric(nodes, cw, values, z):
    """Interior Cauchy formula sum(f_j c_j/(x_j-z)) / sum(c_j/(x_j-z)) for each row of values."""
    out = np.empty((values.shape[0], z.size), dtype=complex)
    for lo in range(0, z.size, 1024):
        zz = z[lo:lo + 1024]
        d = nodes[None, :] - zz[:, None]
        hit = np.abs(d) < 1e-14
        d[hit] = 1.0
        kern = cw[None, :] / d
        denom = kern.sum(axis=1)
        out[:, lo:lo + 1024] = (values @ kern.T) / denom
        rows, cols = np.nonzero(hit)
        for r, c in zip(rows, cols):
            out[:, lo + r] = values[:, c]
    return out


@dataclass
class Fields:
    """Pointwise values of u, grad u, the Hessian of h = q - u and the P-function."""

    u: np.ndarray
    grad: np.ndarray        # complex encoding u_x + i u_y
    hess_h: np.ndarray      # (m, 2, 2)
    hess_u: np.ndarray      # (m, 2, 2)
    third_v: np.ndarray     # G''' values, for third derivatives of u
    P: np.ndarray

    @property
    def hess_h_sq(self):
        return np.sum(self.hess_h**2, axis=(1, 2))

    @property
    def hess_u_sq(self):
        return np.sum(self.hess_u**2, axis=(1, 2))

    @property
    def newton_deficit(self):
        """|D^2u|^2 - (Delta u)^2/2, written as (u_xx - u_yy)^2/2 + 2 u_xy^2 to avoid cancellation."""
        H = self.hess_u
        return 0.5 * (H[:, 0, 0] - H[:, 1, 1]) ** 2 + H[:, 0, 1] ** 2 + H[:, 1, 0] ** 2

    @property
    def laplacian_u(self):
        return self.hess_u[:, 0, 0] + self.hess_u[:, 1, 1]


class TorsionSolution:
    """Discretised torsion function on a smooth closed curve."""

    def __init__(self, curve, n):
        self.curve = curve
        self.n = n
        self.grid = grid = BoundaryGrid(curve, n)
        f = -0.5 * np.abs(grid.x) ** 2
        a = nystrom_matrix(grid)
        lu, piv = scipy.linalg.lu_factor(a)
        rcond = scipy.linalg.lapack.dgecon(lu, np.linalg.norm(a, 1))[0]
        if rcond == 0 or 1.0 / rcond > COND_LIMIT:
            raise SolverError("resolution or curve invalid")
        self.density = scipy.linalg.lu_solve((lu, piv), f)
        self.residual = float(np.abs(a @ self.density - f).max())
        trace = -cauchy_trace(grid, self.density)
        self.trace_error = float(np.abs(trace.real - f).max())
        # the real part of the trace is the Dirichlet datum itself
        self.g = f + 1j * trace.imag
        traces = [self.g]
        for _ in range(3):
            traces.append(spectral.differentiate(traces[-1]) / grid.dx)
        self.traces = np.array(traces)
        self._coarse = _Boundary(grid.x, grid.dx * grid.h, self.traces)
        fine_grid = BoundaryGrid(curve, n * UPSAMPLE)
        self._fine = _Boundary(
            fine_grid.x, fine_grid.dx * fine_grid.h, spectral.upsample(self.traces, UPSAMPLE))
        self._spacing = float(grid.weights.max())
        self._z = None

    # boundary data ----------------------------------------------------

    @property
    def grad_boundary(self):
        """grad u on Gamma as x + conj(G')."""
        return self.grid.x + np.conj(self.traces[1])

    @property
    def unu(self):
        return dot(self.grid.normal, self.grad_boundary)

    @property
    def hess_v_boundary(self):
        g2 = self.traces[2]
        return _hess_from_second(g2)

    @property
    def M(self):
        """max over Gamma of u_nu, refined on the trigonometric interpolant."""
        unu = self.unu
        j = int(np.argmax(unu))
        t0 = self.grid.t[j]
        res = optimize.minimize_scalar(
            lambda t: -float(spectral.evaluate(unu, t)[0]),
            bounds=(t0 - self.grid.h, t0 + self.grid.h), method="bounded",
            options={"xatol": 1e-14})
        return max(float(-res.fun), float(unu[j]))

    @property
    def z(self):
        if self._z is None:
            self._z = find_critical_point(self)
        return self._z

    # interior evaluation ----------------------------------------------

    def _analytic(self, points, orders):
        points = np.atleast_1d(np.asarray(points, dtype=complex)).ravel()
        near = np.zeros(points.size, dtype=bool)
        for lo in range(0, points.size, 4096):
            d = np.abs(self._coarse.x[None, :] - points[lo:lo + 4096, None]).min(axis=1)
            near[lo:lo + 4096] = d < 2.0 * self._spacing
        out = np.empty((len(orders), points.size), dtype=complex)
        for mask, bnd in ((~near, self._coarse), (near, self._fine)):
            if mask.any():
                out[:, mask] = _barycentric(bnd.x, bnd.cw, bnd.traces[list(orders)], points[mask])
        return out

    def u(self, points):
        points = np.atleast_1d(np.asarray(points, dtype=complex))
        G = self._analytic(points, [0])[0].reshape(points.shape)
        return 0.5 * np.abs(points) ** 2 + G.real

    def grad_u(self, points):
        points = np.atleast_1d(np.asarray(points, dtype=complex))
        G1 = self._analytic(points, [1])[0].reshape(points.shape)
        return points + np.conj(G1)

    def eval_fields(self, points):
        points = np.atleast_1d(np.asarray(points, dtype=complex)).ravel()
        G0, G1, G2, G3 = self._analytic(points, [0, 1, 2, 3])
        u = 0.5 * np.abs(points) ** 2 + G0.real
        grad = points + np.conj(G1)
        hess_v = _hess_from_second(G2)
        hess_u = hess_v + np.eye(2)[None]
        P = 0.5 * np.abs(grad) ** 2 - u
        return Fields(u=u, grad=grad, hess_h=-hess_v, hess_u=hess_u, third_v=G3, P=P)

    def laplacian_P(self, fields):
        """Delta P = |D^2 u|^2 + grad u . grad(Delta u) - Delta u from raw derivatives."""
        g3 = fields.third_v
        # third derivatives of v: v_xxx = Re G''', v_xxy = -Im G''', v_xyy = -Re G''', v_yyy = Im G'''
        d_lap_x = g3.real + (-g3.real)
        d_lap_y = (-g3.imag) + g3.imag
        lap = fields.laplacian_u
        return fields.hess_u_sq + fields.grad.real * d_lap_x + fields.grad.imag * d_lap_y - lap


def _hess_from_second(g2):
    """Hessian of v = Re G from G'': v_xx = Re G'', v_xy = -Im G'', v_yy = -Re G''."""
    g2 = np.asarray(g2)
    h = np.empty(g2.shape + (2, 2))
    h[..., 0, 0] = g2.real
    h[..., 1, 1] = -g2.real
    h[..., 0, 1] = h[..., 1, 0] = -g2.imag
    return h


def solve_torsion(curve, n=256):
    """Solve the torsion problem on `curve` with n boundary nodes."""
    if n < MIN_NODES or n % 2:
        raise ValueError(f"node count must be even and at least {MIN_NODES}")
    return TorsionSolution(curve, n)


def boundary_normal_derivative(sol):
    return sol.unu


def find_critical_point(sol, start=None, tol=1e-12, max_steps=50):
    """Newton iteration on grad u = 0 with Jacobian D^2 u = I + D^2 v."""
    grid = sol.grid
    starts = [centroid(grid) if start is None else complex(start)]
    tried = False
    while True:
        for z in starts:
            for _ in range(max_steps):
                f = sol.eval_fields([z])
                g = f.grad[0]
                if abs(g) < tol:
                    if contains(grid, [z])[0]:
                        return complex(z)
                    break
                J = f.hess_u[0]
                step = np.linalg.solve(J, [g.real, g.imag])
                z = z - complex(step[0], step[1])
                if not np.isfinite(z) or abs(z - grid.curve.center) > 10 * np.abs(grid.x - grid.curve.center).max():
                    break
            else:
                f = sol.eval_fields([z])
                if abs(f.grad[0]) < 1e3 * tol and contains(grid, [z])[0]:
                    log.warning("critical point search stalled at |grad u| = %.2e", abs(f.grad[0]))
                    return complex(z)
        if tried:
            raise SolverError("critical point search failed from every start")
        tried = True
        ig = InteriorGrid(grid.curve, 16, 4)
        starts = list(ig.x[np.argsort(sol.u(ig.x))[:8]])


def choose_a_mean_zero(sol, igrid, z=None):
    """The constant a in q = (|x - z|^2 - a)/2 making h = q - u mean-zero on Omega."""
    z = sol.z if z is None else complex(z)
    area = igrid.integrate(1.0)
    u = sol.u(igrid.x)
    return (igrid.integrate(np.abs(igrid.x - z) ** 2) - 2.0 * igrid.integrate(u)) / area


def h_values(sol, points, z, a, u=None):
    points = np.asarray(points, dtype=complex)
    if u is None:
        u = sol.u(points)
    return 0.5 * (np.abs(points - z) ** 2 - a) - u
