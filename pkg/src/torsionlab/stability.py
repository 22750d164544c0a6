"""Family sweeps, Hardy-Poincare constant estimates and stability checks."""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg

from . import spectral
from .geometry import (
    N_DIM, BoundaryCurve, BoundaryGrid, CurveError, InteriorGrid, area_perimeter, delta_gamma,
    reference_constants, rho_in_out, summarize,
)
from .identities import Context, serrin_identity
from .torsion import solve_torsion

log = logging.getLogger(__name__)

PASS, FAIL, INCONCLUSIVE = "PASS", "FAIL", "INCONCLUSIVE"


def deviations(sol):
    """L1 and L2 norms on Gamma of u_nu - R, and the L2 norm of H0 - H."""
    grid = sol.grid
    R, H0 = reference_constants(*area_perimeter(grid))
    du = sol.unu - R
    dH = H0 - grid.curvature
    # |du| has kinks, so integrate the interpolant piecewise rather than by trapezoid
    return (spectral.abs_integral(du * grid.speed), math.sqrt(grid.integrate(du**2)),
            math.sqrt(grid.integrate(dH**2)))


# Hardy-Poincare constants ------------------------------------------------

@dataclass
class MuEstimate:
    alpha: float
    variant: str
    value: float
    degree: int


def harmonic_basis(points, center, scale, degree):
    """Values and complex-encoded gradients of 1, Re w^m, Im w^m (w = (x - c)/scale)."""
    w = (np.asarray(points) - center) / scale
    vals = [np.ones(w.shape)]
    grads = [np.zeros(w.shape, dtype=complex)]
    for m in range(1, degree + 1):
        f = w**m
        fp = m * w ** (m - 1) / scale
        vals += [f.real, f.imag]
        # grad Re f = (Re f', -Im f'), grad Im f = (Im f', Re f')
        grads += [np.conj(fp), 1j * np.conj(fp)]
    return np.array(vals), np.array(grads)


def estimate_mu(curve, alpha, variant, degree, x0=None, igrid=None, cond_limit=1e13):
    """Rayleigh-quotient estimate of a Hardy-Poincare constant for harmonic functions.

    Minimises int |grad v|^2 delta^(2 alpha) / int v^2 over harmonic
    polynomials of degree <= `degree`, subject to v(x0) = 0 (variant
    "point") or zero mean (variant "mean").  Restricting the admissible set
    means the result is an upper bound on the true constant.
    """
    if degree > 12:
        raise ValueError("degree must be at most 12")
    if variant not in ("point", "mean"):
        raise ValueError("variant is 'point' or 'mean'")
    if igrid is None:
        igrid = InteriorGrid(curve, 96, 64)
    center = curve.center
    scale = float(np.abs(BoundaryGrid(curve, 256).x - center).max())
    weight = igrid.weights
    if alpha:
        weight = weight * delta_gamma(curve, igrid.x) ** (2 * alpha)
    k = degree
    while k >= 1:
        vals, grads = harmonic_basis(igrid.x, center, scale, k)
        A = (np.conj(grads) * weight) @ grads.T
        A = A.real
        B = (vals * igrid.weights) @ vals.T
        if variant == "point":
            x0 = center if x0 is None else complex(x0)
            c = harmonic_basis(np.array([x0]), center, scale, k)[0][:, 0]
        else:
            c = vals @ igrid.weights
        Z = scipy.linalg.null_space(c[None, :])
        Bz = Z.T @ B @ Z
        if np.linalg.cond(Bz) < cond_limit:
            lam = scipy.linalg.eigh(Z.T @ A @ Z, Bz, eigvals_only=True)
            return MuEstimate(alpha, variant, float(lam[0]), k)
        warnings.warn(f"ill-conditioned Gram matrix at degree {k}, reducing", RuntimeWarning)
        k -= 1
    raise ValueError("no usable basis")


# family sweeps ------------------------------------------------------------

@dataclass
class FamilySpec:
    """A one-parameter family of curves.

    fourier_disk: r(t) = r0 + eps cos(mode t).
    ellipse: b = 1 - eps, a = 1 / b (area fixed to pi).
    """

    kind: str
    eps: list
    mode: int = 3
    r0: float = 1.0

    def curve(self, eps):
        if self.kind == "fourier_disk":
            return BoundaryCurve.fourier_disk(self.r0, [(self.mode, eps)] if eps else [])
        if self.kind == "ellipse":
            b = 1.0 - eps
            if b <= 0:
                raise CurveError(f"ellipse family needs eps < 1, got {eps}")
            return BoundaryCurve.ellipse(1.0 / b, b)
        raise ValueError(f"unknown family kind {self.kind!r}")

    @classmethod
    def from_dict(cls, d):
        return cls(kind=d["kind"], eps=[float(e) for e in d["eps"]],
                   mode=int(d.get("mode", 3)), r0=float(d.get("r0", 1.0)))

    def to_dict(self):
        return asdict(self)


@dataclass
class StabilityRecord:
    eps: float
    dev_l1: float = math.nan
    dev_l2_unu: float = math.nan
    dev_l2_H: float = math.nan
    rho_gap: float = math.nan
    asym: float = math.nan
    M: float = math.nan
    R: float = math.nan
    r_i: float = math.nan
    r_e: float = math.nan
    d_Omega: float = math.nan
    serrin_lhs: float = math.nan
    z: list = field(default_factory=lambda: [math.nan, math.nan])
    rho_i: float = math.nan
    rho_e: float = math.nan
    rho_gap_at_asym_center: float = math.nan
    convex: bool = True
    error: str = ""

    CSV_COLUMNS = ("eps", "dev_l1", "dev_l2_unu", "dev_l2_H", "rho_gap", "asym", "M", "R",
                   "r_i", "d_Omega", "serrin_lhs")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    @property
    def ok(self):
        return not self.error


def measure(curve, eps, n=256, n_theta=96, n_r=64):
    """One stability record for a single domain."""
    try:
        sol = solve_torsion(curve, n)
        z = sol.z
        geom = summarize(sol.grid, z)
        igrid = InteriorGrid(curve, n_theta, n_r)
        ctx = Context(sol, igrid)
        l1, l2, l2H = deviations(sol)
        ri_x, re_x = rho_in_out(sol.grid, geom.asymmetry_center)
        return StabilityRecord(
            eps=eps, dev_l1=l1, dev_l2_unu=l2, dev_l2_H=l2H,
            rho_gap=geom.rho_e - geom.rho_i, asym=geom.asymmetry, M=sol.M, R=geom.R,
            r_i=geom.r_i, r_e=geom.r_e, d_Omega=geom.diameter,
            serrin_lhs=serrin_identity(ctx, z).lhs, z=[z.real, z.imag],
            rho_i=geom.rho_i, rho_e=geom.rho_e, rho_gap_at_asym_center=re_x - ri_x,
            convex=geom.convex)
    except Exception as exc:  # recorded per member, the sweep goes on
        log.warning("family member eps=%g failed: %s", eps, exc)
        return StabilityRecord(eps=eps, error=f"{type(exc).__name__}: {exc}")


def _measure_member(args):
    family, eps, n, n_theta, n_r = args
    try:
        curve = family.curve(eps)
    except ValueError as exc:
        return StabilityRecord(eps=eps, error=f"{type(exc).__name__}: {exc}")
    return measure(curve, eps, n, n_theta, n_r)


def run_family(family, n=256, n_theta=96, n_r=64, jobs=1):
    """Sweep the family; records come back sorted by eps regardless of scheduling."""
    tasks = [(family, eps, n, n_theta, n_r) for eps in sorted(family.eps)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_measure_member, tasks))
    else:
        records = [_measure_member(t) for t in tasks]
    return sorted(records, key=lambda r: r.eps)


# theorem checks ------------------------------------------------------------

@dataclass
class Verdict:
    check: str
    status: str
    slope: float = math.nan
    threshold: float = math.nan
    ratio_spread: float = math.nan
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def fit_slope(x, y):
    """Least-squares slope of log y against log x."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    return float(np.polyfit(lx, ly, 1)[0])


def _power_check(name, records, dev_attr, exponent, threshold, min_dev=1e-8, max_spread=100.0):
    """Slope of log(rho_e - rho_i) against log(deviation), and the spread of
    (rho_e - rho_i) / deviation^exponent along the family."""
    usable = [r for r in records if r.ok and getattr(r, dev_attr) > min_dev and r.rho_gap > 0]
    dev = np.array([getattr(r, dev_attr) for r in usable])
    gap = np.array([r.rho_gap for r in usable])
    details = {"exponent": exponent, "eps": [r.eps for r in usable]}
    spread = math.nan
    if len(usable) >= 2:
        ratio = gap / dev**exponent
        spread = float(ratio.max() / ratio.min())
        details["ratios"] = ratio.tolist()
    if len(usable) < 4:
        details["reason"] = "fewer than 4 records with nonzero deviation"
        return Verdict(name, INCONCLUSIVE, threshold=threshold, ratio_spread=spread, details=details)
    if np.ptp(np.log(dev)) < 1e-12:
        details["reason"] = "degenerate fit: all deviations equal"
        return Verdict(name, INCONCLUSIVE, threshold=threshold, ratio_spread=spread, details=details)
    slope = fit_slope(dev, gap)
    status = PASS if slope >= threshold and spread < max_spread else FAIL
    return Verdict(name, status, slope=slope, threshold=threshold, ratio_spread=spread,
                   details=details)


def check_serrin_L2(records):
    """rho_e - rho_i <= C ||u_nu - R||_2^(2/(N+2)): slope at least 2/(N+2) - 0.1."""
    e = 2.0 / (N_DIM + 2)
    return _power_check("serrin_L2", records, "dev_l2_unu", e, e - 0.1)


def check_serrin_L1(records):
    """rho_e - rho_i <= C ||u_nu - R||_1^(1/(N+2)): slope at least 1/(N+2) - 0.05."""
    e = 1.0 / (N_DIM + 2)
    return _power_check("serrin_L1", records, "dev_l1", e, e - 0.05)


def check_sbt(records):
    """Lipschitz stability in the plane: rho_e - rho_i <= C ||H0 - H||_2, slope at least 0.9."""
    return _power_check("sbt_lipschitz", records, "dev_l2_H", 1.0, 0.9)


def check_asymmetry_theorems(records, slack=1e-6, max_spread=100.0):
    """(a) A / ||H0 - H||_2 bounded along the family; (b) the explicit bound
    rho_e - rho_i <= 4 R A^(1/N) whenever A <= (r_i / R)^N, as a hard check."""
    usable = [r for r in records if r.ok]
    hard_rows = []
    hard_ok = True
    for r in usable:
        small = r.asym <= (r.r_i / r.R) ** N_DIM
        bound = 4.0 * r.R * r.asym ** (1.0 / N_DIM)
        ok = (not small) or r.rho_gap <= bound + slack
        hard_ok &= ok
        hard_rows.append({"eps": r.eps, "applicable": bool(small), "rho_gap": r.rho_gap,
                          "bound": bound, "holds": bool(ok)})
    hard = Verdict("asymmetry_explicit", PASS if hard_ok else FAIL, details={"rows": hard_rows})
    ratio_rows = [r for r in usable if r.dev_l2_H > 1e-8]
    if len(ratio_rows) < 2:
        ratio = Verdict("asymmetry_ratio", INCONCLUSIVE,
                        details={"reason": "fewer than 2 nondegenerate records"})
    else:
        ratios = np.array([r.asym / r.dev_l2_H for r in ratio_rows])
        spread = float(ratios.max() / ratios.min()) if ratios.min() > 0 else math.inf
        ratio = Verdict("asymmetry_ratio", PASS if spread < max_spread else FAIL,
                        ratio_spread=spread, details={"ratios": ratios.tolist()})
    return hard, ratio


def check_all(records):
    hard, ratio = check_asymmetry_theorems(records)
    return [check_serrin_L2(records), check_serrin_L1(records), check_sbt(records), hard, ratio]


def m_bound(M, d, r_e, convex):
    """Upper bound for max u_nu: (3/2) d for convex domains, (3/2) d (d + r_e) / r_e otherwise."""
    c = 1.5
    if convex or math.isinf(r_e):
        return c * d
    return c * d * (d + r_e) / r_e


def convergence_precheck(family, n=256, tol=1e-8):
    """Gate a sweep: at the largest eps, the deviations at n/2 and n must agree."""
    eps = max(family.eps)
    curve = family.curve(eps)
    coarse = np.array(deviations(solve_torsion(curve, n // 2)))
    fine = np.array(deviations(solve_torsion(curve, n)))
    diff = float(np.max(np.abs(coarse - fine) / np.maximum(np.abs(fine), 1e-12)))
    return {"eps": eps, "n": [n // 2, n], "max_rel_change": diff, "tol": tol,
            "passed": bool(diff < tol)}
