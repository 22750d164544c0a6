"""Command-line front end: ``verify``, ``converge`` and ``family`` experiments.

Every run is described by a JSON config and writes CSV/JSON into an output
directory.  Exit codes: 0 ok, 1 a check failed, 2 bad config, 3 solver
failure, 4 convergence failure, 5 too many failed family members.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .geometry import (
    N_DIM, BoundaryCurve, BoundaryGrid, CurveError, InteriorGrid, delta_gamma,
    random_interior_points, summarize,
)
from .identities import oscillation_check, pfunction_identity, run_all
from .stability import (
    FAIL, PASS, FamilySpec, StabilityRecord, Verdict, check_all, convergence_precheck,
    estimate_mu, m_bound, run_family,
)
from .torsion import SolverError, choose_a_mean_zero, h_values, solve_torsion

log = logging.getLogger("torsionlab")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CONVERGENCE, EXIT_SWEEP = 0, 1, 2, 3, 4, 5
COMMANDS = ("verify", "converge", "family")
MIN_N, MAX_N = 32, 4096
DEFAULT_TOL = 1e-5
NEGLIGIBLE = 1e-12     # both sides of an identity below this count as zero
CONV_FLOOR = 1e-10
MAX_FAILED_FRACTION = 0.2
POINTWISE_TOL = 1e-9


class ConfigError(ValueError):
    pass


def _power_of_two(n):
    return isinstance(n, int) and not isinstance(n, bool) and n > 0 and n & (n - 1) == 0


def _check_n(n, what="n"):
    if not _power_of_two(n) or not MIN_N <= n <= MAX_N:
        raise ConfigError(f"{what} must be a power of two in [{MIN_N}, {MAX_N}], got {n!r}")
    return n


def _check_interior(n, what):
    if not isinstance(n, int) or isinstance(n, bool) or not 8 <= n <= MAX_N:
        raise ConfigError(f"{what} must be an integer in [8, {MAX_N}], got {n!r}")
    return n


def _check_out(path):
    try:
        out = Path(path)
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except (OSError, ValueError, TypeError) as exc:
        raise ConfigError(f"unusable output path {str(path)!r}: {exc}") from exc
    return out


def _check_curve(curve, n):
    # the grid constructor enforces regularity and star-shapedness
    try:
        BoundaryGrid(curve, n)
    except CurveError as exc:
        raise ConfigError(f"invalid curve {curve.to_dict()}: {exc}") from exc


@dataclass
class ExperimentConfig:
    command: str
    out: Path
    curve: BoundaryCurve | None = None
    family: FamilySpec | None = None
    n: int = 256
    n_theta: int = 96
    n_r: int = 64
    resolutions: list = field(default_factory=list)
    seed: int = 0
    points: int = 1000
    mu_degree: int = 8
    tol: float = DEFAULT_TOL
    jobs: int = 1

    @classmethod
    def from_dict(cls, d, command, out=None, tol=None, jobs=None):
        """Validate a raw config mapping; every problem becomes a ConfigError."""
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        if command not in COMMANDS:
            raise ConfigError(f"unknown command {command!r}")
        if d.get("command", command) != command:
            raise ConfigError(f"config is for {d['command']!r}, not {command!r}")
        known = {"command", "curve", "family", "n", "n_theta", "n_r", "resolutions", "seed",
                 "points", "mu_degree", "tol", "jobs", "out"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        out = out if out is not None else d.get("out")
        if out is None:
            raise ConfigError("no output directory (config 'out' or --out)")
        tol = tol if tol is not None else d.get("tol", DEFAULT_TOL)
        jobs = jobs if jobs is not None else d.get("jobs", 1)
        if not isinstance(tol, (int, float)) or isinstance(tol, bool) or not tol > 0:
            raise ConfigError(f"tol must be a positive number, got {tol!r}")
        if not isinstance(jobs, int) or isinstance(jobs, bool) or jobs < 1:
            raise ConfigError(f"jobs must be a positive integer, got {jobs!r}")
        cfg = cls(command=command, out=Path(out), tol=float(tol), jobs=jobs)
        cfg.n = _check_n(d.get("n", 256))
        cfg.n_theta = _check_interior(d.get("n_theta", 96), "n_theta")
        cfg.n_r = _check_interior(d.get("n_r", 64), "n_r")
        seed = d.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")
        cfg.seed = seed
        points = d.get("points", 1000)
        if not isinstance(points, int) or isinstance(points, bool) or points < 1:
            raise ConfigError(f"points must be a positive integer, got {points!r}")
        cfg.points = points
        deg = d.get("mu_degree", 8)
        if not isinstance(deg, int) or isinstance(deg, bool) or not 1 <= deg <= 12:
            raise ConfigError(f"mu_degree must be an integer in [1, 12], got {deg!r}")
        cfg.mu_degree = deg

        if command in ("verify", "converge"):
            if "curve" not in d:
                raise ConfigError("missing 'curve'")
            try:
                cfg.curve = BoundaryCurve.from_dict(d["curve"])
            except CurveError as exc:
                raise ConfigError(str(exc)) from exc
            _check_curve(cfg.curve, cfg.n)
        if command == "converge":
            res = d.get("resolutions")
            if not isinstance(res, list) or len(res) < 3:
                raise ConfigError("converge needs a list of at least 3 resolutions")
            for r in res:
                _check_n(r, "resolution")
            if res != sorted(set(res)):
                raise ConfigError("resolutions must be strictly increasing")
            cfg.resolutions = list(res)
        if command == "family":
            fam = d.get("family")
            if not isinstance(fam, dict):
                raise ConfigError("missing 'family'")
            try:
                cfg.family = FamilySpec.from_dict(fam)
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"malformed family: {exc}") from exc
            eps = cfg.family.eps
            if not eps:
                raise ConfigError("empty eps list")
            if eps != sorted(eps):
                raise ConfigError("eps list must be sorted ascending")
            if cfg.family.kind not in ("fourier_disk", "ellipse"):
                raise ConfigError(f"unknown family kind {cfg.family.kind!r}")
            for e in eps:
                try:
                    curve = cfg.family.curve(e)
                except CurveError as exc:
                    raise ConfigError(f"family member eps={e!r} rejected: {exc}") from exc
                _check_curve(curve, cfg.n)
        cfg.out = _check_out(cfg.out)
        return cfg


def load_config(path, command, **overrides):
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return ExperimentConfig.from_dict(raw, command, **overrides)


# output helpers ----------------------------------------------------------

SCHEMAS = {"verify": "verify_report.schema.json", "converge": "convergence.schema.json",
           "family": "family_verdicts.schema.json"}


def load_schema(command):
    """The published JSON schema for a command's JSON output."""
    text = resources.files("torsionlab").joinpath("schemas", SCHEMAS[command]).read_text("utf-8")
    return json.loads(text)


def clean(obj):
    """JSON-ready copy: numpy scalars unwrapped, complex as [re, im], non-finite as null."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [clean(obj.real), clean(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        return obj if math.isfinite(obj) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path, obj):
    text = json.dumps(clean(obj), sort_keys=True, indent=2, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if math.isfinite(v) else ""
    return str(v)


def write_csv(path, columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row[c]) for c in columns])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def effective_residual(rep):
    """Relative residual, or the absolute one when both sides are negligible."""
    if max(abs(rep.lhs), abs(rep.rhs)) < NEGLIGIBLE:
        return rep.abs_residual
    return rep.rel_residual


# verify ------------------------------------------------------------------

def verify_domain(cfg):
    """All identity, conservation, pointwise and bound checks on one domain."""
    curve = cfg.curve
    sol = solve_torsion(curve, cfg.n)
    z = sol.z
    igrid = InteriorGrid(curve, cfg.n_theta, cfg.n_r)
    geom = summarize(sol.grid, z)
    mu_half = estimate_mu(curve, 0.5, "point", cfg.mu_degree, x0=z, igrid=igrid)
    mu_bar_half = estimate_mu(curve, 0.5, "mean", cfg.mu_degree, igrid=igrid)
    ctx, reports = run_all(sol, igrid, geom=geom, mu_half=mu_half.value)

    rng = np.random.default_rng(cfg.seed)
    pts = random_interior_points(curve, cfg.points, rng)
    reports.append(pfunction_identity(sol, pts))

    f = sol.eval_fields(pts)
    delta = delta_gamma(curve, pts)
    neg_u = -f.u
    newton_margin = f.newton_deficit            # |D^2u|^2 - N, since Delta u = N
    quad_margin = neg_u - 0.5 * delta**2
    lin_margin = neg_u - 0.5 * geom.r_i * delta
    lap_err = np.abs(f.laplacian_u**2 / N_DIM - N_DIM)
    pointwise = {
        "points": cfg.points, "seed": cfg.seed,
        "laplacian_sq_over_N_max_error": float(lap_err.max()),
        "newton_min_margin": float(newton_margin.min()),
        "newton_violations": int(np.sum(newton_margin < -POINTWISE_TOL)),
        "barrier_quadratic_min_margin": float(quad_margin.min()),
        "barrier_quadratic_violations": int(np.sum(quad_margin < -POINTWISE_TOL)),
        "barrier_linear_min_margin": float(lin_margin.min()),
        "barrier_linear_violations": int(np.sum(lin_margin < -POINTWISE_TOL)),
        "tolerance": POINTWISE_TOL,
    }

    a_mean = choose_a_mean_zero(sol, igrid, z)
    h_mean = igrid.integrate(h_values(sol, igrid.x, z, a_mean, u=ctx.fields.u)) / ctx.area
    oscillation = []
    for a in (0.0, a_mean):
        osc, rho_form = oscillation_check(sol, z, a)
        oscillation.append({"a": a, "h_oscillation": osc, "rho_formula": rho_form,
                            "rel_residual": abs(osc - rho_form) / max(abs(rho_form), 1e-14),
                            "abs_residual": abs(osc - rho_form)})

    M = sol.M
    bound = m_bound(M, geom.diameter, geom.r_e, geom.convex)
    unu_min = float(sol.unu.min())
    bounds = {"M": M, "M_bound": bound, "M_holds": bool(M <= bound), "convex": geom.convex,
              "unu_min": unu_min, "unu_min_over_r_i": unu_min / geom.r_i,
              "hopf_positive": bool(unu_min > 0)}

    failures = []
    for rep in reports:
        if rep.kind != "equality":
            continue
        rep.cross_check["effective_residual"] = effective_residual(rep)
        if rep.status != "ok" or effective_residual(rep) >= cfg.tol:
            failures.append(rep.identity)
        if rep.identity == "pfunction" and not rep.cross_check["subharmonic"]:
            failures.append("pfunction_subharmonic")
    for o in oscillation:
        if o["rel_residual"] >= cfg.tol and o["abs_residual"] >= NEGLIGIBLE:
            failures.append("oscillation")
    if any(pointwise[k] for k in ("newton_violations", "barrier_quadratic_violations",
                                  "barrier_linear_violations")):
        failures.append("pointwise")
    if not (bounds["M_holds"] and bounds["hopf_positive"]):
        failures.append("bounds")

    return {
        "command": "verify",
        "curve": curve.to_dict(),
        "resolution": {"n": cfg.n, "n_theta": cfg.n_theta, "n_r": cfg.n_r},
        "tol": cfg.tol,
        "solver": {"bie_residual": sol.residual, "boundary_u_max": sol.trace_error,
                   "z": z, "grad_u_at_z": float(abs(sol.grad_u([z])[0]))},
        "geometry": geom.to_dict(),
        "mu": {"mu_half_point": mu_half.value, "mu_half_mean": mu_bar_half.value,
               "degree": mu_half.degree, "upper_bound_estimates": True},
        "identities": [r.to_dict() for r in reports],
        "conservation": {r.identity: r.rel_residual for r in reports
                         if r.identity in ("divergence", "minkowski")},
        "a_mean_zero": a_mean, "h_mean_at_a_mean_zero": h_mean,
        "oscillation": oscillation,
        "pointwise": pointwise,
        "bounds": bounds,
        "failures": sorted(set(failures)),
        "passed": not failures,
    }


def cmd_verify(cfg):
    report = verify_domain(cfg)
    write_json(cfg.out / "verify_report.json", report)
    for rep in report["identities"]:
        res = rep["cross_check"].get("effective_residual", rep["rel_residual"])
        print(f"{rep['identity']:<18} lhs={rep['lhs']:+.6e} rhs={rep['rhs']:+.6e} "
              f"residual={res:.2e} {rep['status']}")
    print("PASS" if report["passed"] else f"FAIL: {', '.join(report['failures'])}")
    return EXIT_OK if report["passed"] else EXIT_CHECK


# converge ----------------------------------------------------------------

CONVERGE_IDENTITIES = ("serrin", "sbt", "pohozaev", "divergence", "minkowski", "hessian_norm")
CONVERGE_COLUMNS = ("n", "n_theta", "n_r", "bie_residual") + CONVERGE_IDENTITIES


def convergence_table(cfg):
    rows = []
    top = cfg.resolutions[-1]
    for n in cfg.resolutions:
        # the interior grid is refined together with the boundary
        n_theta = max(8, cfg.n_theta * n // top)
        n_r = max(8, cfg.n_r * n // top)
        sol = solve_torsion(cfg.curve, n)
        igrid = InteriorGrid(cfg.curve, n_theta, n_r)
        _, reports = run_all(sol, igrid, z_choices=[sol.z])
        row = {"n": n, "n_theta": n_theta, "n_r": n_r, "bie_residual": sol.residual}
        for rep in reports:
            row[rep.identity] = effective_residual(rep)
        rows.append(row)
    return rows


def convergence_failures(rows, columns=CONVERGE_IDENTITIES, floor=CONV_FLOOR):
    """Each residual must at least halve per refinement until it reaches the floor."""
    bad = []
    for c in columns:
        for prev, nxt in zip(rows, rows[1:]):
            if nxt[c] > max(prev[c] / 2.0, floor):
                bad.append({"column": c, "n": nxt["n"], "previous": prev[c], "value": nxt[c]})
    return bad


def cmd_converge(cfg):
    rows = convergence_table(cfg)
    write_csv(cfg.out / "convergence.csv", CONVERGE_COLUMNS, rows)
    bad = convergence_failures(rows)
    write_json(cfg.out / "convergence.json",
               {"command": "converge", "curve": cfg.curve.to_dict(), "columns": CONVERGE_COLUMNS,
                "floor": CONV_FLOOR, "rows": rows, "failures": bad, "passed": not bad})
    for row in rows:
        print("  ".join(f"{c}={_cell(row[c])}" for c in CONVERGE_COLUMNS))
    print("PASS" if not bad else f"FAIL: {len(bad)} non-monotone steps")
    return EXIT_OK if not bad else EXIT_CONVERGENCE


# family ------------------------------------------------------------------

def m_bound_verdict(records):
    rows, ok = [], True
    for r in records:
        if not r.ok:
            continue
        bound = m_bound(r.M, r.d_Omega, r.r_e, r.convex)
        holds = r.M <= bound
        ok &= holds
        rows.append({"eps": r.eps, "M": r.M, "bound": bound, "convex": r.convex,
                     "holds": bool(holds)})
    return Verdict("m_bound", PASS if ok else FAIL, details={"rows": rows})


HARD_CHECKS = ("asymmetry_explicit", "m_bound")


def family_outputs(cfg):
    pre = convergence_precheck(cfg.family, cfg.n)
    if not pre["passed"]:
        return pre, None, None
    records = run_family(cfg.family, cfg.n, cfg.n_theta, cfg.n_r, jobs=cfg.jobs)
    verdicts = check_all(records) + [m_bound_verdict(records)]
    return pre, records, verdicts


def cmd_family(cfg):
    pre, records, verdicts = family_outputs(cfg)
    if records is None:
        write_json(cfg.out / "verdicts.json", {"command": "family", "family": cfg.family.to_dict(),
                                                "precheck": pre, "passed": False})
        print(f"FAIL: convergence pre-check at eps={pre['eps']} "
              f"(relative change {pre['max_rel_change']:.2e})")
        return EXIT_CONVERGENCE
    cols = StabilityRecord.CSV_COLUMNS
    write_csv(cfg.out / "family.csv", cols, [r.to_dict() for r in records])
    failed = [{"eps": r.eps, "error": r.error} for r in records if not r.ok]
    too_many = len(failed) > MAX_FAILED_FRACTION * len(records)
    hard_ok = all(v.status == PASS for v in verdicts if v.check in HARD_CHECKS)
    no_fail = all(v.status != FAIL for v in verdicts)
    passed = hard_ok and no_fail and not too_many
    write_json(cfg.out / "verdicts.json", {
        "command": "family", "family": cfg.family.to_dict(),
        "resolution": {"n": cfg.n, "n_theta": cfg.n_theta, "n_r": cfg.n_r},
        "precheck": pre, "columns": cols,
        "records": [r.to_dict() for r in records],
        "verdicts": [v.to_dict() for v in verdicts],
        "failed_members": failed, "passed": passed})
    for v in verdicts:
        extra = f" slope={v.slope:.3f}" if math.isfinite(v.slope) else ""
        print(f"{v.check:<20} {v.status}{extra}")
    if too_many:
        print(f"FAIL: {len(failed)} of {len(records)} members failed")
        return EXIT_SWEEP
    print("PASS" if passed else "FAIL")
    return EXIT_OK if passed else EXIT_CHECK


HANDLERS = {"verify": cmd_verify, "converge": cmd_converge, "family": cmd_family}


def build_parser():
    p = argparse.ArgumentParser(prog="torsionlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="JSON experiment config")
        s.add_argument("--out", help="output directory (overrides the config)")
        s.add_argument("--tol", type=float, help=f"residual tolerance (default {DEFAULT_TOL})")
        s.add_argument("--jobs", type=int, help="parallel family members")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, which matches the config class
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.command, out=args.out, tol=args.tol, jobs=args.jobs)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return HANDLERS[args.command](cfg)
    except (SolverError, np.linalg.LinAlgError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
