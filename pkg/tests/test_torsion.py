import math

import numpy as np
import pytest

from conftest import ELLIPSE_TEST_POINTS, ellipse_grad, ellipse_u
from torsionlab import torsion
from torsionlab.geometry import (
    BoundaryCurve, InteriorGrid, area_perimeter, contains, random_interior_points,
    sphere_condition_radii,
)
from torsionlab.torsion import (
    SolverError, boundary_normal_derivative, choose_a_mean_zero, find_critical_point, h_values,
    solve_torsion,
)

# argmin of |grad u| over a 1000 x 1000 scan of [-0.5, 0.5]^2 (spacing 1e-3)
SKEWED_MODES = [(1, 0.1), (2, 0.05), (3, 0.03)]
SKEWED_Z_SCAN = 0.10260260260260257 - 0.0005005005005004892j


class TestDisk:
    def test_center_value(self, disk_sol):
        assert disk_sol.u([0j])[0] == pytest.approx(-0.5, abs=1e-14)

    def test_normal_derivative(self, disk_sol):
        assert np.abs(boundary_normal_derivative(disk_sol) - 1.0).max() < 1e-10

    def test_fields(self, disk_sol):
        pts = random_interior_points(disk_sol.curve, 200, np.random.default_rng(0))
        f = disk_sol.eval_fields(pts)
        assert np.abs(f.hess_h).max() < 1e-10
        assert np.abs(f.P - 0.5).max() < 1e-12
        assert find_critical_point(disk_sol) == pytest.approx(0, abs=1e-14)


class TestEllipse:
    def test_closed_form_interior(self, ellipse_sol):
        err = np.abs(ellipse_sol.u(ELLIPSE_TEST_POINTS) - ellipse_u(ELLIPSE_TEST_POINTS))
        assert err.max() < 1e-8
        assert ellipse_sol.u([0j])[0] == pytest.approx(-0.8, abs=1e-12)

    def test_closed_form_gradient_on_boundary(self, ellipse_sol):
        g = ellipse_sol.grid
        exact = (np.conj(ellipse_grad(g.x)) * g.normal).real
        assert np.abs(ellipse_sol.unu - exact).max() < 1e-8
        i0 = 0                      # t = 0, the point (2, 0)
        i1 = g.n // 4               # t = pi/2, the point (0, 1)
        assert ellipse_sol.unu[i0] == pytest.approx(0.8, abs=1e-10)
        assert ellipse_sol.unu[i1] == pytest.approx(1.6, abs=1e-10)
        assert ellipse_sol.M == pytest.approx(1.6, abs=1e-10)

    def test_hessian_at_center(self, ellipse_sol):
        f = ellipse_sol.eval_fields([0j])
        assert np.allclose(f.hess_u[0], np.diag([0.4, 1.6]), atol=1e-10)
        assert np.allclose(f.hess_h[0], np.diag([0.6, -0.6]), atol=1e-10)

    def test_near_boundary_upsampling(self, ellipse_sol):
        t = np.linspace(0, 2 * np.pi, 50)
        x = (1 - 1e-4) * (2 * np.cos(t) + 1j * np.sin(t))
        assert np.abs(ellipse_sol.u(x) - ellipse_u(x)).max() < 1e-10
        f = ellipse_sol.eval_fields(x)
        assert np.abs(f.hess_u - np.diag([0.4, 1.6])).max() < 1e-8

    def test_spectral_convergence(self, ellipse):
        errs = []
        for n in (64, 128, 256):
            sol = solve_torsion(ellipse, n)
            errs.append(np.abs(sol.u(ELLIPSE_TEST_POINTS) - ellipse_u(ELLIPSE_TEST_POINTS)).max())
        for prev, nxt in zip(errs, errs[1:]):
            assert nxt <= max(0.5 * prev, 1e-12)

    def test_critical_point(self, ellipse_sol):
        assert ellipse_sol.z == pytest.approx(0, abs=1e-12)

    def test_mean_zero_constant(self, ellipse_sol, ellipse):
        # int |x|^2 = 5 pi / 2 and int u = -0.8 pi on the ellipse
        ig = InteriorGrid(ellipse, 96, 64)
        a = choose_a_mean_zero(ellipse_sol, ig, 0j)
        assert a == pytest.approx((2.5 * math.pi + 1.6 * math.pi) / (2 * math.pi), rel=1e-13)
        # doubled interior resolution agrees
        assert choose_a_mean_zero(ellipse_sol, InteriorGrid(ellipse, 192, 128), 0j) == \
            pytest.approx(a, rel=1e-12)


class TestPerturbed:
    def test_boundary_residual_and_self_consistency(self):
        c = BoundaryCurve.fourier_disk(1.0, [(3, 0.05)])
        sol = solve_torsion(c, 256)
        assert sol.residual < 1e-10 and sol.trace_error < 1e-10
        ref = solve_torsion(c, 1024)
        pts = random_interior_points(c, 100, np.random.default_rng(2))
        assert np.abs(sol.u(pts) - ref.u(pts)).max() < 1e-12
        assert np.abs(sol.unu - ref.unu[::4]).max() < 1e-10

    def test_symmetric_critical_point(self):
        sol = solve_torsion(BoundaryCurve.fourier_disk(1.0, [(2, 0.1)]), 256)
        # the 10^6-point scan oracle lands on the grid point nearest the origin
        assert abs(sol.z) < 1e-3
        assert abs(sol.grad_u([sol.z])[0]) < 1e-12

    def test_skewed_critical_point(self):
        sol = solve_torsion(BoundaryCurve.fourier_disk(1.0, SKEWED_MODES), 256)
        z = sol.z
        assert abs(z - SKEWED_Z_SCAN) < 1.5e-3
        assert abs(sol.grad_u([z])[0]) < 1e-12

    def test_multistart_recovers_from_exterior_start(self, starfish_sol):
        z = find_critical_point(starfish_sol, start=5.0)
        assert contains(starfish_sol.grid, [z])[0]
        assert abs(z) < 1e-10

    def test_hopf_positivity(self, starfish_sol, bumpy_sol):
        for sol in (starfish_sol, bumpy_sol):
            assert sol.unu.min() > 0

    def test_divergence(self, bumpy_sol, starfish_sol):
        for sol in (bumpy_sol, starfish_sol):
            area, _ = area_perimeter(sol.grid)
            assert sol.grid.integrate(sol.unu) == pytest.approx(2 * area, rel=1e-8)

    @pytest.mark.parametrize("name", ["bumpy", "starfish"])
    def test_pointwise_structure(self, name, request):
        sol = request.getfixturevalue(name + "_sol")
        pts = random_interior_points(sol.curve, 1000, np.random.default_rng(4))
        f = sol.eval_fields(pts)
        assert np.abs(f.laplacian_u**2 / 2 - 2).max() < 1e-12
        assert f.newton_deficit.min() >= -1e-9
        assert np.allclose(f.hess_u_sq - 2, f.newton_deficit, atol=1e-9)

    def test_mean_zero_shift_linearity(self, bumpy_sol, bumpy):
        ig = InteriorGrid(bumpy, 48, 32)
        z = bumpy_sol.z
        a = choose_a_mean_zero(bumpy_sol, ig, z)
        u = bumpy_sol.u(ig.x)
        assert abs(ig.integrate(h_values(bumpy_sol, ig.x, z, a, u))) < 1e-12
        a2 = a + 0.3
        shift = ig.integrate(h_values(bumpy_sol, ig.x, z, a2, u))
        assert shift == pytest.approx(-ig.integrate(1.0) * 0.3 / 2, rel=1e-12)


class TestErrors:
    @pytest.mark.parametrize("n", [16, 31, 33])
    def test_bad_node_count(self, disk, n):
        with pytest.raises(ValueError):
            solve_torsion(disk, n)

    def test_condition_guard(self, disk, monkeypatch):
        monkeypatch.setattr(torsion, "COND_LIMIT", 1.0)
        with pytest.raises(SolverError, match="resolution or curve invalid"):
            solve_torsion(disk, 32)


def test_hopf_vs_interior_radius_is_reported_not_asserted(ellipse_sol):
    ri, _ = sphere_condition_radii(ellipse_sol.grid)
    assert ellipse_sol.unu.min() / ri == pytest.approx(1.6, rel=1e-9)
