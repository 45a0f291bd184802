import json
import math

import numpy as np
import pytest

import oracles
from soliton_lab import domains as D
from soliton_lab import verify as V
from soliton_lab.mesh import DensityFrame, PlanarBoundary, TriMesh
from soliton_lab.rotational import rotational_to_mesh, solve_rotational
from soliton_lab.shapes import flat_disk, hemisphere, icosphere, spherical_cap, torus
from soliton_lab.solver import GraphSolution, domain_cap_mesh, solution_to_mesh, solve_graph


def circle(R=1.0, n=2048):
    t = np.linspace(0, 2 * np.pi, n, endpoint=False)
    return np.column_stack([R * np.cos(t), R * np.sin(t)])


def boundary_of(mesh):
    pts = mesh.vertices[list(mesh.boundary_loops[0])]
    return PlanarBoundary.horizontal([pts[:, :2]], z=float(pts[0, 2]))


@pytest.fixture(scope="module")
def ellipse_bowl():
    return solve_graph(D.ellipse_domain(1.0, 0.5, 0.04), 0.0)


@pytest.fixture(scope="module")
def asym():
    dom = D.disk_domain(1.0, 0.05, boundary_height=D.fourier_boundary(sin=[1.0, 0.3]))
    return solve_graph(dom, 0.0)


class TestClosed:
    def test_icosphere(self):
        e = V.check_closed_infeasibility(icosphere(4))
        assert e.passed and e.lhs <= 1e-10
        assert e.rhs == pytest.approx(oracles.sphere_normal_square(), rel=0.01)

    def test_torus(self):
        e = V.check_closed_infeasibility(torus(2.0, 0.5, 96, 32))
        assert e.passed
        assert e.rhs == pytest.approx(oracles.torus_normal_square(2.0, 0.5), rel=0.01)

    def test_open_mesh_rejected(self):
        with pytest.raises(V.ContractError):
            V.check_closed_infeasibility(hemisphere(8))


class TestLambdaBound:
    def test_unit_circle(self):
        b = PlanarBoundary.horizontal([circle()])
        assert V.check_lambda_bound(b, 0.5).passed
        assert V.check_lambda_bound(b, -0.99).passed
        e = V.check_lambda_bound(b, 1.5)
        assert not e.passed and e.rhs == pytest.approx(1.0, rel=1e-5)

    def test_large_circle(self):
        e = V.check_lambda_bound(PlanarBoundary.horizontal([circle(4.0)]), 0.3)
        assert not e.passed and e.rhs == pytest.approx(0.25, rel=1e-5)


def test_dome_side_solution_beyond_the_bound(disk05):
    # |lambda| <= 1 is violated by a smooth dome spanning the unit circle at lambda = -1.2:
    # the adaptive radial integration reaches r = 1 and the graph solver agrees with it
    sol = solve_graph(disk05, -1.2)
    assert sol.converged and sol.stats.residual_norm < 1e-10
    ref = -oracles.radial_profile(-1.2)[0]
    assert sol.u.max() == pytest.approx(ref, rel=2e-3)
    (entry,) = [e for e in V.run_graph_checks(sol, axes=1).entries if e.check == "lambda_bound"]
    assert not entry.passed and not entry.certificate
    # the signed single-component form 2 lambda area(D) <= L still holds
    spec = V.MultiBoundarySpec.from_mesh(solution_to_mesh(sol))
    assert V.check_multi_boundary(spec, sol.lam).passed


class TestMultiBoundary:
    def spec(self, signs, areas, lengths):
        return V.MultiBoundarySpec(tuple([(0, 0, 1)] * len(signs)), tuple(signs), tuple(areas), tuple(lengths))

    def test_single_component_is_tight(self):
        e = V.check_multi_boundary(self.spec([1], [math.pi], [2 * math.pi]), 1.0)
        assert e.passed and e.lhs == pytest.approx(e.rhs)

    def test_annulus(self):
        s = self.spec([1, 1], [math.pi, 4 * math.pi], [2 * math.pi, 4 * math.pi])
        assert V.check_multi_boundary(s, 0.0).passed
        e = V.check_multi_boundary(s, 2.0)
        assert not e.passed and e.lhs == pytest.approx(20 * math.pi) and e.rhs == pytest.approx(6 * math.pi)

    def test_component_validation(self):
        with pytest.raises(ValueError):
            self.spec([2], [1.0], [1.0])
        with pytest.raises(ValueError):
            self.spec([1], [-1.0], [1.0])
        with pytest.raises(ValueError):
            V.MultiBoundarySpec(((0, 0, 1),), (1, -1), (1.0,), (1.0,))

    def test_signs_from_annulus_solution(self):
        sol = solve_graph(D.annulus_domain(1.0, 2.0, 0.1), 0.2)
        spec = V.MultiBoundarySpec.from_mesh(solution_to_mesh(sol))
        by_area = sorted(zip(spec.areas, spec.signs))
        assert [s for _, s in by_area] == [-1, 1]
        assert by_area[0][0] == pytest.approx(math.pi, rel=1e-2)
        assert by_area[1][0] == pytest.approx(4 * math.pi, rel=1e-2)
        # with induced signs the annulus gives 2 lambda (4 pi - pi) <= 6 pi, i.e. lambda <= 1
        assert V.check_multi_boundary(spec, 0.9).passed
        assert not V.check_multi_boundary(spec, 1.1).passed


class TestOneSided:
    def test_planar(self, disk05):
        assert V.check_one_sided(solve_graph(disk05, -0.5)).passed

    def test_below(self, bowl05):
        e = V.check_one_sided(bowl05)
        assert e.passed and e.lhs < 0

    def test_above(self, disk05):
        e = V.check_one_sided(solve_graph(disk05, -0.8))
        assert e.passed and e.rhs > 0

    def test_nonzero_data_rejected(self, asym):
        with pytest.raises(V.ContractError):
            V.check_one_sided(asym)

    def test_wrong_side_fails(self, bowl05):
        flipped = GraphSolution(bowl05.domain, -bowl05.u, 0.0, bowl05.stats, True)
        assert not V.check_one_sided(flipped).passed


class TestAreaEstimate:
    def test_planar(self, disk05):
        glob, sl = V.check_area_estimate(solve_graph(disk05, -0.5))
        assert glob.passed and glob.lhs == 0.0 and glob.rhs == 0.0
        assert not sl.applicable

    @pytest.mark.parametrize("lam", [0.0, 0.2])
    def test_strict(self, disk05, lam):
        glob, sl = V.check_area_estimate(solve_graph(disk05, lam))
        assert glob.passed and glob.lhs < glob.rhs
        assert sl.passed

    def test_nonconverged_rejected(self, disk05):
        with pytest.raises(V.ContractError):
            V.check_area_estimate(solve_graph(disk05, 1.5))

    def test_translator_strict(self, bowl05):
        glob, _ = V.check_area_estimate(bowl05)
        assert glob.lhs < solution_to_mesh(bowl05).area

    def test_dome_side_exceeds_one_plus_two_lambda_factor(self, disk05):
        # below lambda = -1/2 the measured ratio 4 pi h / (|1 + 2 lambda| A) exceeds 1
        # (radial ODE gives 1.035 at lambda = -1); the 2|lambda| A form holds with room
        sol = solve_graph(disk05, -1.0)
        glob, _ = V.check_area_estimate(sol)
        assert glob.lhs / glob.rhs == pytest.approx(1.035, abs=2e-3)
        assert not glob.passed
        assert glob.lhs <= 2.0 * 1.0 * solution_to_mesh(sol).area


class TestReflection:
    def test_disk_eight_axes(self, bowl05):
        for k in range(8):
            a = math.pi * k / 8
            e = V.check_reflection_symmetry(bowl05, (math.cos(a), math.sin(a)))
            assert e.applicable and e.passed

    def test_ellipse_principal_axes(self, ellipse_bowl):
        for n in ((1, 0), (0, 1)):
            assert V.check_reflection_symmetry(ellipse_bowl, n).passed
        diag = V.check_reflection_symmetry(ellipse_bowl, (1, 1))
        assert not diag.applicable

    def test_asymmetric_data_negative_control(self, asym):
        e = V.check_reflection_symmetry(asym, (0, 1))
        assert not e.passed and not e.applicable

    def test_perturbed_solution_fails(self, bowl05):
        u = bowl05.u.copy()
        x = bowl05.domain.points[:, 0]
        u[bowl05.domain.interior] += 0.01 * x[bowl05.domain.interior]
        bad = GraphSolution(bowl05.domain, u, 0.0, bowl05.stats, True)
        e = V.check_reflection_symmetry(bad, (1, 0))
        assert e.applicable and not e.passed


class TestGraphProperty:
    def test_lifted_solution(self, bowl05):
        assert V.check_graph_property(solution_to_mesh(bowl05), bowl05.domain.planar_boundary()).passed

    def test_hemisphere(self):
        m = hemisphere(32)
        assert V.check_graph_property(m, boundary_of(m)).passed

    def test_cap_past_equator(self):
        m = spherical_cap(2 * math.pi / 3, 32)
        e = V.check_graph_property(m, boundary_of(m))
        assert not e.passed


class TestContactAngle:
    def test_planar(self, disk05):
        ang, e = V.measure_contact_angle(solve_graph(disk05, -0.5))
        np.testing.assert_array_equal(ang, 0.0)
        assert e.passed

    def test_bowl_angle_is_constant_and_matches_profile(self, bowl05):
        ang, e = V.measure_contact_angle(bowl05)
        assert e.passed
        slope = oracles.radial_profile(0.0)[1]
        assert np.mean(ang) == pytest.approx(-math.atan(slope), abs=0.02)

    def test_asymmetric_negative_control(self, asym):
        _, e = V.measure_contact_angle(asym)
        assert not e.passed


class TestFluxBalance:
    def test_flat_disk(self):
        m = flat_disk(1.0, 16)
        a, b = V.check_flux_balance(m, m.flipped(), DensityFrame(lam=-0.5))
        assert a.lhs == pytest.approx(0.0, abs=1e-12)
        assert b.lhs == pytest.approx(0.0, abs=1e-12) and b.passed
        assert b.rhs == pytest.approx(-m.area + m.area, abs=1e-12)

    def test_rotational_soliton(self):
        m = rotational_to_mesh(solve_rotational(0.0, 1.0, 1e-4).rebased(), 192)
        for e in V.check_flux_balance(m, V.planar_cap(m), DensityFrame(lam=0.0)):
            assert e.passed

    def test_graph_solution(self, bowl05):
        m = solution_to_mesh(bowl05)
        assert all(e.passed for e in V.check_flux_balance(m, domain_cap_mesh(bowl05.domain), DensityFrame()))

    def test_hemisphere_negative_control(self):
        m = hemisphere(48)
        cap = V.planar_cap(m)
        for k in range(-20, 21):
            lam = k / 10
            a, b = V.check_flux_balance(m, cap, DensityFrame(lam=lam))
            assert a.passed
            assert not b.passed
            assert abs(b.lhs - b.rhs) == pytest.approx(oracles.hemisphere_height_identity_residual(lam), abs=0.02)

    def test_boundary_mismatch(self):
        m = hemisphere(16)
        with pytest.raises(V.ContractError):
            V.check_flux_balance(m, flat_disk(2.0, 8).flipped(), DensityFrame())
        with pytest.raises(V.ContractError):
            V.check_flux_balance(m, V.planar_cap(m).flipped(), DensityFrame())


class TestReport:
    def test_json_fields_and_order(self, bowl05):
        rep = V.run_graph_checks(bowl05)
        data = json.loads(rep.to_json())
        assert {"check", "lhs", "rhs", "tol", "pass", "anchor", "inputs"} <= set(data[0])
        keys = [(d["check"], d["inputs"]) for d in data]
        assert keys == sorted(keys)
        assert all(d["anchor"] for d in data)
        assert rep.all_passed

    def test_reports_are_reproducible(self, bowl05):
        rev = V.VerificationReport(list(reversed(V.run_graph_checks(bowl05).entries)))
        assert rev.to_json() == V.run_graph_checks(bowl05).to_json()

    def test_certificate_does_not_fail_the_run(self, disk05):
        rep = V.run_graph_checks(solve_graph(disk05, 1.5))
        (e,) = [e for e in rep.entries if e.check == "lambda_bound"]
        assert not e.passed and e.certificate
        assert rep.all_passed

    def test_converged_past_bound_would_fail(self, bowl05):
        fake = GraphSolution(bowl05.domain, bowl05.u, 1.5, bowl05.stats, True)
        entry = [e for e in V.run_graph_checks(fake, axes=1).entries if e.check == "lambda_bound"][0]
        assert not entry.certificate and not entry.passed
