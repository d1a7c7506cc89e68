import numpy as np
import pytest

from conftest import radial_bump_fn, radial_bump_grad
from diffcurve import optimizer as opt
from diffcurve.curves import circle_curve
from diffcurve.fields import AnalyticField, make_analytic


@pytest.fixture(scope="module")
def bump_field():
    return AnalyticField(radial_bump_fn, radial_bump_grad)


@pytest.fixture(scope="module")
def base_state(bump_field, unit_square_component):
    circ = circle_curve((0.45, 0.52), 0.2, 48, id="c1")
    mesh, u, r = opt.solve_forward(unit_square_component, [circ], bump_field, 1 / 64)
    p = opt.solve_adjoint(mesh, u, bump_field)
    return circ, mesh, u, p, r


class TestConfig:
    def test_invalid_alpha(self):
        with pytest.raises(ValueError):
            opt.OptimizerConfig(alpha=-1)

    def test_invalid_epsilon(self):
        with pytest.raises(ValueError):
            opt.OptimizerConfig(epsilon=0)


class TestVelocity:
    def test_constant_field_zero_velocity(self, unit_square_component):
        f = make_analytic("constant")
        circ = circle_curve((0.5, 0.5), 0.2, 32, id="c1")
        mesh, u, _ = opt.solve_forward(unit_square_component, [circ], f, 1 / 32)
        p = opt.solve_adjoint(mesh, u, f)
        b, _ = opt.shape_derivative_density(mesh, u, p, f, circ)
        assert np.abs(b).max() < 1e-8

    def test_adjoint_matches_fd(self, bump_field, unit_square_component):
        circ = circle_curve((0.45, 0.52), 0.2, 40, id="c1")
        rep = opt.validate_shape_derivative(
            bump_field, [circ], unit_square_component, trials=5, seed=3, h_ref=1 / 64
        )
        assert rep["median_rel_error"] < 0.05

    def test_orthogonal_velocity_small_form(self, base_state, bump_field):
        circ, mesh, u, p, _ = base_state
        b, chain = opt.shape_derivative_density(mesh, u, p, bump_field, circ)
        bv = b[chain.orig_idx]
        rng = np.random.default_rng(7)
        raw = rng.standard_normal(len(bv))
        v = raw - (raw @ bv) / (bv @ bv) * bv  # project out B
        lin = opt.boundary_linear_form(mesh, u, p, bump_field, circ, v)
        scale = np.linalg.norm(bv) * np.linalg.norm(v) * circ.length() / len(bv)
        assert abs(lin) < 0.05 * scale

    def test_steepest_descent_negative_slope(self, base_state, bump_field, unit_square_component):
        circ, mesh, u, p, _ = base_state
        b, chain = opt.shape_derivative_density(mesh, u, p, bump_field, circ)
        vn = -b[chain.orig_idx]
        t = 1e-3
        rp = opt._perturbed_residual(bump_field, [circ], [vn], +t, unit_square_component, (), 1 / 64)
        rm = opt._perturbed_residual(bump_field, [circ], [vn], -t, unit_square_component, (), 1 / 64)
        assert (rp - rm) / (2 * t) < 0

    def test_descent_form_negative(self, base_state, bump_field):
        circ, mesh, u, p, _ = base_state
        b, chain = opt.shape_derivative_density(mesh, u, p, bump_field, circ)
        lin = opt.boundary_linear_form(mesh, u, p, bump_field, circ, -b[chain.orig_idx])
        assert lin < -1e-8


class TestCurveOpt:
    def test_monotone_descent_and_convergence(self, bump_field, unit_square_component):
        cfg = opt.OptimizerConfig(h_ref=1 / 48, max_iters=25)
        circ = circle_curve((0.42, 0.55), 0.17, 40, id="c1")
        res = opt.curve_opt([circ], [], bump_field, unit_square_component, cfg)
        rts = [rt for _, rt in res.residual_history]
        assert all(b < a for a, b in zip(rts, rts[1:]))
        assert res.residual_history[-1][0] < 0.6 * res.residual_history[0][0]

    def test_empty_initial(self, bump_field, unit_square_component):
        cfg = opt.OptimizerConfig()
        res = opt.curve_opt([], [], bump_field, unit_square_component, cfg)
        assert res.curves == []

    def test_curvature_flow_shrink(self, unit_square_component):
        # with constant I the only driver is the length term: dr/dt = -alpha/r
        f = make_analytic("constant")
        alpha = 0.01
        cfg = opt.OptimizerConfig(alpha=alpha, h_ref=1 / 32, max_iters=15, epsilon=1e-12)
        circ = circle_curve((0.5, 0.5), 0.3, 48, id="c1")
        res = opt.curve_opt([circ], [], f, unit_square_component, cfg)
        assert res.iterations >= 5
        c = res.curves[0]
        r_final = np.linalg.norm(c.vertices - c.vertices.mean(axis=0), axis=1).mean()
        assert r_final < 0.3  # strictly shrinking
        # circle stays round while shrinking
        radii = np.linalg.norm(c.vertices - c.vertices.mean(axis=0), axis=1)
        assert radii.std() < 0.01

    def test_telemetry_records(self, bump_field, unit_square_component):
        seen = []
        cfg = opt.OptimizerConfig(h_ref=1 / 32, max_iters=3)
        circ = circle_curve((0.45, 0.5), 0.2, 32, id="c1")
        opt.curve_opt([circ], [], bump_field, unit_square_component, cfg, telemetry=seen.append)
        assert seen
        assert {"iter", "R", "R_tilde", "t", "curves", "length"} <= set(seen[0])


class TestValidate:
    def test_rejects_zero_trials(self, bump_field, unit_square_component):
        with pytest.raises(ValueError):
            opt.validate_shape_derivative(bump_field, [], unit_square_component, trials=0)

    def test_deterministic(self, bump_field, unit_square_component):
        circ = circle_curve((0.5, 0.5), 0.15, 24, id="c1")
        a = opt.validate_shape_derivative(
            bump_field, [circ], unit_square_component, trials=2, seed=5, h_ref=1 / 32
        )
        b = opt.validate_shape_derivative(
            bump_field, [circ], unit_square_component, trials=2, seed=5, h_ref=1 / 32
        )
        assert a == b
