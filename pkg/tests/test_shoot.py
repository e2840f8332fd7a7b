"""Symmetry residuals, desingularization, and the Newton corrector."""
import math

import numpy as np
import pytest

from ringorbits.integrate import IntegratorConfig, eval_at, flow
from ringorbits.model import make_reduced_rhs, reduced_initial
from ringorbits.shoot import (
    ConvergenceError,
    SeedPoint,
    SymmetryKind,
    desing_eval,
    newton_correct,
    newton_correct_full,
    residual,
    residual_desing,
)


class TestSymmetryKind:
    @pytest.mark.parametrize(
        "text,kind",
        [
            ("odd", SymmetryKind.ODD),
            ("ODD", SymmetryKind.ODD),
            ("odd_even", SymmetryKind.ODD_EVEN),
            ("odd-even", SymmetryKind.ODD_EVEN),
            ("odd/even", SymmetryKind.ODD_EVEN),
            ("  Odd-Even ", SymmetryKind.ODD_EVEN),
        ],
    )
    def test_parse(self, text, kind):
        assert SymmetryKind.parse(text) is kind

    def test_parse_rejects_unknown(self):
        with pytest.raises(ValueError):
            SymmetryKind.parse("even")

    def test_period_multiples(self):
        assert SymmetryKind.ODD.period_multiple == 2
        assert SymmetryKind.ODD_EVEN.period_multiple == 4


class TestSeedPoint:
    def test_validation(self):
        with pytest.raises(ValueError):
            SeedPoint(a=-1.0, b=0.0, T=1.0)
        with pytest.raises(ValueError):
            SeedPoint(a=1.0, b=0.0, T=0.0)

    def test_negative_b_allowed(self):
        SeedPoint(a=1.0, b=-0.3, T=1.0)

    def test_period(self):
        assert SeedPoint(a=1.0, b=0.0, T=3.0).period == 6.0
        assert SeedPoint(a=1.0, b=0.0, T=3.0, kind=SymmetryKind.ODD_EVEN).period == 12.0

    def test_json_roundtrip_exact(self):
        p = SeedPoint(a=0.8892815, b=0.05, T=28.708, residual=3.2e-7, theta=2.3232)
        q = SeedPoint.from_json(p.to_json())
        assert q == p

    def test_json_roundtrip_with_nan_fields(self):
        p = SeedPoint(a=1.5, b=0.2, T=4.0, kind=SymmetryKind.ODD_EVEN)
        q = SeedPoint.from_json(p.to_json())
        assert (q.a, q.b, q.T, q.kind) == (p.a, p.b, p.T, p.kind)
        assert math.isnan(q.residual) and math.isnan(q.theta)

    def test_kind_default_on_load(self):
        assert SeedPoint.from_json('{"a": 1.0, "b": 0.0, "T": 2.0}').kind is SymmetryKind.ODD


class TestResidual:
    def test_circular_point_vanishes(self, params_p, cfg):
        pt = SeedPoint(a=params_p.a0, b=0.0, T=params_p.T0)
        first, rt = residual(pt, params_p, cfg)
        assert first == 0.0  # the axial component never leaves zero
        assert abs(rt) < 1e-12

    def test_circular_point_vanishes_for_any_time(self, params_p, cfg):
        pt = SeedPoint(a=params_p.a0, b=0.0, T=0.37 * params_p.T0)
        first, rt = residual(pt, params_p, cfg)
        assert first == 0.0
        assert abs(rt) < 1e-12

    def test_printed_reference_points_are_near_solutions(self, params_p, params_q, cfg):
        f1, r1 = residual(SeedPoint(a=0.8892815, b=0.05, T=28.708), params_p, cfg)
        assert max(abs(f1), abs(r1)) < 1e-5
        f2, r2 = residual(SeedPoint(a=1.84153, b=3.79392, T=7.31715), params_q, cfg)
        assert max(abs(f2), abs(r2)) < 5e-4

    def test_odd_even_uses_axial_velocity(self, params_p, cfg):
        pt = SeedPoint(a=params_p.a0, b=0.3, T=4.0, kind=SymmetryKind.ODD_EVEN)
        first, _ = residual(pt, params_p, cfg)
        e = eval_at(pt.a, pt.b, pt.T, params_p, cfg)
        assert first == e.Ft


class TestDesing:
    def test_smooth_across_zero(self, params_p, cfg):
        at_zero = desing_eval(params_p.a0, 0.0, params_p.T0, SymmetryKind.ODD, params_p, cfg)
        nearby = desing_eval(params_p.a0, 1e-8, params_p.T0, SymmetryKind.ODD, params_p, cfg)
        assert abs(at_zero.value - nearby.value) < 1e-6
        assert abs(at_zero.rt - nearby.rt) < 1e-6

    @pytest.mark.parametrize("kind", [SymmetryKind.ODD, SymmetryKind.ODD_EVEN])
    def test_value_times_b_recovers_raw_residual(self, params_p, cfg, kind):
        a, b, T = 0.95 * params_p.a0, 0.4, 10.0
        d = desing_eval(a, b, T, kind, params_p, cfg)
        pt = SeedPoint(a=a, b=b, T=T, kind=kind)
        raw_first, raw_rt = residual(pt, params_p, cfg)
        assert abs(d.value * b - raw_first) <= 1e-12 * max(abs(raw_first), 1e-30)
        assert d.rt == raw_rt

    def test_even_in_b(self, params_p, cfg):
        a, T = 0.93 * params_p.a0, 8.0
        for b in (0.1, 0.7):
            plus = desing_eval(a, b, T, SymmetryKind.ODD, params_p, cfg)
            minus = desing_eval(a, -b, T, SymmetryKind.ODD, params_p, cfg)
            assert abs(plus.value - minus.value) < 1e-9
            assert abs(plus.rt - minus.rt) < 1e-9

    def test_gradients_match_finite_differences(self, params_p, cfg):
        a, b, T = 0.95 * params_p.a0, 0.4, 10.0
        d = desing_eval(a, b, T, SymmetryKind.ODD, params_p, cfg, grad=True)
        step = 1e-6

        def val(aa, bb, tt):
            dd = desing_eval(aa, bb, tt, SymmetryKind.ODD, params_p, cfg)
            return np.array([dd.value, dd.rt])

        for i, (lo, hi) in enumerate(
            [
                (val(a - step, b, T), val(a + step, b, T)),
                (val(a, b - step, T), val(a, b + step, T)),
                (val(a, b, T - step), val(a, b, T + step)),
            ]
        ):
            fd = (hi - lo) / (2.0 * step)
            assert abs(fd[0] - d.grad_value[i]) < 1e-4 * max(1.0, abs(fd[0]))
            assert abs(fd[1] - d.grad_rt[i]) < 1e-4 * max(1.0, abs(fd[1]))

    def test_gradients_none_unless_requested(self, params_p, cfg):
        d = desing_eval(params_p.a0, 0.1, 5.0, SymmetryKind.ODD, params_p, cfg)
        assert d.grad_value is None and d.grad_rt is None

    def test_residual_desing_wrapper(self, params_p, cfg):
        pt = SeedPoint(a=0.9 * params_p.a0, b=0.25, T=9.0)
        v, rt = residual_desing(pt, params_p, cfg)
        d = desing_eval(pt.a, pt.b, pt.T, pt.kind, params_p, cfg)
        assert (v, rt) == (d.value, d.rt)


class TestNewton:
    def test_fixed_b_correction_from_family_seed(self, p1_corrected):
        # validated against the printed member at b = 0.05
        assert abs(p1_corrected.a - 0.8892815) < 1e-6
        assert abs(p1_corrected.T - 28.708) < 1e-3
        assert p1_corrected.b == 0.05  # fixed-b mode never moves b
        assert p1_corrected.residual < 1e-12
        assert abs(p1_corrected.theta - 2.3233) < 1e-3

    def test_iteration_budget_is_enough(self, params_p, cfg):
        seed = SeedPoint(a=params_p.a0, b=0.05, T=params_p.T0)
        out = newton_correct(seed, params_p, cfg, tol=1e-12, max_iter=10)
        assert out.residual < 1e-12

    def test_heavy_system_reference_point(self, q0_corrected, params_q):
        assert abs(q0_corrected.a - 1.84153) < 1e-4
        assert abs(q0_corrected.b - 3.79392) < 1e-12  # fixed-b
        assert abs(q0_corrected.T - 7.31715) < 1e-4
        assert q0_corrected.residual < 1e-12

    def test_converged_point_returns_without_iterating(self, p1_corrected, params_p, cfg):
        again = newton_correct(p1_corrected, params_p, cfg, tol=1e-10, max_iter=0)
        assert again.a == p1_corrected.a and again.T == p1_corrected.T

    def test_perturbed_point_recovered(self, q0_corrected, params_q, cfg):
        bumped = SeedPoint(
            a=q0_corrected.a * (1.0 + 1e-4),
            b=q0_corrected.b,
            T=q0_corrected.T * (1.0 - 1e-4),
        )
        back = newton_correct(bumped, params_q, cfg, tol=1e-10)
        assert back.residual < 1e-10
        assert abs(back.a - q0_corrected.a) < 1e-6
        assert abs(back.T - q0_corrected.T) < 1e-6

    def test_unconverged_budget_raises(self, params_p, cfg):
        seed = SeedPoint(a=params_p.a0, b=0.05, T=params_p.T0)
        with pytest.raises(ConvergenceError):
            newton_correct(seed, params_p, cfg, tol=1e-12, max_iter=0)

    def test_hyperplane_constraint_enforced(self, p1_corrected, params_p, cfg):
        x_ref = p1_corrected.vector()
        normal = np.array([0.3, 0.8, 0.52])
        normal /= np.linalg.norm(normal)
        shifted = x_ref + 0.01 * normal + np.array([0.0, 0.004, -0.01])
        guess = SeedPoint(a=shifted[0], b=shifted[1], T=shifted[2])
        out = newton_correct(guess, params_p, cfg, tol=1e-10, hyperplane=(shifted, normal))
        assert out.residual < 1e-10
        assert abs(float(np.dot(out.vector() - shifted, normal))) < 1e-10
        assert out.b != p1_corrected.b  # b participates in the correction

    def test_full_variant_returns_gradients(self, params_q, cfg):
        seed = SeedPoint(a=1.84153, b=3.79392, T=7.31715)
        point, data = newton_correct_full(seed, params_q, cfg, tol=1e-10)
        assert point.residual < 1e-10
        assert data.grad_value is not None and data.grad_rt is not None
        assert abs(data.value) <= 1e-10 and abs(data.rt) <= 1e-10


class TestClosure:
    def test_odd_orbit_closes_after_two_T(self, p1_corrected, params_p):
        p = p1_corrected
        rhs = make_reduced_rhs(params_p, params_p.r0 * p.a)
        res = flow(rhs, reduced_initial(p.b, params_p), 2.0 * p.T, IntegratorConfig()).require_ok()
        target = reduced_initial(p.b, params_p)
        assert np.max(np.abs(res.y[:4] - target[:4])) < 1e-8

    def test_odd_orbit_midpoint_is_mirror_crossing(self, p1_corrected, params_p, cfg):
        e = eval_at(p1_corrected.a, p1_corrected.b, p1_corrected.T, params_p, cfg)
        assert abs(e.F) < 1e-10
        assert abs(e.Rt) < 1e-10
        assert abs(e.Ft + p1_corrected.b) < 1e-6  # axial velocity reverses sign

    def test_odd_even_orbit(self, params_p, cfg):
        seed = SeedPoint(a=params_p.a0, b=0.02, T=params_p.T0 / 2.0, kind=SymmetryKind.ODD_EVEN)
        out = newton_correct(seed, params_p, cfg, tol=1e-12)
        # quarter-period: both velocities vanish
        e = eval_at(out.a, out.b, out.T, params_p, cfg)
        assert abs(e.Ft) < 1e-8 and abs(e.Rt) < 1e-8
        # half-period: an odd-symmetric crossing
        e2 = eval_at(out.a, out.b, 2.0 * out.T, params_p, cfg)
        assert abs(e2.F) < 1e-8 and abs(e2.Rt) < 1e-8
        # full period: closure in all four mechanical components
        rhs = make_reduced_rhs(params_p, params_p.r0 * out.a)
        res = flow(rhs, reduced_initial(out.b, params_p), 4.0 * out.T, IntegratorConfig()).require_ok()
        assert np.max(np.abs(res.y[:4] - reduced_initial(out.b, params_p)[:4])) < 1e-8
