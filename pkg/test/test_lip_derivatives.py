#!/usr/bin/env python3

"""
Lipschitz 导数测试
球上差商、上下确界、成对差商、极限代理与发散判定
"""
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lip_derivatives import (Functional, builtin, default_schedule, distance_function, diverges,
                             estimate_all, estimate_lip, estimate_Lip, estimate_Lip_closed,
                             estimate_LLip, fine_rho_grid, fixed_radius_suite, lip_big_r,
                             lip_r_ball, lip_r_closed, lip_small_r, llip_r_pairwise,
                             sampled_semicontinuity)
from metric_space import MetricSpace
from tw_function import tw_for_space
from tvdw_errors import DomainError, PreconditionError


@pytest.fixture
def unit_interval():
    return MetricSpace.interval(0, 1, 1e-4)


class TestBallQuotients:
    """Lip^r 与 Lip^r_+"""

    def test_identity_open_ball(self, unit_interval):
        est = lip_r_ball(builtin("identity", unit_interval), unit_interval, 0.5, 0.1)
        assert est.functional is Functional.LIP_R_BALL
        assert est.value == pytest.approx(255 / 256, rel=1e-12)

    def test_identity_closed_ball(self, unit_interval):
        est = lip_r_closed(builtin("identity", unit_interval), unit_interval, 0.5, 0.1)
        assert est.value == pytest.approx(1.0, rel=1e-12)

    def test_constant_is_zero(self, unit_interval):
        f = builtin("const:3", unit_interval)
        assert lip_r_ball(f, unit_interval, 0.2, 0.1).value == 0.0
        suite = estimate_all(f, unit_interval, 0.2)
        assert suite.lip.value == suite.Lip.value == suite.LLip.value == 0.0

    def test_single_point_space(self):
        space = MetricSpace.finite_matrix([[0.0]])
        est = lip_r_ball(builtin("const", space), space, 0, 1.0)
        assert est.value == 0.0 and est.witness is None

    def test_two_point_open_versus_closed(self):
        space = MetricSpace.finite_matrix([[0, 1], [1, 0]])
        f = builtin("dist:0", space)
        assert lip_r_ball(f, space, 0, 1.0).value == 0.0
        assert lip_r_closed(f, space, 0, 1.0).value == 1.0

    def test_square_witness_on_boundary_side(self, unit_interval):
        est = lip_r_ball(builtin("square", unit_interval), unit_interval, 0.5, 0.1)
        assert est.witness > 0.5
        assert est.value == pytest.approx((2 * 0.5 + 0.1 * 255 / 256) * 255 / 256, rel=1e-9)


class TestRadiusSupInf:
    """Lip_r 与 lip_r"""

    def test_distance_function_lip_small_r(self, unit_interval):
        d_x = distance_function(unit_interval, 0.5)
        est = lip_small_r(d_x, unit_interval, 0.5, 0.6, fine_rho_grid(0.6))
        assert est.value == pytest.approx(0.5 / (0.6 * 0.99), rel=1e-9)

    def test_rho_grid_must_lie_below_r(self, unit_interval):
        f = builtin("identity", unit_interval)
        with pytest.raises(PreconditionError):
            lip_big_r(f, unit_interval, 0.5, 0.1, rho_grid=[0.1, 0.05])
        with pytest.raises(PreconditionError):
            lip_small_r(f, unit_interval, 0.5, 0.1, rho_grid=[])

    def test_suite_ordering_on_shared_grid(self, unit_interval):
        f = tw_for_space(unit_interval, 4, 3)
        small, big, pair = fixed_radius_suite(f, unit_interval, 0.3, 0.05)
        assert small.value <= big.value <= pair.value
        assert small.functional is Functional.LIP_R_INF
        assert pair.functional is Functional.LLIP_LOCAL

    def test_big_r_trace_and_witness(self, unit_interval):
        est = lip_big_r(builtin("square", unit_interval), unit_interval, 0.2, 0.1)
        assert len(est.trace) == 16
        assert est.value == max(est.trace)
        assert est.witness["rho"] == pytest.approx(0.09)


class TestPairwise:
    """𝕃ip^r"""

    def test_square_pairwise(self, unit_interval):
        est = llip_r_pairwise(builtin("square", unit_interval), unit_interval, 0.5, 0.1)
        assert 1.19 < est.value <= 1.2

    def test_pairwise_dominates_star(self, unit_interval):
        f = builtin("abs", unit_interval)
        assert llip_r_pairwise(f, unit_interval, 0.0, 0.3).value == pytest.approx(1.0)

    def test_point_cloud_pairs(self):
        space = MetricSpace.point_cloud([[0, 0], [1, 0], [0, 2]])
        f = builtin("dist:1", space)
        est = llip_r_pairwise(f, space, 0, 3.0)
        assert est.value == pytest.approx(1.0)


class TestLimits:
    """极限代理与发散"""

    def test_diverges_rule(self):
        assert diverges([1.0, 2.0, 3000.0], 1e3)
        assert not diverges([3000.0, 2.0, 1.0], 1e3)
        assert not diverges([1.0, 2.0, 3.0], 1e3)
        assert not diverges([], 1e3)

    def test_default_schedule(self, unit_interval):
        f = tw_for_space(unit_interval, 4, 2)
        assert default_schedule(f) == [4.0 ** -k for k in range(1, 13)]
        assert default_schedule(builtin("identity", unit_interval))[0] == 0.125

    def test_identity_limits(self, unit_interval):
        suite = estimate_all(builtin("identity", unit_interval), unit_interval, 0.4)
        assert suite.lip.value == pytest.approx(255 / 256)
        assert suite.Lip.value == pytest.approx(255 / 256)
        assert suite.LLip.value == pytest.approx(1.0)
        assert suite.ordered(1e-12)
        assert suite.flags_nested()

    def test_tw_big_lip_diverges_at_zero(self, unit_interval):
        f = tw_for_space(unit_interval, 5, 3)
        est = estimate_Lip(f, unit_interval, 0.0)
        assert est.diverged
        assert est.functional is Functional.LIP_LIMSUP

    def test_tw_little_lip_diverges_at_zero(self, unit_interval):
        f = tw_for_space(unit_interval, 600, 17)
        est = estimate_lip(f, unit_interval, 0.0, r_schedule=[600.0 ** -k for k in range(1, 9)])
        assert est.diverged
        assert est.trace == sorted(est.trace)

    def test_llip_trace_nonincreasing(self, unit_interval):
        f = tw_for_space(unit_interval, 4, 3)
        est = estimate_LLip(f, unit_interval, 0.3, r_schedule=[2.0 ** -k for k in range(2, 9)])
        assert all(p >= q for p, q in zip(est.trace, est.trace[1:]))
        assert est.value == est.trace[-1]

    def test_single_radius_rejected(self, unit_interval):
        with pytest.raises(PreconditionError):
            estimate_Lip(builtin("identity", unit_interval), unit_interval, 0.5, r_schedule=[0.1])

    def test_big_lip_trace_from_suprema(self, unit_interval):
        f = tw_for_space(unit_interval, 4, 3)
        sched = [2.0 ** -k for k in range(2, 10)]
        est = estimate_Lip(f, unit_interval, 0.3, r_schedule=sched)
        assert len(est.trace) == len(sched) - 1
        assert all(p >= q for p, q in zip(est.trace, est.trace[1:]))
        assert est.trace[0] == lip_big_r(f, unit_interval, 0.3, sched[0], sched[1:]).value
        assert est.value == lip_r_ball(f, unit_interval, 0.3, sched[-1]).value

    def test_big_lip_between_little_and_pairwise(self, unit_interval):
        f = tw_for_space(unit_interval, 4, 3)
        sched = [2.0 ** -k for k in range(2, 10)]
        suite = estimate_all(f, unit_interval, 0.3, sched)
        assert suite.lip.value <= suite.Lip.value <= suite.LLip.value
        assert suite.flags_nested()

    def test_open_and_closed_agree_for_continuous(self, unit_interval):
        f = builtin("square", unit_interval)
        sched = [2.0 ** -k for k in range(3, 9)]
        open_est = estimate_Lip(f, unit_interval, 0.3, sched, budget=8192)
        closed_est = estimate_Lip_closed(f, unit_interval, 0.3, sched, budget=8192)
        assert abs(open_est.value - closed_est.value) <= 1e-3

    def test_bad_schedule(self, unit_interval):
        with pytest.raises(PreconditionError):
            estimate_lip(builtin("identity", unit_interval), unit_interval, 0.5, r_schedule=[0.1, -1.0])


class TestBuiltins:
    """内置函数"""

    def test_parse_errors(self, unit_interval):
        with pytest.raises(DomainError):
            builtin("sine", unit_interval)
        with pytest.raises(DomainError):
            builtin("dist", unit_interval)
        with pytest.raises(DomainError):
            builtin("identity", MetricSpace.finite_matrix([[0, 1], [1, 0]]))

    def test_describe(self, unit_interval):
        assert builtin("const:2", unit_interval).describe() == "builtin:const:2"
        assert builtin("dist:0.25", unit_interval).describe() == "builtin:dist:0.25"

    @settings(max_examples=80, deadline=None)
    @given(st.sampled_from(["identity", "abs", "square", "dist:0.3"]),
           st.floats(-1, 1), st.floats(-0.9, 0.9))
    def test_offset_increments_match_values(self, name, x, d):
        space = MetricSpace.interval(-1, 1, 1e-3)
        f = builtin(name, space)
        inc = f.offset_increments(x, np.array([d]))[0]
        assert inc == pytest.approx(f(np.array([x + d]))[0] - f(np.array([x]))[0], abs=1e-12)


class TestSemicontinuity:
    """半连续性采样检查"""

    def test_identity_semicontinuous(self, unit_interval):
        f = builtin("identity", unit_interval)
        approach = [0.5 + 2.0 ** -k for k in range(3, 11)]
        rep = sampled_semicontinuity(f, unit_interval, 0.5, 0.1, approach)
        assert rep.lower_ok and rep.upper_ok

    def test_empty_approach(self, unit_interval):
        with pytest.raises(PreconditionError):
            sampled_semicontinuity(builtin("identity", unit_interval), unit_interval, 0.5, 0.1, [])


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
