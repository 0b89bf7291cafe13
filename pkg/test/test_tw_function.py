#!/usr/bin/env python3

"""
TW 函数测试
部分和、截断求值、余项界、精确格点算术与标准格点预言机
"""
import os
import sys
from fractions import Fraction

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from epsilon_nets import build_hierarchy
from metric_space import MetricSpace
from tw_function import (TWFunction, eval_standard_lattice, make_tw, partial_sum_lipschitz,
                         remainder_bound, terms_for_tol, tw_for_space)
from tvdw_errors import DomainError, ResourceError


@pytest.fixture
def unit_interval():
    return MetricSpace.interval(0, 1, 1e-4)


class TestBounds:
    """余项界与项数"""

    def test_remainder_bound_values(self):
        assert remainder_bound(4, 2, 0) == pytest.approx(2.0)
        assert remainder_bound(4, 2, 3) == pytest.approx(0.25)

    def test_terms_for_tol(self):
        assert terms_for_tol(4, 2, 1e-6) == 21
        assert terms_for_tol(4, 2, 1e-6, start=30) == 30

    def test_partial_sum_lipschitz(self):
        assert partial_sum_lipschitz(2, 3) == 8.0
        with pytest.raises(DomainError):
            partial_sum_lipschitz(1, 3)

    def test_type_validation(self):
        with pytest.raises(DomainError):
            remainder_bound(2, 3, 1)
        with pytest.raises(DomainError):
            remainder_bound(2, 0, 1)
        with pytest.raises(DomainError):
            terms_for_tol(4, 2, 0.0)

    def test_tolerance_too_tight(self):
        with pytest.raises(ResourceError):
            terms_for_tol(1.0001, 1.0, 1e-12)


class TestEvaluate:
    """求值"""

    def test_partial_sum_exact_third(self, unit_interval):
        f = tw_for_space(unit_interval, 2, 1)
        assert f.exact_lattice
        assert f.partial_sum(Fraction(1, 3), 3) == pytest.approx(7 / 12, abs=1e-15)

    def test_classical_takagi_at_third(self, unit_interval):
        f = tw_for_space(unit_interval, 2, 1)
        res = f.evaluate(Fraction(1, 3), tol=1e-9)
        assert abs(res.value - 2 / 3) <= 1e-9

    def test_terms_used_reported(self, unit_interval):
        f = tw_for_space(unit_interval, 4, 2)
        res = f.evaluate(0.3, tol=1e-6)
        assert res.terms_used == 21
        assert res.error_bound <= 1e-6
        assert set(res.to_dict()) == {"value", "terms_used", "error_bound"}

    def test_matches_standard_lattice_oracle(self, unit_interval):
        f = tw_for_space(unit_interval, 5, 3)
        for x in (0.0, 0.37, 0.5, 0.999):
            assert f.evaluate(x, 1e-10).value == pytest.approx(
                eval_standard_lattice(5, 3, x, 1e-10), abs=2e-10)

    def test_index_start_one(self, unit_interval):
        f = tw_for_space(unit_interval, 2, 1, index_start=1)
        assert f.partial_sum(Fraction(1, 3), 3) == pytest.approx(1 / 6 + 1 / 12, abs=1e-15)
        with pytest.raises(DomainError):
            tw_for_space(unit_interval, 2, 1, index_start=2)

    def test_vectorized_call(self, unit_interval):
        f = tw_for_space(unit_interval, 4, 2)
        xs = [0.1, 0.2, 0.7]
        vals = f(xs)
        assert vals.shape == (3,)
        for x, v in zip(xs, vals):
            assert v == pytest.approx(f.evaluate(x).value, abs=1e-12)

    def test_zero_at_lattice_point(self, unit_interval):
        f = tw_for_space(unit_interval, 3, 2)
        assert f.evaluate(0.0).value == 0.0
        assert f.evaluate(1.0).value == 0.0

    @settings(max_examples=60, deadline=None)
    @given(st.floats(0, 1), st.integers(1, 40))
    def test_partial_sums_nondecreasing(self, x, n):
        f = tw_for_space(MetricSpace.interval(0, 1, 1e-4), 4, 3)
        assert f.partial_sum(x, n + 1) >= f.partial_sum(x, n) - 1e-15

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0, 1), st.sampled_from([1e-4, 1e-8, 1e-11]))
    def test_truncation_within_tol(self, x, tol):
        f = tw_for_space(MetricSpace.interval(0, 1, 1e-4), 5, 3)
        res = f.evaluate(x, tol)
        deep = f.partial_sum(x, res.terms_used + 60)
        assert abs(deep - res.value) <= tol + 1e-14


class TestHierarchies:
    """显式与隐式层级"""

    def test_explicit_dyadic_matches_lattice(self):
        space = MetricSpace.interval(0, 1, 2 ** -10)
        explicit = make_tw(space, 2, 1.5, depth=6, implicit=False)
        lattice = make_tw(space, 2, 1.5, implicit=True)
        xs = list(space.carrier()[::37])
        assert np.allclose(explicit.partial_sums(xs, 7), lattice.partial_sums(xs, 7), atol=1e-12)

    def test_explicit_depth_exhausted(self):
        f = make_tw(MetricSpace.cantor(4), 4, 2, depth=1)
        assert not f.hierarchy.implicit and not f.hierarchy.saturated
        with pytest.raises(ResourceError):
            f.evaluate(0.0, tol=1e-12)

    def test_saturated_hierarchy_is_exact(self):
        space = MetricSpace.cantor(4)
        f = tw_for_space(space, 4, 2)
        assert f.hierarchy.saturated
        x = float(space.carrier()[5])
        depth = f.hierarchy.depth
        # 更深的层沿用全部载体点，求值等于有限和
        assert f.evaluate(x, tol=1e-12).value == f.partial_sum(x, depth + 1)
        assert len(f.hierarchy.level(depth + 7)) == len(space.carrier())

    def test_finite_space_partial_sum(self):
        space = MetricSpace.finite_matrix([[0, 0.5, 3], [0.5, 0, 2.5], [3, 2.5, 0]])
        f = tw_for_space(space, 3, 2, depth=1)
        # S_0 = {0, 2}，S_1 = 全部点
        assert f.partial_sum(1, 1) == 0.5
        assert f.partial_sum(1, 2) == 0.5

    def test_hierarchy_base_mismatch(self, unit_interval):
        h = build_hierarchy(unit_interval, 3, 2)
        with pytest.raises(DomainError):
            TWFunction(2.0, 1.0, h)


class TestIncrements:
    """增量"""

    def test_offset_increments_match_pointwise(self, unit_interval):
        f = tw_for_space(unit_interval, 5, 3)
        deltas = np.array([0.125, -0.0625, 0.03125])
        incs = f.offset_increments(0.25, deltas, tol=1e-12)
        for d, inc in zip(deltas, incs):
            assert inc == pytest.approx(f.increment(0.25 + d, 0.25, tol=1e-12).value, abs=1e-11)

    def test_tiny_offsets_stay_exact(self, unit_interval):
        f = tw_for_space(unit_interval, 4, 2)
        tiny = 4.0 ** -20
        inc = f.offset_increments(0.5, np.array([tiny]), tol=1e-14)[0]
        # k=0 项贡献 −δ，k=1..19 项各贡献 2^k·δ
        assert inc == pytest.approx(tiny * (2 ** 20 - 3), rel=1e-9)

    def test_increment_error_bound(self, unit_interval):
        f = tw_for_space(unit_interval, 4, 3)
        res = f.increment(0.6, 0.2, tol=1e-9)
        assert res.error_bound <= 1e-9
        expected = f.evaluate(0.6, 1e-12).value - f.evaluate(0.2, 1e-12).value
        assert res.value == pytest.approx(expected, abs=2e-9)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
