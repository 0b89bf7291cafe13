#!/usr/bin/env python3

"""
密闭度测试
H(X,x)、壳孔隙度对偶、密闭半径与空间密闭度
"""
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest

from hermeticity import (annulus_witness, cantor_radius_grid, geometric_radius_grid,
                         hermeticity_at, hermeticity_of_space, ordered_map,
                         radius_of_hermeticity, shell_porosity_at)
from metric_space import MetricSpace
from tvdw_errors import DomainError, PreconditionError


@pytest.fixture
def unit_interval():
    return MetricSpace.interval(0, 1, 1e-4)


@pytest.fixture(scope="module")
def cantor8():
    return MetricSpace.cantor(8)


class TestGrids:
    """半径网格"""

    def test_geometric_grid(self):
        grid = geometric_radius_grid(0.5, 1e-5)
        assert grid[0] == 0.5
        assert grid[-1] >= 1e-5 > grid[-1] * 0.5
        assert all(p > q for p, q in zip(grid, grid[1:]))

    def test_geometric_grid_validation(self):
        with pytest.raises(DomainError):
            geometric_radius_grid(0.1, 0.5)
        with pytest.raises(DomainError):
            geometric_radius_grid(0.5, 0.1, ratio=1.0)

    def test_cantor_grid_just_below_anchor(self):
        grid = cantor_radius_grid(2, 3, steps=4)
        assert len(grid) == 8
        assert grid[0] < 2 * 3.0 ** -2
        assert grid[0] == pytest.approx(2 * 3.0 ** -2, rel=1e-8)

    def test_r_grid_must_fit_diameter(self, unit_interval):
        with pytest.raises(PreconditionError):
            hermeticity_at(unit_interval, 0.5, r_grid=[2.0, 0.5])
        with pytest.raises(PreconditionError):
            hermeticity_at(unit_interval, 0.5, r_grid=[])


class TestPointHermeticity:
    """单点密闭度与壳孔隙度"""

    def test_interval_interior(self, unit_interval):
        rep = hermeticity_at(unit_interval, 0.5)
        assert rep.H_estimate >= 0.99
        assert rep.p_s_estimate <= 0.01
        assert rep.duality_gap <= 1e-9
        assert all(0.0 <= v <= 1.0 for v in rep.ratio_per_r)
        assert rep.r_grid == sorted(rep.r_grid, reverse=True)

    def test_cantor_origin_is_half(self, cantor8):
        rep = hermeticity_at(cantor8, 0.0)
        assert rep.H_estimate == pytest.approx(0.5, abs=1e-6)
        assert rep.p_s_estimate == pytest.approx(0.5, abs=1e-3)
        assert rep.duality_gap <= 1e-3

    def test_shell_porosity_direct(self, unit_interval, cantor8):
        assert shell_porosity_at(unit_interval, 0.5) <= 0.01
        assert shell_porosity_at(cantor8, 0.0) == pytest.approx(0.5, abs=1e-3)

    def test_isolated_point(self):
        space = MetricSpace.point_cloud([[0.0], [1.0]])
        rep = hermeticity_at(space, 0)
        assert rep.isolated
        assert rep.H_estimate == 0.0 and rep.p_s_estimate == 1.0
        assert shell_porosity_at(space, 0) == 1.0

    def test_rh_table(self, unit_interval):
        rep = hermeticity_at(unit_interval, 0.5, lambdas=[0.9, 1.5])
        lam, rh = rep.RH_table[0]
        assert lam == 0.9 and rh == pytest.approx(5 / 9, abs=0.01)
        assert math.isnan(rep.RH_table[1][1])
        out = rep.to_dict()
        assert out["RH_table"][0][0] == 0.9


class TestRadiusOfHermeticity:
    """密闭半径"""

    def test_interval_crossing(self, unit_interval):
        rh = radius_of_hermeticity(unit_interval, 0.5, 0.9)
        assert rh == pytest.approx(5 / 9, abs=0.01)

    def test_capped_at_domain_scale(self, unit_interval):
        assert radius_of_hermeticity(unit_interval, 0.5, 0.5) == 1.0

    def test_lambda_at_least_h(self, unit_interval):
        with pytest.raises(DomainError):
            radius_of_hermeticity(unit_interval, 0.5, 1.0)
        with pytest.raises(DomainError):
            radius_of_hermeticity(unit_interval, 0.5, 0.0, H=1.0)

    def test_returns_grid_value(self, unit_interval):
        grid = [0.8, 0.6, 0.4, 0.2]
        assert radius_of_hermeticity(unit_interval, 0.5, 0.9, r_grid=grid, H=1.0) == 0.4


class TestAnnulusWitness:
    """环形见证点"""

    def test_interval_witness_below_rh(self, unit_interval):
        rh = radius_of_hermeticity(unit_interval, 0.5, 0.9)
        for r in (0.5 * rh, 0.1, 0.01):
            hit = annulus_witness(unit_interval, 0.5, r, 0.9)
            assert hit is not None
            assert 0.9 * r <= hit[1] <= r

    def test_cantor_gap_has_no_witness(self, cantor8):
        r = cantor_radius_grid(4, 4)[0]
        assert annulus_witness(cantor8, 0.0, r, 0.9) is None
        assert annulus_witness(cantor8, 0.0, r, 0.4) is not None


class TestSpaceHermeticity:
    """空间密闭度"""

    def test_interval_samples(self, unit_interval):
        rng = np.random.default_rng(0)
        samples = unit_interval.random_points(rng, 100)
        res = hermeticity_of_space(unit_interval, samples)
        assert not res.vacuous
        assert res.samples_used == 100
        assert res.estimate >= 0.99

    def test_thread_count_does_not_change_result(self, unit_interval):
        samples = unit_interval.random_points(np.random.default_rng(3), 12)
        one = hermeticity_of_space(unit_interval, samples, threads=1)
        four = hermeticity_of_space(unit_interval, samples, threads=4)
        assert one.to_dict() == four.to_dict()

    def test_cantor_endpoints(self, cantor8):
        res = hermeticity_of_space(cantor8, [0.0, 1.0])
        assert res.estimate == pytest.approx(0.5, abs=1e-6)

    def test_all_isolated_is_vacuous(self):
        space = MetricSpace.finite_matrix([[0, 1, 3], [1, 0, 2], [3, 2, 0]])
        res = hermeticity_of_space(space, [0, 1, 2])
        assert res.vacuous and res.estimate is None
        assert res.to_dict()["samples_used"] == 0

    def test_ordered_map_preserves_order(self):
        assert ordered_map(lambda v: v * v, list(range(20)), threads=4) == [v * v for v in range(20)]


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
