#!/usr/bin/env python3

"""
ε-网测试
贪心极大网、分离/稠密认证、网层级与隐式格点
"""
import math
import os
import sys
from fractions import Fraction

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from epsilon_nets import (Net, build_hierarchy, check_dense, check_separated, dist_to_net,
                          greedy_maximal_net, hierarchy_is_nested, lattice_net,
                          max_feasible_depth, nearest_in_net, net_from_dict, net_to_dict)
from metric_space import MetricSpace
from tvdw_errors import DomainError, PreconditionError, ResourceError


@pytest.fixture
def unit_interval():
    return MetricSpace.interval(0, 1, 0.01)


class TestGreedyNet:
    """贪心构造"""

    def test_canonical_order(self, unit_interval):
        net = greedy_maximal_net(unit_interval, 0.4)
        assert np.allclose(net.points, [0.0, 0.4, 0.8])

    def test_seed_kept_first(self, unit_interval):
        net = greedy_maximal_net(unit_interval, 0.4, seed=[0.2])
        assert np.allclose(net.points, [0.2, 0.6, 1.0])

    def test_non_separated_seed_rejected(self, unit_interval):
        with pytest.raises(PreconditionError):
            greedy_maximal_net(unit_interval, 0.4, seed=[0.1, 0.2])

    def test_nonpositive_epsilon(self, unit_interval):
        with pytest.raises(DomainError):
            greedy_maximal_net(unit_interval, 0.0)

    def test_finite_matrix(self):
        space = MetricSpace.finite_matrix([[0, 1, 3], [1, 0, 2], [3, 2, 0]])
        net = greedy_maximal_net(space, 1.5)
        assert list(net.points) == [0, 2]
        sep = check_separated(net)
        assert sep.ok and sep.worst_distance == 3.0

    def test_cantor_level(self):
        space = MetricSpace.cantor(3)
        net = greedy_maximal_net(space, 1 / 9)
        assert check_separated(net).ok
        assert check_dense(net).ok

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2 ** 16), st.integers(5, 60), st.floats(0.05, 0.5))
    def test_point_cloud_separated_and_dense(self, seed, count, eps):
        rng = np.random.default_rng(seed)
        coords = rng.uniform(0, 1, (count, 2))
        space = MetricSpace.point_cloud(coords)
        net = greedy_maximal_net(space, eps)
        assert check_separated(net).ok
        dense = check_dense(net)
        assert dense.ok
        assert dense.worst_distance < eps

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.02, 0.9))
    def test_interval_separated_and_dense(self, eps):
        space = MetricSpace.interval(0, 1, 0.005)
        net = greedy_maximal_net(space, eps)
        assert check_separated(net).ok
        assert check_dense(net).ok


class TestChecks:
    """认证检查"""

    def test_dense_worst_gap(self, unit_interval):
        net = Net(unit_interval, 0.4, np.array([0.0, 0.4, 0.8]))
        dense = check_dense(net)
        assert dense.ok
        assert dense.worst_distance == pytest.approx(0.2)

    def test_dense_failure_reports_first_uncovered(self, unit_interval):
        net = Net(unit_interval, 0.4, np.array([0.0]))
        dense = check_dense(net)
        assert not dense.ok
        assert dense.witness == pytest.approx(0.4)
        assert dense.worst_distance >= 0.4

    def test_separation_failure_witness(self, unit_interval):
        net = Net(unit_interval, 0.4, np.array([0.0, 0.3, 0.9]))
        sep = check_separated(net)
        assert not sep.ok
        assert sep.witness == (0.0, 0.3)
        assert sep.worst_distance == pytest.approx(0.3)

    def test_empty_net_distance_is_infinite(self, unit_interval):
        net = Net(unit_interval, 0.4, np.array([]))
        assert dist_to_net(0.5, net) == math.inf

    def test_nearest_in_net(self, unit_interval):
        net = Net(unit_interval, 0.4, np.array([0.0, 0.4, 0.8]))
        p, d = nearest_in_net(0.55, net)
        assert p == pytest.approx(0.4)
        assert d == pytest.approx(0.15)

    def test_to_dict_witness_plain(self, unit_interval):
        net = Net(unit_interval, 0.4, np.array([0.0, 0.3]))
        out = check_separated(net).to_dict()
        assert out["ok"] is False
        assert out["witness"] == [0.0, 0.3]


class TestHierarchy:
    """网层级"""

    def test_monotone_interval(self, unit_interval):
        h = build_hierarchy(unit_interval, 2, 2)
        assert np.allclose(h.nets[0].points, [0, 1])
        assert np.allclose(h.nets[1].points, [0, 1, 0.5])
        assert np.allclose(h.nets[2].points, [0, 1, 0.5, 0.25, 0.75])
        assert hierarchy_is_nested(h)
        assert all(c["separated"] and c["dense"] for c in h.certificates)

    def test_non_monotone_still_certified(self, unit_interval):
        h = build_hierarchy(unit_interval, 3, 2, monotone=False)
        assert not h.monotone
        for net in h.nets:
            assert check_separated(net).ok and check_dense(net).ok

    def test_explicit_depth_limit(self, unit_interval):
        assert max_feasible_depth(unit_interval, 2) == 7
        with pytest.raises(ResourceError) as exc:
            build_hierarchy(unit_interval, 2, 10, implicit=False)
        assert exc.value.max_feasible_depth == 7

    def test_auto_implicit_for_integer_a(self, unit_interval):
        h = build_hierarchy(unit_interval, 2, 10)
        assert h.implicit and h.exact_lattice
        assert hierarchy_is_nested(h)
        deep = h.level(30)
        assert deep.implicit_den == 2 ** 30

    def test_level_beyond_explicit_depth(self, unit_interval):
        h = build_hierarchy(unit_interval, 2, 2)
        with pytest.raises(ResourceError):
            h.level(5)

    def test_lattice_line_requires_implicit(self):
        space = MetricSpace.lattice_line(1e-3)
        assert build_hierarchy(space, 2, 4).implicit
        with pytest.raises(DomainError):
            build_hierarchy(space, 2, 4, implicit=False)

    def test_a_must_exceed_one(self, unit_interval):
        with pytest.raises(DomainError):
            build_hierarchy(unit_interval, 1.0, 2)

    def test_non_integer_a_cannot_nest_implicitly(self, unit_interval):
        with pytest.raises(PreconditionError):
            build_hierarchy(unit_interval, 2.5, 3, implicit=True)


class TestLattice:
    """隐式格点网"""

    def test_nearest_exact(self):
        net = lattice_net(MetricSpace.interval(0, 1), 2, 3)
        p, d = net.nearest_exact(Fraction(1, 3))
        assert p == Fraction(3, 8)
        assert d == Fraction(1, 24)

    def test_clamped_to_interval(self):
        net = lattice_net(MetricSpace.interval(0.3, 0.9), 2, 1)
        p, d = net.nearest(0.3)
        assert p == 0.5
        assert d == pytest.approx(0.2)

    def test_implicit_checks_trivially_hold(self):
        net = lattice_net(MetricSpace.lattice_line(), 4, 2)
        assert check_separated(net).ok
        dense = check_dense(net)
        assert dense.ok and dense.worst_distance == pytest.approx(1 / 32)

    def test_json_shape(self):
        net = lattice_net(MetricSpace.interval(0, 1), 2, 3)
        assert net_to_dict(net) == {"epsilon": 0.125,
                                    "implicit_lattice": {"scale": 0.125, "denominator": 8}}

    def test_dict_reload(self, unit_interval):
        explicit = greedy_maximal_net(unit_interval, 0.3)
        again = net_from_dict(unit_interval, net_to_dict(explicit))
        assert again.epsilon == explicit.epsilon and list(again.points) == list(explicit.points)
        implicit = net_from_dict(unit_interval, net_to_dict(lattice_net(unit_interval, 2, 3)))
        assert implicit.is_implicit and implicit.implicit_den == 8
        assert check_separated(implicit).ok

    def test_dict_missing_fields(self, unit_interval):
        with pytest.raises(DomainError, match="epsilon"):
            net_from_dict(unit_interval, {"points": [0.0]})
        with pytest.raises(DomainError):
            net_from_dict(unit_interval, {"epsilon": 0.5})

    def test_empty_intersection(self):
        with pytest.raises(ResourceError):
            lattice_net(MetricSpace.interval(0.1, 0.2), 2, 1)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
