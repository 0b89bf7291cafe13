#!/usr/bin/env python3

"""
完整流水线验收测试
1. 网层级认证
2. TW 值域与截断误差
3. 标准格点预言机一致性
4. 大 Lip 定理
5. 小 lip 定理
6. 密闭度与壳孔隙度对偶
7. Lipschitz 泛函次序
8. 开球/闭球一致
9. 规定集合合成
10. 输出确定性
"""
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest

from epsilon_nets import build_hierarchy, hierarchy_is_nested
from hermeticity import hermeticity_at
from lip_derivatives import builtin, estimate_all, fixed_radius_suite, lip_big_r
from metric_space import MetricSpace
from prescribed_synth import RegionSpec, sample_regions, synthesize, verify_prescribed_sets
from theorem_verifier import (CaseTag, big_lip_witnesses, gamma_constant, hypothesis_lhs,
                              little_lip_bounds)
from tvdw import EXIT_OK, main
from tw_function import eval_standard_lattice, remainder_bound, tw_for_space


@pytest.fixture(scope="module")
def unit_interval():
    return MetricSpace.interval(0, 1, 1e-4)


@pytest.fixture(scope="module")
def random_x():
    return np.random.default_rng(2024).uniform(0, 1, 1000)


class TestNetCertification:
    """网层级认证"""

    @pytest.mark.parametrize("a", [2, 3, 5])
    def test_greedy_hierarchy_depth_six(self, unit_interval, a):
        h = build_hierarchy(unit_interval, a, 6, implicit=False)
        assert len(h.certificates) == 7
        for cert in h.certificates:
            assert cert["separated"] and cert["dense"]
            assert cert["min_separation"] >= cert["epsilon"] * (1 - 1e-9)
            assert cert["max_gap"] < cert["epsilon"]
        assert hierarchy_is_nested(h)


class TestTWBounds:
    """值域与截断误差"""

    @pytest.mark.parametrize("a,b", [(4, 2), (5, 3), (10, 1)])
    def test_range_and_truncation(self, unit_interval, random_x, a, b):
        tol = 1e-12
        f = tw_for_space(unit_interval, a, b)
        xs = list(random_x)
        vals = f.values(xs, tol)
        assert np.all(vals >= 0.0)
        assert np.all(vals <= a / (a - b) + tol)
        for n in (1, 4, 10, 20):
            shallow = f.partial_sums(xs, n)
            deep = f.partial_sums(xs, 2 * n)
            assert np.all(np.abs(deep - shallow) <= remainder_bound(a, b, n) + tol)


class TestOracleEquivalence:
    """隐式格点层级与标准格点形式一致"""

    @pytest.mark.parametrize("a,b", [(2, 1), (5, 3)])
    def test_agree_within_two_tol(self, unit_interval, random_x, a, b):
        tol = 1e-10
        f = tw_for_space(unit_interval, a, b)
        vals = f.values(list(random_x), tol)
        oracle = np.array([eval_standard_lattice(a, b, x, tol) for x in random_x])
        assert np.all(np.abs(vals - oracle) <= 2 * tol)


class TestBigLipTheorem:
    """(a,b) = (5,3) 的见证点"""

    def test_net_point_and_off_net(self, unit_interval):
        f = tw_for_space(unit_interval, 5, 3)
        xs = [0.0] + list(np.random.default_rng(7).uniform(0, 1, 20))
        for x in xs:
            records = big_lip_witnesses(f, x, range(1, 9))
            for rec in records:
                assert rec.passed
                assert rec.ratio >= rec.guaranteed_bound - 1e-6 * 3 ** rec.n
            expected = CaseTag.NET_POINT if x == 0.0 else CaseTag.OFF_NET
            assert all(rec.case_tag is expected for rec in records)

    def test_constants(self, unit_interval):
        f = tw_for_space(unit_interval, 5, 3)
        on_net = big_lip_witnesses(f, 0.0, [2])[0]
        off_net = big_lip_witnesses(f, 0.3 ** 0.5, [2])[0]
        assert on_net.guaranteed_bound == pytest.approx(0.5 * 9, rel=1e-9)
        assert off_net.guaranteed_bound == pytest.approx(9 / 6, rel=1e-9)


class TestLittleLipTheorem:
    """(a,b) = (600,17)，λ = 0.99"""

    def test_hypothesis_inequality(self):
        lhs = hypothesis_lhs(600, 17)
        assert lhs == pytest.approx(0.12082, abs=1e-5)
        assert lhs < 0.125
        assert gamma_constant(600, 17, 0.99) == pytest.approx(0.00293, abs=1e-5)

    def test_bounds_at_random_points(self, unit_interval):
        f = tw_for_space(unit_interval, 600, 17)
        gamma = gamma_constant(600, 17, 0.99)
        radii = [600.0 ** -n for n in range(1, 5)]
        for x in np.random.default_rng(11).uniform(0.05, 0.95, 10):
            records = little_lip_bounds(f, float(x), radii, 0.99, H=1.0)
            assert [r.n for r in records] == [1, 2, 3, 4]
            for rec in records:
                assert rec.passed
                assert rec.guaranteed_bound == pytest.approx(gamma / 600 * 17 ** rec.n, rel=1e-9)


class TestHermeticity:
    """密闭度"""

    def test_interval_interior(self, unit_interval):
        for x in np.random.default_rng(3).uniform(0.1, 0.9, 10):
            rep = hermeticity_at(unit_interval, float(x))
            assert 0.99 <= rep.H_estimate <= 1.0

    def test_cantor_duality(self):
        rep = hermeticity_at(MetricSpace.cantor(8), 0.0)
        assert 0.48 <= rep.H_estimate <= 0.52
        assert abs(rep.p_s_estimate - (1 - rep.H_estimate)) <= 0.02

    def test_isolated_points(self):
        rep = hermeticity_at(MetricSpace.point_cloud([[0.0, 0.0], [3.0, 4.0]]), 1)
        assert rep.H_estimate == 0.0 and rep.p_s_estimate == 1.0


class TestFunctionalOrdering:
    """lip_r ≤ Lip_r ≤ 𝕃ip^r 与 lip ≤ Lip ≤ 𝕃ip"""

    SPECS = ["builtin:identity", "builtin:abs", "builtin:square", "builtin:dist:0.3",
             "tw:4,3", "tw:5,3"]

    def _function(self, space, spec):
        kind, _, body = spec.partition(":")
        if kind == "builtin":
            return builtin(body, space)
        a, b = (float(v) for v in body.split(","))
        return tw_for_space(space, a, b)

    def test_fixed_radius_triples(self, unit_interval):
        rng = np.random.default_rng(5)
        funcs = {s: self._function(unit_interval, s) for s in self.SPECS}
        violations = 0
        for _ in range(100):
            f = funcs[self.SPECS[rng.integers(len(self.SPECS))]]
            x, r = float(rng.uniform(0, 1)), float(rng.uniform(0.01, 0.3))
            small, big, pair = fixed_radius_suite(f, unit_interval, x, r, budget=64)
            violations += not (small.value <= big.value <= pair.value)
        assert violations == 0

    def test_limit_proxies(self, unit_interval):
        rng = np.random.default_rng(6)
        sched = [2.0 ** -k for k in range(3, 9)]
        violations = 0
        for spec in self.SPECS:
            f = self._function(unit_interval, spec)
            for x in rng.uniform(0, 1, 4):
                suite = estimate_all(f, unit_interval, float(x), sched, budget=64)
                violations += not (suite.ordered() and suite.flags_nested())
        assert violations == 0


class TestOpenClosedBalls:
    """连续函数的开球与闭球上确界一致"""

    @pytest.mark.parametrize("name", ["identity", "square", "dist:0.3"])
    def test_sup_agree(self, unit_interval, name):
        f = builtin(name, unit_interval)
        rng = np.random.default_rng(9)
        for _ in range(50):
            x, r = float(rng.uniform(0, 1)), float(rng.uniform(0.01, 0.5))
            open_sup = lip_big_r(f, unit_interval, x, r, budget=4096)
            closed_sup = lip_big_r(f, unit_interval, x, r, budget=4096, closed=True)
            assert abs(open_sup.value - closed_sup.value) <= 1e-3


class TestSynthesis:
    """G = (0.2,0.8) 的规定集合"""

    def test_prescribed_sets(self, unit_interval):
        region = RegionSpec.parse(unit_interval, "(0.2,0.8)")
        sf = synthesize(unit_interval, region)
        collar = 1e-3
        F, G, IntF, _ = sample_regions(sf, np.random.default_rng(0), 100, collar)
        assert len(F) == len(G) == 100
        report = verify_prescribed_sets(sf, F, G, IntF, threshold=1e3, collar=collar)
        assert report.F_max_Lip <= 1 + 1e-6
        assert report.IntF_max_LLip <= 1 + 1e-6
        assert report.G_flagged == 100
        assert report.passed


class TestDeterminism:
    """两次运行逐字节一致"""

    @pytest.mark.parametrize("argv", [
        ["verify", "--theorem", "biglip", "--a", "5", "--b", "3", "--samples", "5", "--nmax", "6"],
        ["hermeticity", "--all", "--samples", "10"],
        ["synth", "--G", "(0.2,0.8)", "--verify", "--samples", "5"],
    ])
    def test_byte_identical_reports(self, tmp_path, monkeypatch, argv):
        monkeypatch.delenv("TVDW_THREADS", raising=False)
        monkeypatch.chdir(tmp_path)
        outputs = []
        for run in ("first", "second"):
            path = tmp_path / f"{run}.out"
            assert main(argv + ["--output", str(path)]) == EXIT_OK
            outputs.append(path.read_bytes())
        assert outputs[0] == outputs[1]


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
