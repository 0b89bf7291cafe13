#!/usr/bin/env python3

"""
按给定开集 G 合成爆破集合
f = g·h，g(x) = α·min{1, d(x,F)}（F = X∖G），h 为 (a,b) 型 TW 函数，α = (a−b)/a。
小 lip 变体：L∞(f) = ℓ∞(f) = G，𝕃∞(f) = cl G；大 Lip 变体（b > 2）：L∞(f) = G。
"""
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from hermeticity import ordered_map, radius_of_hermeticity
from lip_derivatives import estimate_all, estimate_Lip, estimate_LLip
from metric_space import MetricSpace, PointRef, SpaceKind
from theorem_verifier import check_little_lip_hypothesis, choose_params, gamma_constant, scale_index
from tvdw_errors import DomainError, ResolutionError
from tvdw_logger import get_logger
from tw_function import DEFAULT_TOL, TWFunction, tw_for_space

DEFAULT_THRESHOLD = 1e3
DEFAULT_VERIFY_BUDGET = 64
BOUND_TOL = 1e-6
_GROUP = re.compile(r"\(([^()]*)\)")


@dataclass
class RegionSpec:
    """
    开集 G：一维空间为开区间并集（已合并），盒空间为互不相交的开球并集

    F = X∖G 为闭集；闭包与内部由距离函数导出。
    """
    space: MetricSpace
    intervals: List[Tuple[float, float]] = field(default_factory=list)
    balls: List[Tuple[np.ndarray, float]] = field(default_factory=list)

    def __post_init__(self):
        if self.space.kind is SpaceKind.BOX:
            if self.intervals:
                raise DomainError("盒空间的 G 须由开球给出")
            self._check_balls()
        else:
            if self.balls:
                raise DomainError(f"{self.space.kind.value} 的 G 须由开区间给出")
            if not self.space.is_linear:
                if self.intervals:
                    raise DomainError(f"{self.space.kind.value} 不支持规定爆破集合",
                                      ["使用区间、格点直线、Cantor 集或盒空间"])
            self.intervals = self._merged(self.intervals)
        self._check_non_isolated()

    @staticmethod
    def _merged(intervals: Sequence[Tuple[float, float]]) -> List[Tuple[float, float]]:
        out: List[Tuple[float, float]] = []
        for c, d in sorted((float(c), float(d)) for c, d in intervals):
            if not c < d:
                raise DomainError(f"开区间需要 c < d: ({c}, {d})")
            if out and c < out[-1][1]:
                out[-1] = (out[-1][0], max(out[-1][1], d))
            else:
                out.append((c, d))
        return out

    def _check_balls(self):
        self.balls = [(np.asarray(c, dtype=float).reshape(-1), float(r)) for c, r in self.balls]
        lo, hi = self.space.params["lo"], self.space.params["hi"]
        for i, (c, r) in enumerate(self.balls):
            if not r > 0:
                raise DomainError(f"开球半径必须为正: {r}")
            if np.any(c - r < lo) or np.any(c + r > hi):
                raise DomainError(f"开球 {c.tolist()}±{r} 须包含在盒内")
            for c2, r2 in self.balls[i + 1:]:
                if np.linalg.norm(c - c2) < r + r2:
                    raise DomainError("盒空间中的开球须两两不相交")

    def _check_non_isolated(self):
        """G ⊆ X^d：离散载体上的 G 点在工作尺度下不得孤立"""
        if self.space.is_continuum or self.space.kind is SpaceKind.BOX or self.is_empty:
            return
        scale = 4 * self.space.resolution
        for p in self.space.carrier():
            if self.contains(p) and self.space.is_isolated(p, scale):
                raise DomainError(f"G 含孤立点 {float(p)}（工作尺度 {scale:g}）",
                                  ["G 必须包含于非孤立点集 X^d"])

    @classmethod
    def parse(cls, space: MetricSpace, text: str) -> "RegionSpec":
        """解析 "(0.2,0.8)"、"(0.1,0.3)(0.5,0.9)" 或盒空间的 "(0.5,0.5;0.2)"；空串或 "empty" 表示 ∅"""
        text = text.strip()
        if text in ("", "empty", "∅"):
            return cls(space)
        groups = _GROUP.findall(text)
        if not groups:
            raise DomainError(f"无法解析区域: {text!r}", ['示例: "(0.2,0.8)" 或 "(0.5,0.5;0.2)"'])
        try:
            if space.kind is SpaceKind.BOX:
                balls = []
                for g in groups:
                    center, radius = g.split(";")
                    balls.append((np.array([float(v) for v in center.split(",")]), float(radius)))
                return cls(space, balls=balls)
            intervals = []
            for g in groups:
                c, d = g.split(",")
                intervals.append((float(c), float(d)))
            return cls(space, intervals=intervals)
        except ValueError as exc:
            raise DomainError(f"无法解析区域 {text!r}: {exc}")

    @classmethod
    def whole(cls, space: MetricSpace) -> "RegionSpec":
        """G = X（F = ∅）"""
        if space.kind is SpaceKind.BOX:
            raise DomainError("盒空间的 G = X 无法用包含于盒内的开球表示")
        lo, hi = space.bounds()
        return cls(space, intervals=[(lo - 1.0, hi + 1.0)])

    @property
    def is_empty(self) -> bool:
        return not self.intervals and not self.balls

    @property
    def F_empty(self) -> bool:
        """F = ∅ 当且仅当某个开区间覆盖整个空间"""
        if self.space.kind is SpaceKind.BOX:
            return False
        lo, hi = self.space.bounds()
        return any((c < lo or math.isinf(c)) and (d > hi or math.isinf(d)) for c, d in self.intervals)

    def describe(self) -> str:
        if self.space.kind is SpaceKind.BOX:
            return "∪".join(f"B({c.tolist()},{r:g})" for c, r in self.balls) or "∅"
        return "∪".join(f"({c:g},{d:g})" for c, d in self.intervals) or "∅"

    def to_dict(self) -> Dict[str, Any]:
        if self.space.kind is SpaceKind.BOX:
            return {"balls": [{"center": c.tolist(), "radius": r} for c, r in self.balls]}
        return {"intervals": [[c, d] for c, d in self.intervals]}

    # ------------------------------------------------------------------
    # 距离
    # ------------------------------------------------------------------

    def contains(self, x: PointRef) -> bool:
        return self.dist_to_F(x) > 0

    def dist_to_F(self, x: PointRef) -> float:
        return float(self.dist_to_F_exact(x))

    def dist_to_F_exact(self, x: PointRef):
        """d(x, F)；一维空间返回 Fraction，F = ∅ 时为 +∞"""
        if self.space.kind is SpaceKind.BOX:
            p = np.asarray(x, dtype=float)
            return max([r - float(np.linalg.norm(p - c)) for c, r in self.balls] + [0.0])
        fx = Fraction(x)
        for c, d in self.intervals:
            if c < fx < d:
                return self._component_gap(fx, c, d)
        return Fraction(0)

    def _component_gap(self, fx: Fraction, c: float, d: float):
        space = self.space
        left = math.inf if math.isinf(c) else fx - Fraction(c)
        right = math.inf if math.isinf(d) else Fraction(d) - fx
        if space.kind is SpaceKind.CANTOR:
            # F 为 G 外的载体点
            outside = [Fraction(float(p)) for p in space.carrier() if not (c < p < d)]
            return min((abs(fx - q) for q in outside), default=math.inf)
        if space.kind is SpaceKind.INTERVAL:
            lo, hi = space.bounds()
            if c < lo:
                left = math.inf
            if d > hi:
                right = math.inf
        return min(left, right)

    def dist_to_G(self, x: PointRef) -> float:
        """d(x, G)；G = ∅ 时为 +∞"""
        if self.is_empty:
            return math.inf
        if self.space.kind is SpaceKind.BOX:
            p = np.asarray(x, dtype=float)
            return max(0.0, min(float(np.linalg.norm(p - c)) - r for c, r in self.balls))
        x = float(x)
        gaps = [0.0 if c < x < d else min(abs(x - c), abs(x - d)) for c, d in self.intervals]
        return min(gaps)

    def boundary_distance(self, x: PointRef) -> float:
        """到 ∂G 的距离（用于排除边界环带）"""
        if self.contains(x):
            return self.dist_to_F(x)
        return self.dist_to_G(x)

    def in_closure_G(self, x: PointRef) -> bool:
        return self.dist_to_G(x) == 0

    def in_interior_F(self, x: PointRef) -> bool:
        return self.dist_to_G(x) > 0


class Cutoff:
    """g(x) = α·min{1, d(x,F)}：α-Lipschitz，零点集恰为 F"""

    def __init__(self, region: RegionSpec, alpha: float):
        if not alpha > 0:
            raise DomainError(f"α 必须为正: {alpha}")
        self.region = region
        self.alpha = alpha

    def value_exact(self, x: PointRef):
        if self.region.F_empty:
            return Fraction(self.alpha) if self.region.space.is_linear else self.alpha
        d = self.region.dist_to_F_exact(x)
        if isinstance(d, Fraction):
            return Fraction(self.alpha) * min(Fraction(1), d)
        return self.alpha * min(1.0, d)

    def __call__(self, pts) -> np.ndarray:
        if self.region.space.kind is SpaceKind.BOX:
            rows = np.asarray(pts, dtype=float).reshape(-1, self.region.space.dim)
            return np.array([float(self.value_exact(p)) for p in rows])
        return np.array([float(self.value_exact(float(p))) for p in np.atleast_1d(pts)])


def cutoff(space: MetricSpace, region: RegionSpec, alpha: float) -> Cutoff:
    """g = α·min{1, d(·,F)}；F = ∅ 时 g ≡ α"""
    if region.space is not space:
        raise DomainError("区域与空间不一致")
    return Cutoff(region, alpha)


@dataclass(eq=False)
class SynthFunction:
    """f = g·h"""
    alpha: float
    g: Cutoff
    h: TWFunction
    region: RegionSpec
    variant: str = "little"
    lam: Optional[float] = None
    gamma: Optional[float] = None
    H: Optional[float] = None

    @property
    def space(self) -> MetricSpace:
        return self.h.space

    @property
    def a(self) -> float:
        return self.h.a

    @property
    def b(self) -> float:
        return self.h.b

    @property
    def hierarchy(self):
        return self.h.hierarchy

    def describe(self) -> str:
        return f"synth:{self.variant}:{self.h.describe()}:G={self.region.describe()}"

    def __call__(self, pts) -> np.ndarray:
        return self.g(pts) * self.h(pts)

    def offset_increments(self, x: PointRef, offsets: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
        """f(x+δ) − f(x) = g(x+δ)(h(x+δ) − h(x)) + h(x)(g(x+δ) − g(x))，g 的差精确计算"""
        x = self.space.point(x)
        offsets = np.asarray(offsets, dtype=float)
        fx = Fraction(x)
        gx = self.g.value_exact(fx)
        gu = [self.g.value_exact(fx + Fraction(float(d))) for d in offsets]
        dh = self.h.offset_increments(x, offsets, tol=tol / 2)
        hx = self.h.evaluate(x, tol=max(tol / 2, 1e-15)).value
        return np.array([float(g) * dh[j] + hx * float(g - gx) for j, g in enumerate(gu)])


def synthesize(space: MetricSpace, region: RegionSpec, variant: str = "little",
               a: Optional[int] = None, b: Optional[int] = None,
               H: Optional[float] = None, lam: Optional[float] = None) -> SynthFunction:
    """
    组装 f = g·h

    little：需要密闭度 H（默认取 1，即赋范空间的子集），(a,b) 缺省时由 choose_params(H) 给出；
    big：任意 b > 2 的单调类型，默认 (5, 3)。
    """
    if variant not in ("little", "big"):
        raise DomainError(f"未知变体: {variant}", ["可选 little 或 big"])
    gamma = None
    if variant == "little":
        H = 1.0 if H is None else H
        if a is None or b is None:
            params = choose_params(H)
            a, b, lam = params.a, params.b, params.lam
        lam = 0.99 * H if lam is None else lam
        check_little_lip_hypothesis(a, b, H)
        gamma = gamma_constant(a, b, lam)
        if not gamma > 0:
            raise DomainError(f"γ(λ={lam}) = {gamma:.6g} ≤ 0")
    else:
        a, b = (5, 3) if a is None or b is None else (a, b)
        if not b > 2:
            raise DomainError(f"大 Lip 变体要求 hypothesis b > 2: b={b}")
    if not a > b:
        raise DomainError(f"需要 a > b: a={a}, b={b}")

    alpha = (a - b) / a
    h = tw_for_space(space, a, b)
    g = cutoff(space, region, alpha)
    get_logger().info("合成函数已组装", variant=variant, a=a, b=b, alpha=alpha, G=region.describe())
    return SynthFunction(alpha, g, h, region, variant, lam, gamma, H)


# ----------------------------------------------------------------------
# 验证
# ----------------------------------------------------------------------

@dataclass
class SynthReport:
    F_max_Lip: Optional[float]
    IntF_max_LLip: Optional[float]
    G_min_growth: Optional[float]
    G_flagged: int
    collar: float
    samples: Dict[str, int]
    excluded: int
    G_scale_checks: int = 0
    G_min_bound_margin: Optional[float] = None
    G_nesting_violations: int = 0
    failures: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> Dict[str, Any]:
        return {
            "F_max_Lip": self.F_max_Lip,
            "IntF_max_LLip": self.IntF_max_LLip,
            "G_min_growth": self.G_min_growth,
            "G_flagged": self.G_flagged,
            "G_scale_checks": self.G_scale_checks,
            "G_min_bound_margin": self.G_min_bound_margin,
            "G_nesting_violations": self.G_nesting_violations,
            "collar": self.collar,
            "samples": dict(self.samples),
            "excluded": self.excluded,
            "failures": list(self.failures),
            "passed": self.passed,
        }


def default_verify_schedule(sf: SynthFunction, count: int = 8) -> List[float]:
    return [float(sf.a) ** (-k) for k in range(1, count + 1)]


def sample_regions(sf: SynthFunction, rng: np.random.Generator, count: int,
                   collar: Optional[float] = None, max_draws: int = 100_000):
    """抽样 F、G、Int F 点（排除 ∂G 的环带），返回 (F, G, IntF, excluded)"""
    collar = 10 * sf.space.resolution if collar is None else collar
    region = sf.region
    F: List[Any] = []
    G: List[Any] = []
    want_F = 0 if region.F_empty else count
    want_G = 0 if region.is_empty else count
    excluded = draws = 0
    while (len(F) < want_F or len(G) < want_G) and draws < max_draws:
        batch = sf.space.random_points(rng, 256)
        for p in batch:
            draws += 1
            if region.boundary_distance(p) < collar:
                excluded += 1
            elif region.contains(p):
                if len(G) < want_G:
                    G.append(p)
            elif len(F) < want_F:
                F.append(p)
    IntF = [p for p in F if region.dist_to_G(p) > collar]
    return F, G, IntF, excluded


def little_lip_floor(sf: SynthFunction, x: PointRef, r: float) -> float:
    """
    G 点上 Lip^r f(x) 的保证下界 g(x)·(γ/a)·b^{n(r)} − 1

    来自 |f(u)−f(x)| ≥ g(x)|h(u)−h(x)| − |h(u)|·|g(u)−g(x)| 与 |h|·Lip g ≤ 1。
    """
    if sf.gamma is None:
        raise DomainError("只有小 lip 变体有逐尺度下界")
    n = scale_index(sf.a, r)
    return float(sf.g(np.array([x]))[0]) * sf.gamma / sf.a * sf.b ** n - 1


def verify_prescribed_sets(sf: SynthFunction, samples_F: Sequence[PointRef], samples_G: Sequence[PointRef],
                           samples_IntF: Sequence[PointRef], threshold: float = DEFAULT_THRESHOLD,
                           collar: Optional[float] = None, r_schedule: Optional[Sequence[float]] = None,
                           budget: int = DEFAULT_VERIFY_BUDGET, threads: int = 1,
                           excluded: int = 0) -> SynthReport:
    """
    (1) F 上 Lip 估计 ≤ 1；(2) Int F 上 r ≤ d(x,G)/2 的 𝕃ip^r 估计 ≤ 1；
    (3) G 上 lip 估计触发发散标志（大 Lip 变体检查 Lip 估计），且 ℓ∞ ⊆ L∞ ⊆ 𝕃∞ 的标志嵌套；
    小 lip 变体在 r < min(1, RH_λ(x)) 的每个尺度上还要求 Lip^r f(x) ≥ little_lip_floor
    """
    space = sf.space
    collar = 10 * space.resolution if collar is None else collar
    sched = list(r_schedule) if r_schedule is not None else default_verify_schedule(sf)
    radii = sorted({float(r) for r in sched}, reverse=True)
    region = sf.region
    failures: List[Dict[str, Any]] = []

    def lip_on_F(x):
        return estimate_Lip(sf, space, x, sched, threshold, budget)

    def llip_on_intF(x):
        cap = region.dist_to_G(x) / 2
        local = [r for r in sched if r <= cap] or [min(cap, sched[0])]
        return estimate_LLip(sf, space, x, local, threshold, budget)

    def hermetic_radius(x) -> float:
        try:
            return radius_of_hermeticity(space, x, sf.lam, H=sf.H)
        except ResolutionError:
            get_logger().warning("G 点找不到密闭半径，跳过逐尺度下界", x=space.jsonable(x))
            return 0.0

    def growth_on_G(x):
        rh = hermetic_radius(x) if sf.variant == "little" else None
        return estimate_all(sf, space, x, sched, threshold, budget), rh

    F_est = ordered_map(lip_on_F, list(samples_F), threads)
    for x, est in zip(samples_F, F_est):
        if est.value > 1 + BOUND_TOL:
            failures.append({"set": "F", "x": space.jsonable(x), "value": est.value})
    I_est = ordered_map(llip_on_intF, list(samples_IntF), threads)
    for x, est in zip(samples_IntF, I_est):
        if est.value > 1 + BOUND_TOL:
            failures.append({"set": "IntF", "x": space.jsonable(x), "value": est.value})

    G_res = ordered_map(growth_on_G, list(samples_G), threads)
    growth: List[float] = []
    margins: List[float] = []
    flagged = nesting_violations = 0
    for x, (suite, rh) in zip(samples_G, G_res):
        xj = space.jsonable(x)
        est = suite.lip if sf.variant == "little" else suite.Lip
        tail = est.trace[-3:]
        rates = [q / p for p, q in zip(tail, tail[1:]) if p > 0]
        growth.append(min(rates) if rates else 0.0)
        if est.diverged:
            flagged += 1
        else:
            failures.append({"set": "G", "x": xj, "check": "divergence", "trace": est.trace})
        if not suite.flags_nested():
            nesting_violations += 1
            failures.append({"set": "G", "x": xj, "check": "nesting",
                             "flags": [suite.lip.diverged, suite.Lip.diverged, suite.LLip.diverged]})
        if rh is None:
            continue
        # lip 估计的 trace 即各半径上的 Lip^r f(x)
        for r, value in zip(radii, suite.lip.trace):
            if not r < min(1.0, rh):
                continue
            floor = little_lip_floor(sf, x, r)
            margins.append(value - floor)
            if value < floor - BOUND_TOL * max(1.0, abs(floor)):
                failures.append({"set": "G", "x": xj, "check": "scale_bound",
                                 "r": r, "value": value, "bound": floor})

    if failures:
        get_logger().error("规定集合验证存在失败点", count=len(failures))
    return SynthReport(
        F_max_Lip=max((e.value for e in F_est), default=None),
        IntF_max_LLip=max((e.value for e in I_est), default=None),
        G_min_growth=min(growth, default=None),
        G_flagged=flagged,
        collar=collar,
        samples={"F": len(samples_F), "G": len(samples_G), "IntF": len(samples_IntF)},
        excluded=excluded,
        G_scale_checks=len(margins),
        G_min_bound_margin=min(margins, default=None),
        G_nesting_violations=nesting_violations,
        failures=failures)
