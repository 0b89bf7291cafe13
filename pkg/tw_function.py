#!/usr/bin/env python3

"""
Takagi–van der Waerden 函数
f(x) = Σ_{k ≥ index_start} b^k · d(x, S_k)，S_k 为尺度 a^{-k} 的极大分离网。

隐式整数格点层级上每一项用整数模运算精确计算：
x = N/Q 时 d(x, a^{-k}ℤ) = min(r_k, Q − r_k) / (Q·a^k)，r_k = N·a^k mod Q。
"""
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from epsilon_nets import NetHierarchy, build_hierarchy, max_feasible_depth
from metric_space import PointRef, SpaceKind
from tvdw_errors import DomainError, ResourceError

DEFAULT_TOL = 1e-12
MAX_TERMS = 10_000


def _check_ab(a: float, b: float):
    if not b > 0:
        raise DomainError(f"需要 b > 0: b={b}")
    if not a > b:
        raise DomainError(f"需要 a > b: a={a}, b={b}", ["TW 函数类型 (a,b) 要求 a > b > 0"])


def remainder_bound(a: float, b: float, n: int) -> float:
    """余项界 r_n ≤ b^n / ((a−b)·a^{n−1})"""
    _check_ab(a, b)
    if n < 0:
        raise DomainError(f"n 必须非负: {n}")
    return (a / (a - b)) * (b / a) ** n


def tail_increment_bound(a: float, b: float, n: int) -> float:
    """|r_n(u) − r_n(x)| ≤ 2·remainder_bound(a, b, n)"""
    return 2.0 * remainder_bound(a, b, n)


def partial_sum_lipschitz(b: float, n: int) -> float:
    """部分和 s_n 的 Lipschitz 常数 b^n/(b−1)（b > 1）"""
    if not b > 1:
        raise DomainError(f"部分和 Lipschitz 界需要 b > 1: b={b}")
    return b ** n / (b - 1)


def terms_for_tol(a: float, b: float, tol: float, start: int = 0) -> int:
    """满足 remainder_bound(a,b,n) ≤ tol 的最小 n ≥ start"""
    if not tol > 0:
        raise DomainError(f"tol 必须为正: {tol}")
    _check_ab(a, b)
    guess = math.log(tol * (a - b) / a) / math.log(b / a)
    n = max(start, math.ceil(guess) if math.isfinite(guess) else start)
    while remainder_bound(a, b, n) > tol:
        n += 1
    while n > start and remainder_bound(a, b, n - 1) <= tol:
        n -= 1
    if n > MAX_TERMS:
        raise ResourceError(f"容差 {tol:g} 需要 {n} 项，超出上限 {MAX_TERMS}",
                            ["放宽 tol", "或选择 b/a 更小的类型"])
    return n


@dataclass
class EvalResult:
    """截断求值结果"""
    value: float
    terms_used: int
    error_bound: float

    def to_dict(self) -> Dict[str, Any]:
        return {"value": self.value, "terms_used": self.terms_used, "error_bound": self.error_bound}


class _Compensated:
    """逐元素 Neumaier 补偿求和"""

    def __init__(self, size: int):
        self.s = np.zeros(size)
        self.c = np.zeros(size)

    def add(self, t: np.ndarray):
        s = self.s + t
        big = np.abs(self.s) >= np.abs(t)
        self.c += np.where(big, (self.s - s) + t, (t - s) + self.s)
        self.s = s

    def total(self) -> np.ndarray:
        return self.s + self.c


def _common_denominator(values: Iterable[Any]) -> Tuple[np.ndarray, int]:
    """把一批实数（float 或 Fraction）精确写成 N_j / Q"""
    fracs = [Fraction(v) for v in values]
    q = 1
    for f in fracs:
        q = math.lcm(q, f.denominator)
    nums = np.array([f.numerator * (q // f.denominator) for f in fracs] or [0], dtype=object)
    return nums[:len(fracs)], q


def _lattice_sum(nums: np.ndarray, q: int, a: int, b: float, start: int, stop: int) -> np.ndarray:
    """Σ_{k=start}^{stop−1} b^k d(N/Q, a^{-k}ℤ)，逐项精确再补偿求和"""
    acc = _Compensated(len(nums))
    if stop <= start or len(nums) == 0:
        return acc.total()
    ratio = b / a
    r = (nums * pow(a, start, q)) % q
    for k in range(start, stop):
        m = np.minimum(r, q - r)
        acc.add(ratio ** k * (m / q).astype(float))
        r = (r * a) % q
    return acc.total()


def _lattice_increment_sum(x_num: int, d_nums: np.ndarray, q: int, a: int, b: float,
                           start: int, stop: int) -> np.ndarray:
    """Σ b^k (φ_k(x+δ_j) − φ_k(x))，分子差为精确整数"""
    acc = _Compensated(len(d_nums))
    if stop <= start or len(d_nums) == 0:
        return acc.total()
    ratio = b / a
    scale = pow(a, start, q)
    ru = ((x_num + d_nums) * scale) % q
    rx = (x_num * scale) % q
    for k in range(start, stop):
        mu = np.minimum(ru, q - ru)
        mx = min(rx, q - rx)
        acc.add(ratio ** k * ((mu - mx) / q).astype(float))
        ru = (ru * a) % q
        rx = (rx * a) % q
    return acc.total()


@dataclass(eq=False)
class TWFunction:
    """
    (a,b) 型 Takagi–van der Waerden 函数

    index_start=0 对应一般定义 s_n = Σ_{k=0}^{n−1}；index_start=1 对应标准形式 f_{a,b}。
    """
    a: float
    b: float
    hierarchy: NetHierarchy
    index_start: int = 0

    def __post_init__(self):
        _check_ab(self.a, self.b)
        if self.index_start not in (0, 1):
            raise DomainError(f"index_start 只能是 0 或 1: {self.index_start}")
        if not math.isclose(self.hierarchy.a, self.a, rel_tol=1e-12):
            raise DomainError(f"层级底数 {self.hierarchy.a} 与 a={self.a} 不一致")

    @property
    def space(self):
        return self.hierarchy.space

    @property
    def monotone(self) -> bool:
        return self.hierarchy.monotone

    @property
    def exact_lattice(self) -> bool:
        """整数格点且无需区间截断（格点直线或整数端点区间）"""
        if not self.hierarchy.exact_lattice:
            return False
        space = self.space
        if space.kind is SpaceKind.LATTICE_LINE:
            return True
        lo, hi = space.params["lo"], space.params["hi"]
        return float(lo).is_integer() and float(hi).is_integer()

    def describe(self) -> str:
        return f"tw:{self.a:g},{self.b:g},{self.index_start}"

    # ------------------------------------------------------------------
    # 部分和
    # ------------------------------------------------------------------

    def _check_depth(self, n: int):
        h = self.hierarchy
        if not (h.implicit or h.saturated) and n - 1 > h.depth:
            raise ResourceError(
                f"需要 {n} 项，但显式层级只有 {self.hierarchy.depth + 1} 层",
                ["区间/格点直线上使用整数 a 的隐式格点层级（build_hierarchy(..., implicit=True)）",
                 "或放宽 tol"],
                max_feasible_depth=self.hierarchy.depth)

    def partial_sums(self, xs: Sequence[PointRef], n: int) -> np.ndarray:
        """批量 s_n(x) = Σ_{k=index_start}^{n−1} b^k φ_k(x)"""
        self._check_depth(n)
        pts = [self.space.point(x) for x in xs]
        if self.exact_lattice:
            nums, q = _common_denominator(self._exact_points(xs, pts))
            return _lattice_sum(nums, q, int(self.a), self.b, self.index_start, n)
        acc = _Compensated(len(pts))
        arr = np.asarray(pts) if self.space.kind is not SpaceKind.BOX else np.vstack(pts)
        # 饱和层级更深的项在载体上为 0
        top = min(n, self.hierarchy.depth + 1) if self.hierarchy.saturated else n
        for k in range(self.index_start, top):
            acc.add(self.b ** k * self.hierarchy.level(k).distances(arr))
        return acc.total()

    @staticmethod
    def _exact_points(raw: Sequence[PointRef], validated: Sequence[Any]) -> list:
        """Fraction 输入保持精确，其余用校验后的浮点值"""
        return [r if isinstance(r, Fraction) else v for r, v in zip(raw, validated)]

    def partial_sum(self, x: PointRef, n: int) -> float:
        return float(self.partial_sums([x], n)[0])

    # ------------------------------------------------------------------
    # 求值
    # ------------------------------------------------------------------

    def terms_for(self, tol: float) -> int:
        return terms_for_tol(self.a, self.b, tol, self.index_start)

    def evaluate(self, x: PointRef, tol: float = DEFAULT_TOL) -> EvalResult:
        """截断到余项界 ≤ tol 的最少项数，|value − f(x)| ≤ tol"""
        n = self.terms_for(tol)
        return EvalResult(self.partial_sum(x, n), n, remainder_bound(self.a, self.b, n))

    def values(self, xs: Sequence[PointRef], tol: float = DEFAULT_TOL) -> np.ndarray:
        return self.partial_sums(xs, self.terms_for(tol))

    def __call__(self, xs) -> np.ndarray:
        """向量化求值（默认容差 DEFAULT_TOL）"""
        if self.space.kind is SpaceKind.BOX:
            pts = list(np.asarray(xs, dtype=float).reshape(-1, self.space.dim))
        elif self.space.is_indexed:
            pts = [int(i) for i in np.atleast_1d(xs)]
        else:
            pts = [float(v) for v in np.atleast_1d(np.asarray(xs, dtype=float))]
        return self.values(pts)

    # ------------------------------------------------------------------
    # 增量
    # ------------------------------------------------------------------

    def increment(self, u: PointRef, x: PointRef, tol: float = DEFAULT_TOL) -> EvalResult:
        """f(u) − f(x)，误差界 ≤ tol"""
        if self.exact_lattice:
            xu, xx = self._exact_points([u, x], [self.space.point(u), self.space.point(x)])
            inc, n = self._exact_increments(xx, [Fraction(xu) - Fraction(xx)], tol)
            return EvalResult(float(inc[0]), n, tail_increment_bound(self.a, self.b, n))
        n = self.terms_for(tol / 2)
        vals = self.partial_sums([u, x], n)
        return EvalResult(float(vals[0] - vals[1]), n, 2 * remainder_bound(self.a, self.b, n))

    def _exact_increments(self, x: float, offsets: Sequence[Any], tol: float) -> Tuple[np.ndarray, int]:
        n = terms_for_tol(self.a, self.b, tol / 2, self.index_start)
        nums, q = _common_denominator([x] + list(offsets))
        inc = _lattice_increment_sum(nums[0], nums[1:], q, int(self.a), self.b, self.index_start, n)
        return inc, n

    def offset_increments(self, x: PointRef, offsets: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
        """
        f(x+δ) − f(x) 对一批偏移 δ（一维连续统）

        整数格点层级上按有理数 x+δ 精确计算，不经过浮点 x+δ 的舍入。
        """
        x = self.space.point(x)
        offsets = np.asarray(offsets, dtype=float)
        if self.exact_lattice:
            return self._exact_increments(x, list(offsets), tol)[0]
        n = self.terms_for(tol / 2)
        vals = self.partial_sums([x] + list(x + offsets), n)
        return vals[1:] - vals[0]


def eval_standard_lattice(a: float, b: float, x: PointRef, tol: float, index_start: int = 0) -> float:
    """
    标准格点形式 Σ_{k ≥ index_start} (b/a)^k d(a^k x, ℤ) 的独立预言机

    全程 Fraction 精确求和，截断规则与 TWFunction.evaluate 相同。
    """
    _check_ab(a, b)
    if index_start not in (0, 1):
        raise DomainError(f"index_start 只能是 0 或 1: {index_start}")
    n = terms_for_tol(a, b, tol, index_start)
    fx, fa, fb = Fraction(x), Fraction(a), Fraction(b)
    total = Fraction(0)
    for k in range(index_start, n):
        y = fx * fa ** k
        frac = y - math.floor(y)
        total += (fb / fa) ** k * min(frac, 1 - frac)
    return float(total)


def make_tw(space, a: float, b: float, depth: int = 0, index_start: int = 0,
            implicit: Optional[bool] = None, monotone: bool = True) -> TWFunction:
    """便捷构造：在 space 上建层级并返回 TW 函数"""
    hierarchy = build_hierarchy(space, a, depth, monotone=monotone, implicit=implicit)
    return TWFunction(float(a), float(b), hierarchy, index_start)


def tw_for_space(space, a: float, b: float, index_start: int = 0, depth: Optional[int] = None,
                 monotone: bool = True) -> TWFunction:
    """
    按空间选层级：一维连续统 + 整数 a 用隐式格点；其余空间取分辨率允许的最大深度，
    有限空间取到最小间距尺度为止
    """
    if depth is None and space.kind in (SpaceKind.INTERVAL, SpaceKind.LATTICE_LINE) and float(a).is_integer():
        return make_tw(space, a, b, index_start=index_start, implicit=True, monotone=monotone)
    if depth is None:
        _check_ab(a, b)
        depth = max_feasible_depth(space, a)
        if depth is None:
            gap = space.min_positive_gap()
            depth = max(1, math.ceil(math.log(1 / gap) / math.log(a))) if math.isfinite(gap) else 1
        depth = max(depth, 0)
    return make_tw(space, a, b, depth=depth, index_start=index_start, monotone=monotone)
