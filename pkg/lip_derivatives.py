#!/usr/bin/env python3

"""
Lipschitz 导数的采样估计
Lip^r、Lip^r_+、Lip_r、lip_r、𝕃ip^r 以及 r → 0 的极限代理 Lip、lip、𝕃ip。

所有球上上确界都取自确定性样本，因此给出的是下界（bound_side=lower）；
空球按 sup∅ = 0 处理。一维连续统上若函数提供 offset_increments，
差商直接用精确偏移 δ 计算，避免 x+δ 的浮点舍入。
"""
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import pdist

from metric_space import MetricSpace, PointRef, SpaceKind
from tvdw_errors import DomainError, PreconditionError

DEFAULT_BUDGET = 256
DEFAULT_THRESHOLD = 1e3
# 偏移增量的绝对容差 = INCREMENT_RTOL · 半径
INCREMENT_RTOL = 1e-9
MAX_PAIR_POINTS = 1024


class Functional(Enum):
    """Lipschitz 泛函"""
    LIP_R_BALL = "Lip_r_ball"
    LIP_R_CLOSED = "Lip_r_closed"
    LIP_R_SUP = "Lip_r_sup"
    LIP_R_INF = "lip_r_inf"
    LIP_LIMSUP = "Lip_limsup"
    LIP_LIMINF = "lip_liminf"
    LLIP_LOCAL = "LLip_local"


class BoundSide(Enum):
    LOWER = "lower"
    UPPER = "upper"
    TWO_SIDED = "two_sided"


@dataclass
class DerivativeEstimate:
    """单点单泛函的采样估计"""
    functional: Functional
    point: Any
    radius: Any
    value: float
    witness: Any = None
    bound_side: BoundSide = BoundSide.LOWER
    diverged: bool = False
    tolerance: float = 0.0
    trace: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "functional": self.functional.value,
            "point": self.point,
            "radius": list(self.radius) if isinstance(self.radius, tuple) else self.radius,
            "value": self.value,
            "witness": self.witness,
            "bound_side": self.bound_side.value,
            "diverged": self.diverged,
            "tolerance": self.tolerance,
            "trace": list(self.trace),
        }

    def csv_row(self) -> List[Any]:
        radius = self.radius[1] if isinstance(self.radius, tuple) else self.radius
        return [self.point, self.functional.value, radius, self.value, self.diverged, self.witness]


CSV_COLUMNS = ["x", "functional", "r", "value", "diverged", "witness"]


# ----------------------------------------------------------------------
# 内置函数
# ----------------------------------------------------------------------

class BuiltinFunction:
    """内置测试函数：identity、const[:c]、abs、square、dist:<x0>"""

    def __init__(self, name: str, space: MetricSpace, constant: float = 0.0, center: Any = None):
        self.name = name
        self.space = space
        self.constant = constant
        self.center = center
        if name in ("identity", "abs", "square") and not space.is_linear:
            raise DomainError(f"内置函数 {name} 只适用于一维空间")

    def describe(self) -> str:
        if self.name == "const":
            return f"builtin:const:{self.constant:g}"
        if self.name == "dist":
            return f"builtin:dist:{self.space.jsonable(self.center)}"
        return f"builtin:{self.name}"

    def __call__(self, pts) -> np.ndarray:
        if self.name == "const":
            return np.full(len(pts), self.constant, dtype=float)
        if self.name == "dist":
            return self.space.distances_from(self.center, pts)
        x = np.asarray(pts, dtype=float)
        if self.name == "identity":
            return x
        if self.name == "abs":
            return np.abs(x)
        return x * x

    def offset_increments(self, x: float, offsets: np.ndarray, tol: float = 0.0) -> np.ndarray:
        d = np.asarray(offsets, dtype=float)
        if self.name == "const":
            return np.zeros_like(d)
        if self.name == "identity":
            return d.copy()
        if self.name == "square":
            return d * (2 * x + d)
        s = x if self.name == "abs" else x - float(self.center)
        if s > 0:
            return np.where(d >= -s, d, -2 * s - d)
        if s < 0:
            return np.where(d <= -s, -d, 2 * s + d)
        return np.abs(d)


def builtin(spec: str, space: MetricSpace) -> BuiltinFunction:
    """解析 identity | const[:c] | abs | square | dist:<x0>"""
    name, _, arg = spec.partition(":")
    if name == "const":
        return BuiltinFunction("const", space, constant=float(arg) if arg else 0.0)
    if name == "dist":
        if not arg:
            raise DomainError("dist 需要中心点，例如 dist:0.5")
        center = int(arg) if space.is_indexed else float(arg)
        return BuiltinFunction("dist", space, center=space.point(center))
    if name in ("identity", "abs", "square"):
        return BuiltinFunction(name, space)
    raise DomainError(f"未知内置函数: {spec}", ["可选: identity, const[:c], abs, square, dist:<x0>"])


def distance_function(space: MetricSpace, x: PointRef) -> BuiltinFunction:
    """d_x(u) = |u − x|"""
    return BuiltinFunction("dist", space, center=space.point(x))


# ----------------------------------------------------------------------
# 球样本与增量
# ----------------------------------------------------------------------

@dataclass
class BallData:
    """球样本：点、到 x 的距离、增量 f(u) − f(x)；offsets 仅在精确偏移路径上存在"""
    points: np.ndarray
    dists: np.ndarray
    incs: np.ndarray
    offsets: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return int(len(self.dists))


def _single(space: MetricSpace, x: Any) -> np.ndarray:
    if space.kind is SpaceKind.BOX:
        return np.asarray(x, dtype=float).reshape(1, -1)
    if space.is_indexed:
        return np.array([x], dtype=int)
    return np.array([x], dtype=float)


def uses_offsets(f: Callable, space: MetricSpace) -> bool:
    return space.is_continuum and hasattr(f, "offset_increments")


def ball_data(f: Callable, space: MetricSpace, x: PointRef, r: float,
              budget: int = DEFAULT_BUDGET, closed: bool = False) -> BallData:
    """采样 B(x,r)（closed 时为 B[x,r]）并计算增量"""
    x = space.point(x)
    if uses_offsets(f, space):
        offs = space.ball_offsets(x, r, budget, closed)
        if offs.size == 0:
            return BallData(offs, offs, np.zeros(0), offs)
        incs = np.asarray(f.offset_increments(x, offs, tol=INCREMENT_RTOL * r), dtype=float)
        return BallData(x + offs, np.abs(offs), incs, offs)
    pts, dists = space.ball_with_distances(x, r, budget, closed)
    if len(pts) == 0:
        return BallData(pts, dists, np.zeros(0))
    vals = np.asarray(f(pts), dtype=float)
    fx = float(np.asarray(f(_single(space, x)), dtype=float)[0])
    return BallData(pts, dists, vals - fx)


def _plain(space: MetricSpace, p: Any) -> Any:
    if isinstance(p, np.ndarray):
        return [float(v) for v in p]
    if space.is_indexed:
        return int(p)
    return float(p)


def _ball_sup(data: BallData, r: float) -> Tuple[float, int]:
    if len(data) == 0:
        return 0.0, -1
    q = np.abs(data.incs) / r
    j = int(np.argmax(q))
    return float(q[j]), j


def lip_r_ball(f: Callable, space: MetricSpace, x: PointRef, r: float,
               budget: int = DEFAULT_BUDGET) -> DerivativeEstimate:
    """Lip^r f(x) = sup_{u∈B(x,r)} |f(u)−f(x)|/r（开球，下界）"""
    data = ball_data(f, space, x, r, budget)
    value, j = _ball_sup(data, r)
    witness = _plain(space, data.points[j]) if j >= 0 else None
    return DerivativeEstimate(Functional.LIP_R_BALL, space.jsonable(x), r, value, witness)


def lip_r_closed(f: Callable, space: MetricSpace, x: PointRef, r: float,
                 budget: int = DEFAULT_BUDGET) -> DerivativeEstimate:
    """Lip^r_+ f(x)：闭球 B[x,r] 版本"""
    data = ball_data(f, space, x, r, budget, closed=True)
    value, j = _ball_sup(data, r)
    witness = _plain(space, data.points[j]) if j >= 0 else None
    return DerivativeEstimate(Functional.LIP_R_CLOSED, space.jsonable(x), r, value, witness)


# ----------------------------------------------------------------------
# 半径网格
# ----------------------------------------------------------------------

def default_rho_grid(r: float, ratio: float = 0.9, count: int = 16) -> List[float]:
    """(0, r) 内的降序几何网格 r·ratio^j，j = 1..count"""
    return [r * ratio ** j for j in range(1, count + 1)]


def fine_rho_grid(r: float, ratio: float = 0.99, rho_min_fraction: float = 1e-3) -> List[float]:
    """逼近 r 的细几何网格，延伸到 r·rho_min_fraction"""
    count = max(1, math.ceil(math.log(rho_min_fraction) / math.log(ratio)))
    return default_rho_grid(r, ratio, count)


def _validate_rho_grid(r: float, rho_grid: Optional[Sequence[float]]) -> List[float]:
    grid = default_rho_grid(r) if rho_grid is None else [float(p) for p in rho_grid]
    if not grid:
        raise PreconditionError("rho_grid 为空", ["提供 (0, r) 内的降序几何网格"])
    if any(not (0 < p < r) for p in grid):
        raise PreconditionError(f"rho_grid 必须位于 (0, r) 内: r={r}")
    return sorted(grid, reverse=True)


def default_schedule(f: Callable, count: int = 12) -> List[float]:
    """默认半径序列：TW 函数用 a^{-k}（k=1..count），其余用 2^{-k}（k=3..14）"""
    a = getattr(f, "a", None)
    if a is not None and hasattr(f, "hierarchy"):
        return [float(a) ** (-k) for k in range(1, count + 1)]
    return [2.0 ** (-k) for k in range(3, 15)]


def _grid_coarseness(grid: Sequence[float]) -> float:
    if len(grid) < 2:
        return 1.0
    return float(max(1 - grid[i + 1] / grid[i] for i in range(len(grid) - 1)))


class _RadiusCache:
    """同一 (f, x) 下按半径缓存球样本"""

    def __init__(self, f: Callable, space: MetricSpace, x: PointRef, budget: int):
        self.f, self.space, self.x, self.budget = f, space, space.point(x), budget
        self.cache: Dict[Tuple[float, bool], BallData] = {}

    def data(self, rho: float, closed: bool = False) -> BallData:
        key = (rho, closed)
        if key not in self.cache:
            self.cache[key] = ball_data(self.f, self.space, self.x, rho, self.budget, closed)
        return self.cache[key]

    def value(self, rho: float, closed: bool = False) -> Tuple[float, Any]:
        data = self.data(rho, closed)
        v, j = _ball_sup(data, rho)
        return v, (_plain(self.space, data.points[j]) if j >= 0 else None)


def lip_big_r(f: Callable, space: MetricSpace, x: PointRef, r: float,
              rho_grid: Optional[Sequence[float]] = None, budget: int = DEFAULT_BUDGET,
              closed: bool = False, _cache: Optional[_RadiusCache] = None) -> DerivativeEstimate:
    """Lip_r f(x) = sup_{0<ρ<r} Lip^ρ f(x)，网格上取最大（下界）"""
    grid = _validate_rho_grid(r, rho_grid)
    cache = _cache or _RadiusCache(f, space, x, budget)
    trace, best, witness = [], -1.0, None
    for rho in grid:
        v, w = cache.value(rho, closed)
        trace.append(v)
        if v > best:
            best, witness = v, {"rho": rho, "u": w}
    return DerivativeEstimate(Functional.LIP_R_SUP, space.jsonable(x), r, best, witness,
                              BoundSide.LOWER, tolerance=_grid_coarseness(grid), trace=trace)


def lip_small_r(f: Callable, space: MetricSpace, x: PointRef, r: float,
                rho_grid: Optional[Sequence[float]] = None, budget: int = DEFAULT_BUDGET,
                _cache: Optional[_RadiusCache] = None) -> DerivativeEstimate:
    """lip_r f(x) = inf_{0<ρ<r} Lip^ρ f(x)，网格上取最小（双侧，容差为网格粗细）"""
    grid = _validate_rho_grid(r, rho_grid)
    cache = _cache or _RadiusCache(f, space, x, budget)
    trace, best, witness = [], math.inf, None
    for rho in grid:
        v, w = cache.value(rho)
        trace.append(v)
        if v < best:
            best, witness = v, {"rho": rho, "u": w}
    return DerivativeEstimate(Functional.LIP_R_INF, space.jsonable(x), r, best, witness,
                              BoundSide.TWO_SIDED, tolerance=_grid_coarseness(grid), trace=trace)


# ----------------------------------------------------------------------
# 成对差商 𝕃ip^r
# ----------------------------------------------------------------------

def _pair_distances(space: MetricSpace, data: BallData, x: Any) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """样本 ∪ {x} 的值与两两距离（压缩形式），以及行列下标"""
    n = len(data)
    keep = np.arange(n)
    if n > MAX_PAIR_POINTS:
        keep = np.unique(np.linspace(0, n - 1, MAX_PAIR_POINTS).round().astype(int))
    vals = np.concatenate([[0.0], data.incs[keep]])
    iu, ju = np.triu_indices(len(vals), 1)
    if data.offsets is not None:
        pos = np.concatenate([[0.0], data.offsets[keep]])
        dists = np.abs(pos[iu] - pos[ju])
    elif space.kind is SpaceKind.FINITE_MATRIX:
        idx = np.concatenate([[x], np.asarray(data.points, dtype=int)[keep]])
        dists = space.params["distances"][idx[iu], idx[ju]]
    else:
        if space.kind is SpaceKind.POINT_CLOUD:
            coords = space.params["points"][np.concatenate([[x], np.asarray(data.points, dtype=int)[keep]])]
        elif space.kind is SpaceKind.BOX:
            coords = np.vstack([np.asarray(x, dtype=float).reshape(1, -1), data.points[keep]])
        else:
            coords = np.concatenate([[x], np.asarray(data.points, dtype=float)[keep]]).reshape(-1, 1)
        dists = pdist(coords)
    labels = np.concatenate([[-1], keep])
    return vals, dists, np.stack([labels[iu], labels[ju]], axis=1)


def llip_r_pairwise(f: Callable, space: MetricSpace, x: PointRef, r: float,
                    budget: int = DEFAULT_BUDGET, rho_grid: Optional[Sequence[float]] = None,
                    _cache: Optional[_RadiusCache] = None) -> DerivativeEstimate:
    """
    𝕃ip^r f(x) = sup_{u≠v∈B(x,r)} |f(u)−f(v)|/|u−v|（下界）

    样本 B(x,r) ∪ {x} 的全部点对，再加上 rho_grid 各球样本与 x 的星形点对，
    因而在同一网格上恒有 Lip_r ≤ 𝕃ip^r。
    """
    xp = space.point(x)
    cache = _cache or _RadiusCache(f, space, xp, budget)
    data = cache.data(r)
    best, witness = 0.0, None
    if len(data):
        vals, dists, pairs = _pair_distances(space, data, xp)
        iu, ju = np.triu_indices(len(vals), 1)
        ok = dists > 0
        if np.any(ok):
            slopes = np.zeros_like(dists)
            slopes[ok] = np.abs(vals[iu[ok]] - vals[ju[ok]]) / dists[ok]
            j = int(np.argmax(slopes))
            best = float(slopes[j])
            a, b = pairs[j]
            witness = [space.jsonable(xp) if a < 0 else _plain(space, data.points[a]),
                       _plain(space, data.points[b])]
    for rho in ([] if rho_grid is None else _validate_rho_grid(r, rho_grid)):
        sub = cache.data(rho)
        if len(sub):
            star = np.abs(sub.incs) / sub.dists
            j = int(np.argmax(star))
            if star[j] > best:
                best = float(star[j])
                witness = [space.jsonable(xp), _plain(space, sub.points[j])]
    return DerivativeEstimate(Functional.LLIP_LOCAL, space.jsonable(xp), r, best, witness)


# ----------------------------------------------------------------------
# 极限代理
# ----------------------------------------------------------------------

def diverges(trace: Sequence[float], threshold: float) -> bool:
    """最后三个值不减且最后一个超过阈值"""
    if not trace:
        return False
    tail = list(trace[-3:])
    return all(p <= q for p, q in zip(tail, tail[1:])) and tail[-1] > threshold


def _schedule(f: Callable, r_schedule: Optional[Sequence[float]]) -> List[float]:
    sched = default_schedule(f) if r_schedule is None else [float(r) for r in r_schedule]
    if not sched or any(r <= 0 for r in sched):
        raise PreconditionError("r_schedule 必须是非空的正半径序列")
    return sorted(set(sched), reverse=True)


def _tail_start(n: int) -> int:
    return n // 2


def estimate_lip(f: Callable, space: MetricSpace, x: PointRef,
                 r_schedule: Optional[Sequence[float]] = None, threshold: float = DEFAULT_THRESHOLD,
                 budget: int = DEFAULT_BUDGET, _cache: Optional[_RadiusCache] = None) -> DerivativeEstimate:
    """lip f(x) = liminf Lip^r f(x)：半径序列后半段 Lip^{r_k} 的最小值"""
    sched = _schedule(f, r_schedule)
    cache = _cache or _RadiusCache(f, space, x, budget)
    trace = [cache.value(r)[0] for r in sched]
    tail = trace[_tail_start(len(trace)):]
    k = _tail_start(len(trace)) + int(np.argmin(tail))
    return DerivativeEstimate(Functional.LIP_LIMINF, space.jsonable(x), (sched[-1], sched[0]),
                              float(tail[k - _tail_start(len(trace))]), {"r": sched[k]},
                              BoundSide.LOWER, diverged=diverges(trace, threshold), trace=trace)


def estimate_Lip(f: Callable, space: MetricSpace, x: PointRef,
                 r_schedule: Optional[Sequence[float]] = None, threshold: float = DEFAULT_THRESHOLD,
                 budget: int = DEFAULT_BUDGET, closed: bool = False,
                 _cache: Optional[_RadiusCache] = None) -> DerivativeEstimate:
    """
    Lip f(x) = inf_k Lip_{r_k} f(x)：Lip_{r_k} 取 ρ 遍历更小的调度半径，
    序列随 k 不增，取后半段的最小值
    """
    sched = _schedule(f, r_schedule)
    if len(sched) < 2:
        raise PreconditionError(f"Lip 估计至少需要两个半径: {sched}")
    cache = _cache or _RadiusCache(f, space, x, budget)
    suprema = [lip_big_r(f, space, x, r, sched[k + 1:], budget, closed, _cache=cache)
               for k, r in enumerate(sched[:-1])]
    trace = [est.value for est in suprema]
    start = _tail_start(len(trace))
    k = start + int(np.argmin(trace[start:]))
    return DerivativeEstimate(Functional.LIP_LIMSUP, space.jsonable(x), (sched[-1], sched[0]), float(trace[k]),
                              {"r": sched[k], "closed": closed, **suprema[k].witness}, BoundSide.LOWER,
                              diverged=diverges(trace, threshold), trace=trace)


def estimate_Lip_closed(f: Callable, space: MetricSpace, x: PointRef,
                        r_schedule: Optional[Sequence[float]] = None, threshold: float = DEFAULT_THRESHOLD,
                        budget: int = DEFAULT_BUDGET) -> DerivativeEstimate:
    """闭球版本 limsup Lip^r_+ f(x)"""
    return estimate_Lip(f, space, x, r_schedule, threshold, budget, closed=True)


def estimate_LLip(f: Callable, space: MetricSpace, x: PointRef,
                  r_schedule: Optional[Sequence[float]] = None, threshold: float = DEFAULT_THRESHOLD,
                  budget: int = DEFAULT_BUDGET, _cache: Optional[_RadiusCache] = None) -> DerivativeEstimate:
    """
    𝕃ip f(x) = inf_r 𝕃ip^r f(x)：取最小半径处的成对估计

    每个 r_k 的成对估计都并入更小半径样本的星形点对，序列随 k 单调不增。
    """
    sched = _schedule(f, r_schedule)
    cache = _cache or _RadiusCache(f, space, x, budget)
    trace: List[float] = []
    witness = None
    for k, r in enumerate(sched):
        est = llip_r_pairwise(f, space, x, r, budget, rho_grid=sched[k + 1:] or None, _cache=cache)
        trace.append(est.value)
        witness = est.witness
    # 并入星形点对后 𝕃ip^{r_k} 按 k 不增，最小半径处即下确界
    trace = [max(trace[k], max(trace[k + 1:], default=0.0)) for k in range(len(trace))]
    return DerivativeEstimate(Functional.LLIP_LOCAL, space.jsonable(x), (sched[-1], sched[0]),
                              float(trace[-1]), witness, BoundSide.LOWER,
                              diverged=trace[-1] > threshold, trace=trace)


@dataclass
class FunctionalSuite:
    """同一点、同一半径序列上的三个极限代理"""
    lip: DerivativeEstimate
    Lip: DerivativeEstimate
    LLip: DerivativeEstimate

    def flags_nested(self) -> bool:
        """ℓ∞ ⊆ L∞ ⊆ 𝕃∞ 的采样版本"""
        return (not self.lip.diverged or self.Lip.diverged) and (not self.Lip.diverged or self.LLip.diverged)

    def ordered(self, tol: float = 0.0) -> bool:
        return self.lip.value <= self.Lip.value + tol and self.Lip.value <= self.LLip.value + tol


def estimate_all(f: Callable, space: MetricSpace, x: PointRef,
                 r_schedule: Optional[Sequence[float]] = None, threshold: float = DEFAULT_THRESHOLD,
                 budget: int = DEFAULT_BUDGET) -> FunctionalSuite:
    """共享球样本计算 lip、Lip、𝕃ip 估计"""
    cache = _RadiusCache(f, space, x, budget)
    return FunctionalSuite(
        estimate_lip(f, space, x, r_schedule, threshold, budget, _cache=cache),
        estimate_Lip(f, space, x, r_schedule, threshold, budget, _cache=cache),
        estimate_LLip(f, space, x, r_schedule, threshold, budget, _cache=cache),
    )


def fixed_radius_suite(f: Callable, space: MetricSpace, x: PointRef, r: float,
                       rho_grid: Optional[Sequence[float]] = None,
                       budget: int = DEFAULT_BUDGET) -> Tuple[DerivativeEstimate, DerivativeEstimate, DerivativeEstimate]:
    """同一网格上的 (lip_r, Lip_r, 𝕃ip^r)"""
    grid = _validate_rho_grid(r, rho_grid)
    cache = _RadiusCache(f, space, x, budget)
    return (lip_small_r(f, space, x, r, grid, budget, _cache=cache),
            lip_big_r(f, space, x, r, grid, budget, _cache=cache),
            llip_r_pairwise(f, space, x, r, budget, rho_grid=grid, _cache=cache))


# ----------------------------------------------------------------------
# 半连续性采样检查
# ----------------------------------------------------------------------

@dataclass
class SemicontinuityReport:
    """Lip_r 下半连续、lip_r 上半连续的采样检查"""
    big_at_x: float
    small_at_x: float
    big_tail_min: float
    small_tail_max: float
    tol: float

    @property
    def lower_ok(self) -> bool:
        return self.big_tail_min >= self.big_at_x - self.tol

    @property
    def upper_ok(self) -> bool:
        return self.small_tail_max <= self.small_at_x + self.tol


def sampled_semicontinuity(f: Callable, space: MetricSpace, x: PointRef, r: float,
                           approach: Sequence[PointRef], rho_grid: Optional[Sequence[float]] = None,
                           budget: int = DEFAULT_BUDGET, tol: float = 0.05) -> SemicontinuityReport:
    """
    approach 为趋于 x 的点列；取其后半段比较
    min Lip_r(x_k) ≥ Lip_r(x) − tol 与 max lip_r(x_k) ≤ lip_r(x) + tol
    """
    if not approach:
        raise PreconditionError("approach 点列为空")
    grid = _validate_rho_grid(r, rho_grid)
    big = lambda p: lip_big_r(f, space, p, r, grid, budget).value
    small = lambda p: lip_small_r(f, space, p, r, grid, budget).value
    tail = list(approach)[_tail_start(len(approach)):]
    return SemicontinuityReport(
        big_at_x=big(x), small_at_x=small(x),
        big_tail_min=min(big(p) for p in tail),
        small_tail_max=max(small(p) for p in tail),
        tol=tol)
