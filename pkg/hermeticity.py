#!/usr/bin/env python3

"""
密闭度（hermeticity）与壳孔隙度
H(X,x) = liminf_{r→0+} (1/r)·sup_{u∈B(x,r)} |u−x|，p^s(X,x) = 1 − H(X,x)，
以及密闭半径 RH_λ(X,x) = sup{r > 0 : lip_r d_x(x) > λ}。
"""
import bisect
import concurrent.futures
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from lip_derivatives import distance_function, fine_rho_grid, lip_small_r
from metric_space import MetricSpace, PointRef, SpaceKind
from tvdw_errors import DomainError, PreconditionError, ResolutionError
from tvdw_logger import get_logger

DEFAULT_BUDGET = 256
# Cantor 网格略小于 2·3^{-k}，使开球恰好不含 2·3^{-k}
CANTOR_GRID_SHRINK = 1e-9
CANTOR_STEPS_PER_SCALE = 8


def ordered_map(fn: Callable, items: Sequence[Any], threads: int = 1) -> List[Any]:
    """按输入顺序返回结果；threads > 1 时使用线程池"""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(fn, items))


# ----------------------------------------------------------------------
# 半径网格
# ----------------------------------------------------------------------

def geometric_radius_grid(rmax: float, rmin: float, ratio: float = 0.5) -> List[float]:
    """从 rmax 降到 rmin 的几何网格"""
    if not (0 < rmin <= rmax):
        raise DomainError(f"半径网格需要 0 < rmin ≤ rmax: rmin={rmin}, rmax={rmax}")
    if not (0 < ratio < 1):
        raise DomainError(f"ratio 必须在 (0,1) 内: {ratio}")
    count = int(math.floor(math.log(rmin / rmax) / math.log(ratio) + 1e-12)) + 1
    return [rmax * ratio ** j for j in range(count)]


def cantor_radius_grid(kmin: int, kmax: int, steps: int = CANTOR_STEPS_PER_SCALE) -> List[float]:
    """
    以 3 为底、每个尺度 steps 等分的网格，锚定在 2·3^{-k} 之下

    r = 2·3^{-(k + j/steps)}·(1 − CANTOR_GRID_SHRINK)，k = kmin..kmax，j = 0..steps−1
    """
    if kmin < 0 or kmax < kmin:
        raise DomainError(f"需要 0 ≤ kmin ≤ kmax: kmin={kmin}, kmax={kmax}")
    return [2.0 * 3.0 ** (-(k + j / steps)) * (1 - CANTOR_GRID_SHRINK)
            for k in range(kmin, kmax + 1) for j in range(steps)]


def default_radius_grid(space: MetricSpace) -> List[float]:
    """空间默认的降序半径网格"""
    if space.kind is SpaceKind.CANTOR:
        return cantor_radius_grid(1, max(1, space.params["level"] - 1))
    diam = space.diameter()
    rmax = 0.5 * diam if math.isfinite(diam) else 0.5
    return geometric_radius_grid(rmax, rmax * 2.0 ** -16)


def _validate_r_grid(space: MetricSpace, r_grid: Optional[Sequence[float]]) -> List[float]:
    grid = default_radius_grid(space) if r_grid is None else [float(r) for r in r_grid]
    if not grid:
        raise PreconditionError("r_grid 为空")
    diam = space.diameter()
    if any(not (0 < r <= diam) for r in grid):
        raise PreconditionError(f"r_grid 必须位于 (0, diam] 内: diam={diam:g}")
    return sorted(grid, reverse=True)


def _tail(values: Sequence[float]) -> Sequence[float]:
    return values[len(values) // 2:]


# ----------------------------------------------------------------------
# 单点密闭度
# ----------------------------------------------------------------------

@dataclass
class HermeticityReport:
    """单点密闭度报告"""
    point: Any
    r_grid: List[float]
    ratio_per_r: List[float]
    H_estimate: float
    p_s_estimate: float
    RH_table: List[Tuple[float, float]] = field(default_factory=list)
    porosity_per_r: List[float] = field(default_factory=list)
    isolated: bool = False

    @property
    def duality_gap(self) -> float:
        return abs(self.p_s_estimate + self.H_estimate - 1.0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "point": self.point,
            "r_grid": list(self.r_grid),
            "ratio_per_r": list(self.ratio_per_r),
            "H_estimate": self.H_estimate,
            "p_s_estimate": self.p_s_estimate,
            "RH_table": [[lam, rh] for lam, rh in self.RH_table],
            "porosity_per_r": list(self.porosity_per_r),
            "isolated": self.isolated,
        }


def _sampled_dists(space: MetricSpace, x: Any, r: float, budget: int) -> np.ndarray:
    if space.is_continuum:
        return np.abs(space.ball_offsets(x, r, budget))
    return space.ball_with_distances(x, r, budget)[1]


def _ratio(dists: np.ndarray, r: float) -> float:
    return float(min(1.0, dists.max() / r)) if dists.size else 0.0


def _shell_porosity(dists: np.ndarray, r: float) -> float:
    """{0} ∪ dists ∪ {r} 中最大空隙 / r"""
    edges = np.unique(np.concatenate([[0.0], dists, [r]]))
    return float(min(1.0, np.max(np.diff(edges)) / r))


def hermeticity_at(space: MetricSpace, x: PointRef, r_grid: Optional[Sequence[float]] = None,
                   budget: int = DEFAULT_BUDGET, lambdas: Sequence[float] = ()) -> HermeticityReport:
    """
    单点密闭度：每个 r 上 ratio = sup|u−x|/r，H 取网格后半段最小值，
    p^s 由同一批样本直接扫描空壳得到；lambdas 非空时附带 RH 表
    """
    x = space.point(x)
    grid = _validate_r_grid(space, r_grid)
    ratios, porosities = [], []
    for r in grid:
        dists = _sampled_dists(space, x, r, budget)
        ratios.append(_ratio(dists, r))
        porosities.append(_shell_porosity(dists, r))
    isolated = space.is_isolated(x, grid[-1])
    if isolated:
        h, p = 0.0, 1.0
        get_logger().debug(f"点 {space.jsonable(x)} 在尺度 {grid[-1]:g} 下孤立", space=space.describe())
    else:
        h, p = float(min(_tail(ratios))), float(max(_tail(porosities)))
    report = HermeticityReport(space.jsonable(x), grid, ratios, h, p,
                               porosity_per_r=porosities, isolated=isolated)
    for lam in lambdas:
        rh = radius_of_hermeticity(space, x, lam, H=h) if 0 < lam < h else float("nan")
        report.RH_table.append((float(lam), rh))
    return report


def shell_porosity_at(space: MetricSpace, x: PointRef, r_grid: Optional[Sequence[float]] = None,
                      budget: int = DEFAULT_BUDGET) -> float:
    """壳孔隙度 p^s(X,x)：网格后半段空壳相对宽度的最大值（limsup 代理）"""
    x = space.point(x)
    grid = _validate_r_grid(space, r_grid)
    if space.is_isolated(x, grid[-1]):
        return 1.0
    return float(max(_shell_porosity(_sampled_dists(space, x, r, budget), r) for r in _tail(grid)))


def default_rh_grid(space: MetricSpace, ratio: float = 0.995, rmin_fraction: float = 1e-4) -> List[float]:
    diam = space.diameter()
    rmax = diam if math.isfinite(diam) else 1.0
    return geometric_radius_grid(rmax, rmax * rmin_fraction, ratio)


def radius_of_hermeticity(space: MetricSpace, x: PointRef, lam: float,
                          r_grid: Optional[Sequence[float]] = None, budget: int = DEFAULT_BUDGET,
                          H: Optional[float] = None) -> float:
    """
    RH_λ(X,x)：lip_r d_x(x) > λ 的最大网格半径

    lip_r d_x(x) 随 r 不增，沿降序网格二分查找；结果总是网格值，不做插值。
    """
    x = space.point(x)
    if H is None:
        H = hermeticity_at(space, x).H_estimate
    if not (0 < lam < H):
        raise DomainError(f"需要 0 < λ < H(X,x): λ={lam}, H={H:.6g}",
                          [f"选择 λ < {H:.6g}"])
    grid = sorted(default_rh_grid(space) if r_grid is None else [float(r) for r in r_grid], reverse=True)
    d_x = distance_function(space, x)

    def exceeds(r: float) -> bool:
        return lip_small_r(d_x, space, x, r, fine_rho_grid(r, rho_min_fraction=0.05), budget).value > lam

    # 沿降序网格 exceeds 由 False 变为 True
    idx = bisect.bisect_left(range(len(grid)), True, key=lambda i: exceeds(grid[i]))
    if idx >= len(grid):
        raise ResolutionError(f"网格内没有半径满足 lip_r d_x > {lam}",
                              ["延伸 r_grid 到更小半径", "或增大 budget"], scale_index=len(grid) - 1)
    return grid[idx]


def annulus_witness(space: MetricSpace, x: PointRef, r: float, lam: float,
                    budget: int = DEFAULT_BUDGET) -> Optional[Tuple[Any, float]]:
    """在 λr ≤ |x−u| ≤ r 环中找采样见证点，找不到返回 None"""
    x = space.point(x)
    if space.is_continuum:
        offs = space.ball_offsets(x, r, budget, closed=True)
        dists = np.abs(offs)
        pts = x + offs
    else:
        pts, dists = space.ball_with_distances(x, r, budget, closed=True)
    hit = np.nonzero((dists >= lam * r) & (dists <= r))[0]
    if hit.size == 0:
        return None
    j = int(hit[0])
    u = pts[j]
    return (space.jsonable(int(u) if space.is_indexed else u), float(dists[j]))


# ----------------------------------------------------------------------
# 空间密闭度
# ----------------------------------------------------------------------

@dataclass
class SpaceHermeticity:
    """H(X) 的采样上估计；vacuous 表示样本全是孤立点"""
    estimate: Optional[float]
    vacuous: bool
    samples_used: int
    worst_point: Any = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "estimate": self.estimate,
            "vacuous": self.vacuous,
            "samples_used": self.samples_used,
            "worst_point": self.worst_point,
        }


def hermeticity_of_space(space: MetricSpace, sample_points: Sequence[PointRef],
                         r_grid: Optional[Sequence[float]] = None, budget: int = DEFAULT_BUDGET,
                         threads: int = 1) -> SpaceHermeticity:
    """H(X) = inf_{x∈X^d} H(X,x)：对工作尺度下非孤立的样本点取最小值"""
    grid = _validate_r_grid(space, r_grid)
    points = [space.point(p) for p in sample_points]
    live = [p for p in points if not space.is_isolated(p, grid[-1])]
    if not live:
        get_logger().info("样本点全部孤立，空间按空真密闭处理", space=space.describe())
        return SpaceHermeticity(None, True, 0)
    reports = ordered_map(lambda p: hermeticity_at(space, p, grid, budget), live, threads)
    worst = min(reports, key=lambda rep: rep.H_estimate)
    return SpaceHermeticity(worst.H_estimate, False, len(reports), worst.point)
