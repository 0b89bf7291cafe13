#!/usr/bin/env python3

"""
ε-网构造与认证
贪心构造极大 ε-分离集、分离性/稠密性检查、尺度 a^{-n} 的单调网层级，
以及隐式格点网 a^{-n}ℤ 的闭式距离
"""
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from metric_space import MetricSpace, PointRef, SpaceKind, _uniform_axis
from tvdw_errors import DomainError, PreconditionError, ResourceError
from tvdw_logger import get_logger

# 贪心接受与分离检查共用的相对容差（0.6 - 0.2 < 0.4 这类浮点误差）
SEPARATION_RTOL = 1e-9
FINITE_KINDS = (SpaceKind.POINT_CLOUD, SpaceKind.FINITE_MATRIX, SpaceKind.CANTOR)


@dataclass
class CheckResult:
    """分离/稠密检查结果"""
    ok: bool
    witness: Any = None
    worst_distance: float = math.nan

    def to_dict(self) -> Dict[str, Any]:
        witness = self.witness
        if isinstance(witness, tuple):
            witness = [_plain(w) for w in witness]
        else:
            witness = _plain(witness)
        return {"ok": self.ok, "witness": witness, "worst_distance": self.worst_distance}


def _plain(p):
    if isinstance(p, np.ndarray):
        return [float(v) for v in p]
    if isinstance(p, (np.integer,)):
        return int(p)
    if isinstance(p, (np.floating, Fraction)):
        return float(p)
    return p


def _separation_threshold(epsilon: float) -> float:
    return epsilon * (1.0 - SEPARATION_RTOL)


@dataclass(frozen=True, eq=False)
class Net:
    """
    ε-分离点集

    显式网保存 points（种子在前，新增点按扫描顺序在后）；
    隐式格点网只保存 implicit_scale，整数分母 implicit_den 存在时 ε = 1/implicit_den 精确成立。
    """
    space: MetricSpace
    epsilon: float
    points: Optional[np.ndarray] = None
    implicit_scale: Optional[float] = None
    implicit_den: Optional[int] = None

    @property
    def is_implicit(self) -> bool:
        return self.implicit_scale is not None

    def __len__(self) -> int:
        if self.is_implicit:
            raise DomainError("隐式格点网没有有限点列表")
        return int(len(self.points))

    @cached_property
    def _sorted(self) -> np.ndarray:
        return np.sort(np.asarray(self.points, dtype=float))

    @cached_property
    def _tree(self) -> cKDTree:
        if self.space.kind is SpaceKind.POINT_CLOUD:
            return cKDTree(self.space.params["points"][np.asarray(self.points, dtype=int)])
        return cKDTree(np.asarray(self.points, dtype=float).reshape(-1, self.space.dim))

    # ------------------------------------------------------------------
    # 隐式格点
    # ------------------------------------------------------------------

    def _lattice_range(self) -> Tuple[Optional[int], Optional[int]]:
        """区间上格点下标范围 [k_lo, k_hi]，格点直线返回 (None, None)"""
        if self.space.kind is not SpaceKind.INTERVAL:
            return None, None
        lo, hi = self.space.params["lo"], self.space.params["hi"]
        if self.implicit_den is not None:
            return (math.ceil(Fraction(lo) * self.implicit_den),
                    math.floor(Fraction(hi) * self.implicit_den))
        return math.ceil(lo / self.implicit_scale), math.floor(hi / self.implicit_scale)

    def nearest_exact(self, x: PointRef) -> Tuple[Fraction, Fraction]:
        """整数分母格点网上的最近格点与距离（Fraction）"""
        if self.implicit_den is None:
            raise DomainError("只有整数分母的隐式格点网支持精确最近点")
        fx = Fraction(x)
        k = round(fx * self.implicit_den)
        k_lo, k_hi = self._lattice_range()
        if k_lo is not None:
            k = min(max(k, k_lo), k_hi)
        p = Fraction(k, self.implicit_den)
        return p, abs(fx - p)

    def _lattice_nearest(self, x: float) -> Tuple[float, float]:
        """最近格点与距离；有整数分母时用精确有理运算"""
        k_lo, k_hi = self._lattice_range()
        if self.implicit_den is not None:
            p, d = self.nearest_exact(x)
            return float(p), float(d)
        k = round(x / self.implicit_scale)
        if k_lo is not None:
            k = min(max(k, k_lo), k_hi)
        p = k * self.implicit_scale
        return p, abs(x - p)

    # ------------------------------------------------------------------
    # 距离查询
    # ------------------------------------------------------------------

    def nearest(self, x: PointRef) -> Tuple[Any, float]:
        """最近网点及其距离"""
        x = self.space.point(x)
        if self.is_implicit:
            return self._lattice_nearest(x)
        if self.points is None or len(self.points) == 0:
            get_logger().warning("空网的距离查询，返回 +∞")
            return None, math.inf
        if self.space.is_linear:
            srt = self._sorted
            i = int(np.searchsorted(srt, x))
            best, best_d = None, math.inf
            for j in (i - 1, i):
                if 0 <= j < len(srt):
                    d = abs(srt[j] - x)
                    if d < best_d:
                        best, best_d = float(srt[j]), d
            return best, best_d
        if self.space.kind is SpaceKind.FINITE_MATRIX:
            row = self.space.params["distances"][x, np.asarray(self.points, dtype=int)]
            j = int(np.argmin(row))
            return int(self.points[j]), float(row[j])
        query = self.space.params["points"][x] if self.space.is_indexed else x
        d, j = self._tree.query(query)
        return _plain(self.points[j]), float(d)

    def distances(self, xs: np.ndarray) -> np.ndarray:
        """批量 d(x, S)，xs 为合法点数组"""
        if self.is_implicit:
            return np.array([self._lattice_nearest(float(x))[1] for x in xs])
        if self.points is None or len(self.points) == 0:
            return np.full(len(xs), math.inf)
        if self.space.is_linear:
            xs = np.asarray(xs, dtype=float)
            srt = self._sorted
            i = np.clip(np.searchsorted(srt, xs), 1, max(1, len(srt) - 1))
            if len(srt) == 1:
                return np.abs(xs - srt[0])
            return np.minimum(np.abs(xs - srt[i - 1]), np.abs(srt[i] - xs))
        if self.space.kind is SpaceKind.FINITE_MATRIX:
            table = self.space.params["distances"]
            return table[np.ix_(np.asarray(xs, dtype=int), np.asarray(self.points, dtype=int))].min(axis=1)
        if self.space.kind is SpaceKind.POINT_CLOUD:
            query = self.space.params["points"][np.asarray(xs, dtype=int)]
        else:
            query = np.asarray(xs, dtype=float).reshape(-1, self.space.dim)
        return self._tree.query(query)[0]


def dist_to_net(x: PointRef, net: Net) -> float:
    """φ(x) = d(x, S)；空网返回 +∞ 并记录警告"""
    return net.nearest(x)[1]


def nearest_in_net(x: PointRef, net: Net) -> Tuple[Any, float]:
    """最近网点与距离"""
    return net.nearest(x)


def lattice_net(space: MetricSpace, a: float, n: int) -> Net:
    """隐式格点网 a^{-n}ℤ（区间上取与区间的交）"""
    if space.kind not in (SpaceKind.INTERVAL, SpaceKind.LATTICE_LINE):
        raise DomainError(f"{space.kind.value} 不支持隐式格点网")
    eps = float(a) ** (-n)
    den = int(a) ** n if float(a).is_integer() else None
    net = Net(space, eps, implicit_scale=eps, implicit_den=den)
    k_lo, k_hi = net._lattice_range()
    if k_lo is not None and k_lo > k_hi:
        raise ResourceError(f"区间内没有尺度 {eps:g} 的格点", ["增大区间或减小 a^-n"])
    return net


# ----------------------------------------------------------------------
# 贪心构造
# ----------------------------------------------------------------------

def _greedy_linear(carrier: np.ndarray, seeds_sorted: np.ndarray, thr: float) -> List[float]:
    """一维跳跃扫描：左侧阻挡者为最近接受点或种子，右侧只需看下一个种子"""
    accepted: List[float] = []
    n = len(carrier)
    last = -math.inf
    i = 0
    while i < n:
        c = carrier[i]
        j = int(np.searchsorted(seeds_sorted, c))
        left = last
        if j > 0:
            left = max(left, seeds_sorted[j - 1])
        right = seeds_sorted[j] if j < len(seeds_sorted) else math.inf
        if c - left < thr:
            nxt = int(np.searchsorted(carrier, left + thr)) - 1
        elif right - c < thr:
            nxt = int(np.searchsorted(carrier, right + thr)) - 1
        else:
            accepted.append(float(c))
            last = c
            nxt = int(np.searchsorted(carrier, c + thr)) - 1
        i = max(i + 1, nxt)
    return accepted


def _greedy_general(space: MetricSpace, carrier: np.ndarray, seeds: List[Any], thr: float) -> List[Any]:
    """通用路径：维护每个候选点到已接受集合的最小距离（最远点采样式向量化更新）"""
    mind = np.full(len(carrier), math.inf)
    for s in seeds:
        mind = np.minimum(mind, space.distances_from(s, carrier))
    accepted: List[Any] = []
    i = 0
    while i < len(carrier):
        cand = np.flatnonzero(mind[i:] >= thr)
        if cand.size == 0:
            break
        i += int(cand[0])
        p = carrier[i]
        accepted.append(p)
        mind = np.minimum(mind, space.distances_from(p, carrier))
        i += 1
    return accepted


def _as_points(space: MetricSpace, pts: Sequence[Any]) -> np.ndarray:
    if space.kind is SpaceKind.BOX:
        if len(pts) == 0:
            return np.zeros((0, space.dim))
        return np.vstack([np.asarray(p, dtype=float).reshape(1, -1) for p in pts])
    if space.is_indexed:
        return np.asarray(pts, dtype=int)
    return np.asarray(pts, dtype=float)


def greedy_maximal_net(space: MetricSpace, epsilon: float, seed: Sequence[PointRef] = ()) -> Net:
    """
    在物化载体上按规范顺序贪心扫描，构造包含 seed 的极大 ε-分离集

    Args:
        space: 度量空间
        epsilon: 分离尺度
        seed: 已知 ε-分离的初始点

    Returns:
        Net，points 中种子在前
    """
    if not epsilon > 0:
        raise DomainError(f"epsilon 必须为正: {epsilon}")
    seeds = [space.point(p) for p in seed]
    seed_net = Net(space, epsilon, _as_points(space, seeds))
    if len(seeds) > 1:
        sep = check_separated(seed_net)
        if not sep.ok:
            raise PreconditionError(
                f"种子集不是 {epsilon:g}-分离的: {sep.to_dict()['witness']} 距离 {sep.worst_distance:g}",
                ["检查种子是否来自更粗尺度的网"])
    if space.kind is SpaceKind.LATTICE_LINE:
        get_logger().debug("格点直线上的贪心网只覆盖物化窗口", window=list(space.params["window"]))
    if not space.is_indexed and space.kind is not SpaceKind.CANTOR:
        if space.resolution * math.sqrt(space.dim) / 2 >= epsilon:
            get_logger().warning(f"分辨率 {space.resolution:g} 相对 ε={epsilon:g} 过粗，网只在物化尺度上极大")

    thr = _separation_threshold(epsilon)
    carrier = space.carrier()
    if space.is_linear:
        new = _greedy_linear(carrier, np.sort(np.asarray(seeds, dtype=float)), thr)
    else:
        new = _greedy_general(space, carrier, seeds, thr)
    return Net(space, float(epsilon), _as_points(space, list(seeds) + list(new)))


# ----------------------------------------------------------------------
# 认证
# ----------------------------------------------------------------------

def check_separated(net: Net) -> CheckResult:
    """所有不同点对距离 ≥ ε（相对容差 SEPARATION_RTOL）"""
    if net.is_implicit:
        return CheckResult(True, None, net.implicit_scale)
    space, pts = net.space, net.points
    if pts is None or len(pts) < 2:
        return CheckResult(True, None, math.inf)
    thr = _separation_threshold(net.epsilon)
    if space.is_linear:
        order = np.argsort(pts, kind="stable")
        srt = np.asarray(pts, dtype=float)[order]
        gaps = np.diff(srt)
        j = int(np.argmin(gaps))
        witness = (float(srt[j]), float(srt[j + 1]))
        worst = float(gaps[j])
    elif space.kind is SpaceKind.FINITE_MATRIX:
        idx = np.asarray(pts, dtype=int)
        sub = space.params["distances"][np.ix_(idx, idx)] + np.diag(np.full(len(idx), math.inf))
        i, j = np.unravel_index(int(np.argmin(sub)), sub.shape)
        witness = (int(idx[min(i, j)]), int(idx[max(i, j)]))
        worst = float(sub[i, j])
    else:
        coords = net._tree.data
        d, nn = net._tree.query(coords, k=2)
        i = int(np.argmin(d[:, 1]))
        j = int(nn[i, 1])
        i, j = min(i, j), max(i, j)
        witness = (_plain(pts[i]), _plain(pts[j]))
        worst = float(d[:, 1].min())
    return CheckResult(worst >= thr, witness, worst)


def probe_points(space: MetricSpace, probe_resolution: Optional[float]) -> np.ndarray:
    """在 probe_resolution 下物化的探针集；None 表示沿用空间自身载体"""
    if probe_resolution is None or space.is_indexed or space.kind is SpaceKind.CANTOR:
        return space.carrier()
    if space.kind is SpaceKind.INTERVAL:
        return _uniform_axis(space.params["lo"], space.params["hi"], probe_resolution)
    if space.kind is SpaceKind.LATTICE_LINE:
        lo, hi = space.params["window"]
        return _uniform_axis(lo, hi, probe_resolution)
    axes = [_uniform_axis(lo, hi, probe_resolution) for lo, hi in zip(space.params["lo"], space.params["hi"])]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def check_dense(net: Net, probe_resolution: Optional[float] = None) -> CheckResult:
    """
    每个探针点到网的距离 < ε

    失败时 witness 为规范顺序下第一个违规探针；成功时为最差探针。
    只在探针尺度上认证（"在尺度 δ 上极大"）。
    """
    if net.is_implicit:
        return CheckResult(True, None, net.implicit_scale / 2)
    if probe_resolution is not None and probe_resolution >= net.epsilon / 4:
        get_logger().warning(f"探针分辨率 {probe_resolution:g} ≥ ε/4，稠密性认证偏粗")
    probes = probe_points(net.space, probe_resolution)
    dists = net.distances(probes)
    bad = np.flatnonzero(dists >= net.epsilon)
    if bad.size:
        i = int(bad[0])
        return CheckResult(False, _plain(probes[i]), float(dists[i]))
    i = int(np.argmax(dists))
    return CheckResult(True, _plain(probes[i]), float(dists[i]))


# ----------------------------------------------------------------------
# 层级
# ----------------------------------------------------------------------

@dataclass(eq=False)
class NetHierarchy:
    """尺度 a^{-n} 的网序列 S_0, …, S_N"""
    a: float
    nets: List[Net]
    monotone: bool
    implicit: bool = False
    certificates: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.nets) - 1

    @property
    def space(self) -> MetricSpace:
        return self.nets[0].space

    @property
    def exact_lattice(self) -> bool:
        """隐式整数格点层级（可任意深度、精确有理运算）"""
        return self.implicit and float(self.a).is_integer()

    @property
    def saturated(self) -> bool:
        """有限空间上的显式层级最后一层已含全部载体点：更深的 φ_n 在载体上恒为 0"""
        if self.implicit or self.space.kind not in FINITE_KINDS:
            return False
        return len(self.nets[-1]) == self.space.size

    def level(self, n: int) -> Net:
        """第 n 层网；隐式层级可超出 depth 按需生成，饱和层级沿用最后一层的点"""
        if 0 <= n <= self.depth:
            return self.nets[n]
        if self.implicit and n >= 0:
            return lattice_net(self.space, self.a, n)
        if self.saturated and n >= 0:
            return Net(self.space, float(self.a) ** (-n), self.nets[-1].points)
        raise ResourceError(
            f"层级深度 {self.depth} 不足，需要第 {n} 层",
            ["使用隐式格点层级（区间/格点直线 + 整数 a）", "或提高空间分辨率后重建"],
            max_feasible_depth=self.depth)


def max_feasible_depth(space: MetricSpace, a: float) -> Optional[int]:
    """显式连续空间上满足 resolution·√m/2 < a^{-N} 的最大 N；有限空间返回 None（无上限）"""
    if space.is_indexed or space.kind is SpaceKind.CANTOR:
        return None
    half_cell = space.resolution * math.sqrt(space.dim) / 2
    n = 0
    while half_cell < float(a) ** (-(n + 1)):
        n += 1
    return n if half_cell < 1.0 else -1


def build_hierarchy(space: MetricSpace, a: float, depth: int, monotone: bool = True,
                    implicit: Optional[bool] = None) -> NetHierarchy:
    """
    构造尺度 a^{-n}（n = 0..depth）的网层级

    monotone 时 S_{n+1} 以 S_n 为种子贪心生成。格点直线总用隐式格点；
    区间上 a 为整数且显式深度不可行（或 implicit=True）时改用隐式格点。
    """
    if not a > 1:
        raise DomainError(f"a 必须大于 1: a={a}", ["网层级的尺度为 a^-n，需要 a > 1"])
    if depth < 0:
        raise DomainError(f"depth 必须非负: {depth}")
    logger = get_logger()
    integer_a = float(a).is_integer()
    limit = max_feasible_depth(space, a)

    if implicit is None:
        implicit = space.kind is SpaceKind.LATTICE_LINE or (
            space.kind is SpaceKind.INTERVAL and integer_a and limit is not None and depth > limit)
    if space.kind is SpaceKind.LATTICE_LINE and not implicit:
        raise DomainError("lattice_line 只支持隐式格点网")

    if implicit:
        if monotone and not integer_a:
            raise PreconditionError(f"隐式格点层级要嵌套需要整数 a: a={a}")
        nets = [lattice_net(space, a, n) for n in range(depth + 1)]
        logger.debug(f"构建隐式格点层级 a={a} depth={depth}")
        h = NetHierarchy(float(a), nets, monotone=integer_a, implicit=True)
        h.certificates = [{"n": n, "epsilon": net.epsilon, "separated": True, "dense": True,
                           "min_separation": net.epsilon, "max_gap": net.epsilon / 2, "size": None}
                          for n, net in enumerate(nets)]
        return h

    if limit is not None and depth > limit:
        raise ResourceError(
            f"分辨率 {space.resolution:g} 下显式层级最多 {max(limit, 0)} 层，无法构建深度 {depth}",
            ["减小 resolution", "或对区间使用整数 a 的隐式格点层级"],
            max_feasible_depth=limit)

    nets: List[Net] = []
    certificates: List[Dict[str, Any]] = []
    seed: Sequence[Any] = ()
    for n in range(depth + 1):
        eps = float(a) ** (-n)
        net = greedy_maximal_net(space, eps, seed if monotone else ())
        sep, dense = check_separated(net), check_dense(net)
        if not (sep.ok and dense.ok):
            logger.error(f"第 {n} 层认证失败", separated=sep.to_dict(), dense=dense.to_dict())
            raise PreconditionError(f"第 {n} 层网认证失败（ε={eps:g}）")
        certificates.append({"n": n, "epsilon": eps, "separated": sep.ok, "dense": dense.ok,
                             "min_separation": sep.worst_distance, "max_gap": dense.worst_distance,
                             "size": len(net)})
        nets.append(net)
        if monotone:
            seed = list(net.points)
    logger.debug(f"构建显式层级 a={a} depth={depth}", sizes=[c["size"] for c in certificates])
    return NetHierarchy(float(a), nets, monotone=monotone, implicit=False, certificates=certificates)


def hierarchy_is_nested(h: NetHierarchy) -> bool:
    """S_n ⊆ S_{n+1}：显式层级按点列表前缀比较"""
    if h.implicit:
        return h.exact_lattice
    for prev, nxt in zip(h.nets, h.nets[1:]):
        if len(nxt.points) < len(prev.points):
            return False
        if not np.array_equal(nxt.points[:len(prev.points)], prev.points):
            return False
    return True


# ----------------------------------------------------------------------
# JSON
# ----------------------------------------------------------------------

def net_to_dict(net: Net) -> Dict[str, Any]:
    if net.is_implicit:
        lattice: Dict[str, Any] = {"scale": net.implicit_scale}
        if net.implicit_den is not None:
            lattice["denominator"] = net.implicit_den
        return {"epsilon": net.epsilon, "implicit_lattice": lattice}
    return {"epsilon": net.epsilon, "points": [_plain(p) for p in net.points]}


def net_from_dict(space: MetricSpace, data: Dict[str, Any]) -> Net:
    if "epsilon" not in data:
        raise DomainError("网 JSON 缺少字段 epsilon")
    eps = float(data["epsilon"])
    if "implicit_lattice" in data:
        lattice = data["implicit_lattice"]
        den = lattice.get("denominator")
        return Net(space, eps, implicit_scale=float(lattice["scale"]),
                   implicit_den=int(den) if den is not None else None)
    if "points" not in data:
        raise DomainError("网 JSON 需要 points 或 implicit_lattice")
    return Net(space, eps, _as_points(space, [space.point(p) for p in data["points"]]))
