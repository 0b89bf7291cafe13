#!/usr/bin/env python3

"""
度量空间抽象
统一封装区间、盒、点云、距离矩阵、Cantor 集端点、格点直线六类空间，
提供距离预言机与确定性的度量球采样
"""
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from tvdw_errors import DomainError, ResourceError
from tvdw_logger import get_logger

PointRef = Union[float, int, Fraction, Tuple[float, ...], np.ndarray]

# 盒空间维数上限：只有 √m/2 < 1 时隐式格点才是极大网
MAX_BOX_DIM = 3
MAX_CANTOR_LEVEL = 16
MAX_MATERIALIZED_POINTS = 5_000_000
CANTOR_MEMBERSHIP_TOL = 1e-12


class SpaceKind(Enum):
    """空间类型"""
    INTERVAL = "interval"
    BOX = "box"
    POINT_CLOUD = "point_cloud"
    FINITE_MATRIX = "finite_matrix"
    CANTOR = "cantor"
    LATTICE_LINE = "lattice_line"


def next_pow2(n: int) -> int:
    """不小于 n 的最小 2 的幂"""
    n = max(1, int(n))
    return 1 << (n - 1).bit_length()


def _room_below(room: Fraction) -> float:
    """不超过 room 的最大浮点数：x ± room 精确落在端点以内"""
    f = float(room)
    return float(np.nextafter(f, 0.0)) if Fraction(f) > room else f


def _uniform_axis(lo: float, hi: float, resolution: float) -> np.ndarray:
    """[lo, hi] 上步长不超过 resolution 的等分网格，端点精确"""
    if hi == lo:
        return np.array([lo], dtype=float)
    n = max(1, math.ceil((hi - lo) / resolution - 1e-9))
    pts = lo + (hi - lo) * (np.arange(n + 1) / n)
    pts[-1] = hi
    return pts


def cantor_endpoints(level: int) -> List[Fraction]:
    """第 level 层 Cantor 区间的全部端点（精确有理数，升序）"""
    lefts = [Fraction(0)]
    for i in range(1, level + 1):
        shift = Fraction(2, 3 ** i)
        lefts = lefts + [left + shift for left in lefts]
    width = Fraction(1, 3 ** level)
    return sorted(lefts + [left + width for left in lefts])


@dataclass(eq=False)
class MetricSpace:
    """
    度量空间

    kind 决定距离公式与采样方式；params 存放各类型参数；
    resolution 是为采样而物化载体时的最细网格步长。
    """
    kind: SpaceKind
    params: Dict[str, Any]
    resolution: float
    _carrier: Optional[np.ndarray] = field(default=None, init=False, repr=False)
    _tree: Optional[cKDTree] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if not (self.resolution > 0) or not math.isfinite(self.resolution):
            raise DomainError(f"resolution 必须为正有限数: {self.resolution}",
                              ["示例: \"resolution\": 1e-4"])

    # ------------------------------------------------------------------
    # 构造
    # ------------------------------------------------------------------

    @classmethod
    def interval(cls, lo: float = 0.0, hi: float = 1.0, resolution: float = 1e-3) -> "MetricSpace":
        lo, hi = float(lo), float(hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise DomainError("lo/hi 必须是有限实数")
        if hi < lo:
            raise DomainError(f"hi < lo: lo={lo}, hi={hi}", ["交换 lo 与 hi"])
        return cls(SpaceKind.INTERVAL, {"lo": lo, "hi": hi}, float(resolution))

    @classmethod
    def box(cls, lo: List[float], hi: List[float], resolution: float = 1e-2) -> "MetricSpace":
        lo_arr = np.asarray(lo, dtype=float).reshape(-1)
        hi_arr = np.asarray(hi, dtype=float).reshape(-1)
        if lo_arr.shape != hi_arr.shape or lo_arr.size == 0:
            raise DomainError("box 的 lo 与 hi 维数必须相同且非空")
        if lo_arr.size > MAX_BOX_DIM:
            raise DomainError(
                f"box 维数 {lo_arr.size} 超过上限 {MAX_BOX_DIM}",
                ["高维空间请使用 point_cloud 并用贪心网"])
        if np.any(hi_arr < lo_arr):
            raise DomainError("hi < lo: box 某一坐标轴上界小于下界")
        return cls(SpaceKind.BOX, {"lo": lo_arr, "hi": hi_arr}, float(resolution))

    @classmethod
    def point_cloud(cls, points) -> "MetricSpace":
        coords = np.asarray(points, dtype=float)
        if coords.ndim == 1:
            coords = coords.reshape(-1, 1)
        if coords.ndim != 2 or coords.shape[0] == 0:
            raise DomainError("points 必须是非空的 N×m 坐标数组")
        if not np.all(np.isfinite(coords)):
            raise DomainError("points 含有非有限坐标")
        tree = cKDTree(coords)
        if coords.shape[0] > 1 and tree.query_pairs(0.0):
            raise DomainError("points 含有重复点，违反度量的同一性")
        space = cls(SpaceKind.POINT_CLOUD, {"points": coords}, 1.0)
        space._tree = tree
        gap = space.min_positive_gap()
        space.resolution = gap if math.isfinite(gap) else 1.0
        return space

    @classmethod
    def finite_matrix(cls, distances) -> "MetricSpace":
        table = np.asarray(distances, dtype=float)
        if table.ndim != 2 or table.shape[0] != table.shape[1] or table.shape[0] == 0:
            raise DomainError("distances 必须是非空方阵")
        n = table.shape[0]
        if not np.all(np.isfinite(table)) or np.any(table < 0):
            raise DomainError("distances 必须非负且有限")
        if not np.array_equal(table, table.T):
            raise DomainError("distances 必须对称")
        if np.any(np.diag(table) != 0):
            raise DomainError("distances 对角线必须为 0")
        off = table[~np.eye(n, dtype=bool)]
        if off.size and np.any(off <= 0):
            raise DomainError("distances 非对角元必须为正（不同点距离为正）")
        for k in range(n):
            if np.any(table > (table[:, k:k + 1] + table[k:k + 1, :]) * (1 + 1e-12)):
                raise DomainError(f"distances 违反三角不等式（经由点 {k}）")
        space = cls(SpaceKind.FINITE_MATRIX, {"distances": table}, 1.0)
        gap = space.min_positive_gap()
        space.resolution = gap if math.isfinite(gap) else 1.0
        return space

    @classmethod
    def cantor(cls, level: int) -> "MetricSpace":
        level = int(level)
        if level < 0:
            raise DomainError(f"level 必须非负: {level}")
        if level > MAX_CANTOR_LEVEL:
            raise ResourceError(f"cantor level {level} 过深", max_feasible_depth=MAX_CANTOR_LEVEL)
        space = cls(SpaceKind.CANTOR, {"level": level}, 3.0 ** (-level))
        space._carrier = np.array([float(p) for p in cantor_endpoints(level)])
        return space

    @classmethod
    def lattice_line(cls, resolution: float = 1e-3,
                     window: Tuple[float, float] = (-1.0, 1.0)) -> "MetricSpace":
        lo, hi = float(window[0]), float(window[1])
        if hi < lo:
            raise DomainError(f"hi < lo: window=({lo}, {hi})")
        return cls(SpaceKind.LATTICE_LINE, {"window": (lo, hi)}, float(resolution))

    @classmethod
    def from_dict(cls, spec: Dict[str, Any]) -> "MetricSpace":
        """从 JSON 规格字典构造空间，字段缺失时报告字段名"""
        if not isinstance(spec, dict):
            raise DomainError("空间规格必须是 JSON 对象")
        if "kind" not in spec:
            raise DomainError("缺少字段 kind", [f"可选值: {', '.join(k.value for k in SpaceKind)}"])
        try:
            kind = SpaceKind(spec["kind"])
        except ValueError:
            raise DomainError(f"未知空间类型 kind={spec['kind']!r}",
                              [f"可选值: {', '.join(k.value for k in SpaceKind)}"])

        def need(name: str):
            if name not in spec:
                raise DomainError(f"{kind.value} 缺少字段 {name}")
            return spec[name]

        if kind is SpaceKind.INTERVAL:
            return cls.interval(need("lo"), need("hi"), spec.get("resolution", 1e-3))
        if kind is SpaceKind.BOX:
            return cls.box(need("lo"), need("hi"), spec.get("resolution", 1e-2))
        if kind is SpaceKind.POINT_CLOUD:
            return cls.point_cloud(need("points"))
        if kind is SpaceKind.FINITE_MATRIX:
            return cls.finite_matrix(need("distances"))
        if kind is SpaceKind.CANTOR:
            return cls.cantor(need("level"))
        return cls.lattice_line(spec.get("resolution", 1e-3), tuple(spec.get("window", (-1.0, 1.0))))

    def to_dict(self) -> Dict[str, Any]:
        """导出为 JSON 规格字典"""
        out: Dict[str, Any] = {"kind": self.kind.value}
        if self.kind is SpaceKind.INTERVAL:
            out.update(lo=self.params["lo"], hi=self.params["hi"], resolution=self.resolution)
        elif self.kind is SpaceKind.BOX:
            out.update(lo=self.params["lo"].tolist(), hi=self.params["hi"].tolist(),
                       resolution=self.resolution)
        elif self.kind is SpaceKind.POINT_CLOUD:
            out["points"] = self.params["points"].tolist()
        elif self.kind is SpaceKind.FINITE_MATRIX:
            out["distances"] = self.params["distances"].tolist()
        elif self.kind is SpaceKind.CANTOR:
            out["level"] = self.params["level"]
        else:
            out.update(resolution=self.resolution, window=list(self.params["window"]))
        return out

    # ------------------------------------------------------------------
    # 基本属性
    # ------------------------------------------------------------------

    @property
    def is_indexed(self) -> bool:
        """点引用是否为整数下标"""
        return self.kind in (SpaceKind.POINT_CLOUD, SpaceKind.FINITE_MATRIX)

    @property
    def is_linear(self) -> bool:
        """点是否为实数（一维子集）"""
        return self.kind in (SpaceKind.INTERVAL, SpaceKind.CANTOR, SpaceKind.LATTICE_LINE)

    @property
    def is_continuum(self) -> bool:
        """一维连续统（可用精确偏移采样）"""
        return self.kind in (SpaceKind.INTERVAL, SpaceKind.LATTICE_LINE)

    @property
    def dim(self) -> int:
        if self.kind is SpaceKind.BOX:
            return int(self.params["lo"].size)
        if self.kind is SpaceKind.POINT_CLOUD:
            return int(self.params["points"].shape[1])
        return 1

    @property
    def size(self) -> int:
        """物化载体的点数"""
        if self.is_indexed:
            return self._n_indexed()
        return int(len(self.carrier()))

    def _n_indexed(self) -> int:
        if self.kind is SpaceKind.POINT_CLOUD:
            return int(self.params["points"].shape[0])
        return int(self.params["distances"].shape[0])

    def bounds(self) -> Tuple[float, float]:
        """一维空间的载体范围"""
        if self.kind is SpaceKind.INTERVAL:
            return self.params["lo"], self.params["hi"]
        if self.kind is SpaceKind.LATTICE_LINE:
            return -math.inf, math.inf
        if self.kind is SpaceKind.CANTOR:
            return 0.0, 1.0
        raise DomainError(f"{self.kind.value} 不是一维空间")

    # ------------------------------------------------------------------
    # 点引用
    # ------------------------------------------------------------------

    def point(self, p: PointRef):
        """规范化点引用，非法时抛出 DomainError"""
        if self.is_indexed:
            if isinstance(p, (bool, np.bool_)) or not isinstance(p, (int, np.integer)):
                if isinstance(p, float) and p.is_integer():
                    p = int(p)
                else:
                    raise DomainError(f"{self.kind.value} 的点引用必须是整数下标: {p!r}")
            p = int(p)
            if not 0 <= p < self._n_indexed():
                raise DomainError(f"下标越界: {p}（共 {self._n_indexed()} 个点）")
            return p
        if self.kind is SpaceKind.BOX:
            arr = np.asarray(p, dtype=float).reshape(-1)
            if arr.size != self.dim or not np.all(np.isfinite(arr)):
                raise DomainError(f"box 点必须是 {self.dim} 维有限坐标: {p!r}")
            if np.any(arr < self.params["lo"]) or np.any(arr > self.params["hi"]):
                raise DomainError(f"点 {arr.tolist()} 不在盒内")
            return arr
        try:
            x = float(p)
        except (TypeError, ValueError):
            raise DomainError(f"点引用必须是实数: {p!r}")
        if not math.isfinite(x):
            raise DomainError(f"点引用必须有限: {p!r}")
        if self.kind is SpaceKind.INTERVAL:
            if x < self.params["lo"] or x > self.params["hi"]:
                raise DomainError(f"点 {x} 不在区间 [{self.params['lo']}, {self.params['hi']}] 内")
        elif self.kind is SpaceKind.CANTOR:
            carrier = self._carrier
            i = int(np.clip(np.searchsorted(carrier, x), 1, len(carrier) - 1))
            if min(abs(carrier[i] - x), abs(carrier[i - 1] - x)) > CANTOR_MEMBERSHIP_TOL:
                raise DomainError(f"点 {x} 不是 cantor({self.params['level']}) 的端点")
        return x

    def contains(self, p: PointRef) -> bool:
        try:
            self.point(p)
            return True
        except DomainError:
            return False

    def jsonable(self, p: PointRef):
        """点引用转为可 JSON 序列化的值"""
        p = self.point(p)
        if isinstance(p, np.ndarray):
            return [float(v) for v in p]
        return p

    # ------------------------------------------------------------------
    # 距离
    # ------------------------------------------------------------------

    def distance(self, u: PointRef, v: PointRef) -> float:
        """|u − v|_X"""
        u, v = self.point(u), self.point(v)
        if self.kind is SpaceKind.FINITE_MATRIX:
            return float(self.params["distances"][u, v])
        if self.kind is SpaceKind.POINT_CLOUD:
            pts = self.params["points"]
            return float(np.linalg.norm(pts[u] - pts[v]))
        if self.kind is SpaceKind.BOX:
            return float(np.linalg.norm(u - v))
        return abs(u - v)

    def distances_from(self, x: PointRef, points: np.ndarray) -> np.ndarray:
        """向量化距离：x 到一批点（points 须已是合法点）"""
        x = self.point(x)
        if self.kind is SpaceKind.FINITE_MATRIX:
            return self.params["distances"][x, np.asarray(points, dtype=int)]
        if self.kind is SpaceKind.POINT_CLOUD:
            pts = self.params["points"]
            return np.linalg.norm(pts[np.asarray(points, dtype=int)] - pts[x], axis=1)
        if self.kind is SpaceKind.BOX:
            return np.linalg.norm(np.asarray(points, dtype=float).reshape(-1, self.dim) - x, axis=1)
        return np.abs(np.asarray(points, dtype=float) - x)

    # ------------------------------------------------------------------
    # 载体
    # ------------------------------------------------------------------

    def carrier(self) -> np.ndarray:
        """按规范顺序（坐标升序/字典序/下标升序）物化的载体"""
        if self._carrier is not None:
            return self._carrier
        if self.is_indexed:
            self._carrier = np.arange(self._n_indexed())
        elif self.kind is SpaceKind.INTERVAL:
            self._carrier = _uniform_axis(self.params["lo"], self.params["hi"], self.resolution)
        elif self.kind is SpaceKind.LATTICE_LINE:
            lo, hi = self.params["window"]
            self._carrier = _uniform_axis(lo, hi, self.resolution)
        else:
            axes = [_uniform_axis(lo, hi, self.resolution)
                    for lo, hi in zip(self.params["lo"], self.params["hi"])]
            total = int(np.prod([len(a) for a in axes]))
            if total > MAX_MATERIALIZED_POINTS:
                raise ResourceError(
                    f"box 在分辨率 {self.resolution} 下需物化 {total} 个点，超出上限",
                    ["增大 resolution", "或改用 point_cloud"])
            mesh = np.meshgrid(*axes, indexing="ij")
            self._carrier = np.stack([m.reshape(-1) for m in mesh], axis=1)
            get_logger().debug(f"物化 box 载体: {total} 个点", resolution=self.resolution)
        return self._carrier

    def kdtree(self) -> cKDTree:
        """点云与盒载体的 KD 树（惰性构建一次）"""
        if self._tree is None:
            if self.kind is SpaceKind.POINT_CLOUD:
                self._tree = cKDTree(self.params["points"])
            elif self.kind is SpaceKind.BOX:
                self._tree = cKDTree(self.carrier())
            else:
                raise DomainError(f"{self.kind.value} 不使用 KD 树")
        return self._tree

    def min_positive_gap(self) -> float:
        """物化点之间的最小正距离；少于 2 个点时返回 +∞"""
        if self.kind is SpaceKind.INTERVAL:
            lo, hi = self.params["lo"], self.params["hi"]
            if hi == lo:
                return math.inf
            return (hi - lo) / max(1, math.ceil((hi - lo) / self.resolution - 1e-9))
        if self.kind is SpaceKind.LATTICE_LINE:
            return self.resolution
        if self.kind is SpaceKind.BOX:
            steps = [(hi - lo) / max(1, math.ceil((hi - lo) / self.resolution - 1e-9))
                     for lo, hi in zip(self.params["lo"], self.params["hi"]) if hi > lo]
            return min(steps) if steps else math.inf
        if self.kind is SpaceKind.FINITE_MATRIX:
            table = self.params["distances"]
            if table.shape[0] < 2:
                return math.inf
            return float(table[~np.eye(table.shape[0], dtype=bool)].min())
        if self.kind is SpaceKind.POINT_CLOUD:
            pts = self.params["points"]
            if pts.shape[0] < 2:
                return math.inf
            dists, _ = self.kdtree().query(pts, k=2)
            return float(dists[:, 1].min())
        carrier = self.carrier()
        if len(carrier) < 2:
            return math.inf
        return float(np.diff(carrier).min())

    def diameter(self) -> float:
        if self.kind is SpaceKind.INTERVAL:
            return self.params["hi"] - self.params["lo"]
        if self.kind is SpaceKind.LATTICE_LINE:
            return math.inf
        if self.kind is SpaceKind.BOX:
            return float(np.linalg.norm(self.params["hi"] - self.params["lo"]))
        if self.kind is SpaceKind.FINITE_MATRIX:
            return float(self.params["distances"].max())
        if self.kind is SpaceKind.POINT_CLOUD:
            pts = self.params["points"]
            return float(pdist(pts).max()) if pts.shape[0] > 1 else 0.0
        carrier = self.carrier()
        return float(carrier[-1] - carrier[0])

    def random_points(self, rng: np.random.Generator, count: int) -> List[PointRef]:
        """从空间中确定性抽样（rng 由调用方以固定种子创建）"""
        if self.kind is SpaceKind.INTERVAL:
            return [float(v) for v in rng.uniform(self.params["lo"], self.params["hi"], count)]
        if self.kind is SpaceKind.LATTICE_LINE:
            lo, hi = self.params["window"]
            return [float(v) for v in rng.uniform(lo, hi, count)]
        if self.kind is SpaceKind.BOX:
            return list(rng.uniform(self.params["lo"], self.params["hi"], (count, self.dim)))
        carrier = self.carrier()
        picks = rng.integers(0, len(carrier), count)
        if self.is_indexed:
            return [int(i) for i in picks]
        return [float(carrier[i]) for i in picks]

    # ------------------------------------------------------------------
    # 球采样
    # ------------------------------------------------------------------

    def ball_offsets(self, x: PointRef, r: float, budget: int, closed: bool = False) -> np.ndarray:
        """
        一维连续统上的精确偏移量 δ（u = x + δ 落在载体内）

        网格锚定在 x，步长 r/B（B 为不小于 budget 的 2 的幂），
        因此 budget 增大时旧网格是新网格的子集。
        """
        if not self.is_continuum:
            raise DomainError(f"{self.kind.value} 不支持偏移采样")
        if not r > 0:
            raise DomainError(f"半径必须为正: r={r}")
        x = self.point(x)
        big_b = next_pow2(budget)
        step = r / big_b
        top = big_b if closed else big_b - 1
        ks = np.arange(-top, top + 1)
        offsets = ks[ks != 0] * step
        if self.kind is SpaceKind.INTERVAL:
            left_room = _room_below(Fraction(x) - Fraction(self.params["lo"]))
            right_room = _room_below(Fraction(self.params["hi"]) - Fraction(x))
            offsets = offsets[(offsets >= -left_room) & (offsets <= right_room)]
            # 端点在球内时总是纳入样本
            edges = [d for d in (-left_room, right_room)
                     if 0 < abs(d) and (abs(d) <= r if closed else abs(d) < r)]
            offsets = np.union1d(offsets, edges) if edges else offsets
        order = np.argsort(-np.abs(offsets), kind="stable")
        return offsets[order]

    def _ball(self, x: PointRef, r: float, budget: int, closed: bool) -> Tuple[np.ndarray, np.ndarray]:
        """球采样内部实现，返回（点，距离），按距离降序"""
        if not r > 0:
            raise DomainError(f"半径必须为正: r={r}", ["半径 r 须满足 r > 0"])
        x = self.point(x)
        if self.is_continuum:
            pts = x + self.ball_offsets(x, r, budget, closed)
            if self.kind is SpaceKind.INTERVAL:
                pts = np.clip(pts, self.params["lo"], self.params["hi"])
            dists = np.abs(pts - x)
        elif self.kind is SpaceKind.BOX:
            per_axis = next_pow2(math.ceil(budget ** (1.0 / self.dim)))
            step = r / per_axis
            axis = np.arange(-per_axis, per_axis + 1) * step
            mesh = np.meshgrid(*([axis] * self.dim), indexing="ij")
            offsets = np.stack([m.reshape(-1) for m in mesh], axis=1)
            pts = x + offsets
            inside = np.all((pts >= self.params["lo"]) & (pts <= self.params["hi"]), axis=1)
            pts = pts[inside]
            dists = np.linalg.norm(pts - x, axis=1)
        elif self.kind is SpaceKind.POINT_CLOUD:
            pts = np.asarray(sorted(self.kdtree().query_ball_point(self.params["points"][x], r)), dtype=int)
            dists = self.distances_from(x, pts) if pts.size else np.zeros(0)
        else:
            pts = self.carrier()
            dists = self.distances_from(x, pts)

        if closed:
            keep = (dists > 0) & (dists <= r)
        else:
            keep = (dists > 0) & (dists < r)
        pts, dists = pts[keep], dists[keep]
        order = np.argsort(-dists, kind="stable")
        return pts[order], dists[order]

    def ball_sample(self, x: PointRef, r: float, budget: int = 256) -> np.ndarray:
        """开球 B(x, r) 去掉 x 的确定性采样，按到 x 的距离降序"""
        return self._ball(x, r, budget, closed=False)[0]

    def closed_ball_sample(self, x: PointRef, r: float, budget: int = 256) -> np.ndarray:
        """闭球 B[x, r] 去掉 x 的确定性采样，按到 x 的距离降序"""
        return self._ball(x, r, budget, closed=True)[0]

    def ball_with_distances(self, x: PointRef, r: float, budget: int = 256,
                            closed: bool = False) -> Tuple[np.ndarray, np.ndarray]:
        return self._ball(x, r, budget, closed)

    def is_isolated(self, x: PointRef, scale: float) -> bool:
        """在工作尺度 scale 下 x 是否孤立（球内无其他物化点）"""
        return len(self.ball_sample(x, scale, budget=4)) == 0

    def describe(self) -> str:
        if self.kind is SpaceKind.CANTOR:
            return f"cantor({self.params['level']})"
        if self.kind is SpaceKind.INTERVAL:
            return f"interval[{self.params['lo']}, {self.params['hi']}]@{self.resolution:g}"
        return f"{self.kind.value}(n={self.size if self.kind is not SpaceKind.LATTICE_LINE else '∞'})"

