#!/usr/bin/env python3

"""
定理的构造性验证
- 大 Lip 爆破：单调类型 (a,b)、b > 2 时 Lip f(x) = ∞，按证明给出 u_n 与常数 α、β；
- 网位移引理：存在 u ∈ B[x,ε] 使 |φ(u)−φ(x)| ≥ λε/8；
- 小 lip 爆破：2b/(a−b) + 1/(b−1) < H/8 时 Lip^r f(x) ≥ (γ/a)·b^{n(r)}。
"""
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from epsilon_nets import Net, dist_to_net, nearest_in_net
from hermeticity import hermeticity_at, radius_of_hermeticity
from lip_derivatives import lip_r_ball
from metric_space import MetricSpace, PointRef
from tvdw_errors import DomainError, ResolutionError, ResourceError, UnsupportedError
from tvdw_logger import get_logger
from tw_function import TWFunction, partial_sum_lipschitz, tail_increment_bound

NET_POINT_TOL = 1e-12
# 见证比值的求值容差 = EVAL_RTOL · 保证界 · ρ
EVAL_RTOL = 1e-8
PASS_TOL_FACTOR = 10.0
# 判定裕量须小于保证界的这一比例
VERIFIABLE_SLACK_FRACTION = 0.1
DEFAULT_LAMBDA_FRACTION = 0.99


class CaseTag(Enum):
    NET_POINT = "net_point"
    OFF_NET = "off_net"
    LITTLE_LIP = "little_lip"


@dataclass
class WitnessRecord:
    """单个尺度上的见证记录"""
    x: Any
    n: int
    u_n: Any
    rho_n: float
    ratio: float
    guaranteed_bound: float
    case_tag: CaseTag
    eval_tol: float
    passed: bool = False
    detail: Dict[str, Any] = field(default_factory=dict)

    @property
    def margin(self) -> float:
        return self.ratio - self.guaranteed_bound

    def to_dict(self) -> Dict[str, Any]:
        return {
            "x": self.x,
            "n": self.n,
            "u_n": self.u_n,
            "rho_n": self.rho_n,
            "ratio": self.ratio,
            "guaranteed_bound": self.guaranteed_bound,
            "case_tag": self.case_tag.value,
            "pass": self.passed,
            "margin": self.margin,
            "eval_tol": self.eval_tol,
            "detail": self.detail,
        }

    def csv_row(self) -> List[Any]:
        return [self.x, self.n, self.u_n, self.rho_n, self.ratio, self.guaranteed_bound,
                self.case_tag.value, self.passed, self.margin, self.eval_tol]


CSV_COLUMNS = ["x", "n", "u_n", "rho_n", "ratio", "guaranteed_bound", "case_tag", "pass", "margin", "eval_tol"]


def summarize(records: Sequence[WitnessRecord]) -> Dict[str, Any]:
    """{tested, passed, min_margin}"""
    margins = [r.margin for r in records]
    return {
        "tested": len(records),
        "passed": sum(1 for r in records if r.passed),
        "min_margin": min(margins) if margins else None,
    }


# ----------------------------------------------------------------------
# 参数与假设不等式
# ----------------------------------------------------------------------

def hypothesis_lhs(a: float, b: float) -> float:
    """2b/(a−b) + 1/(b−1)"""
    if not (a > b > 1):
        raise DomainError(f"需要 a > b > 1: a={a}, b={b}")
    return 2 * b / (a - b) + 1 / (b - 1)


def gamma_constant(a: float, b: float, lam: float) -> float:
    """γ = λ/8 − 2b/(a−b) − 1/(b−1)"""
    return lam / 8 - hypothesis_lhs(a, b)


def check_little_lip_hypothesis(a: float, b: float, H: float) -> float:
    """检查 2b/(a−b) + 1/(b−1) < H/8，返回左端"""
    lhs = hypothesis_lhs(a, b) if a > b > 1 else math.inf
    if not lhs < H / 8:
        raise DomainError(
            f"假设不等式不成立: 2b/(a−b) + 1/(b−1) = {lhs:.6g} ≥ H/8 = {H / 8:.6g}（a={a}, b={b}）",
            ["用 choose_params(H) 选择 (a,b)", "增大 a 或 b"])
    return lhs


@dataclass
class LittleLipParams:
    a: int
    b: int
    lam: float
    gamma: float

    @property
    def lhs(self) -> float:
        return hypothesis_lhs(self.a, self.b)

    def to_dict(self) -> Dict[str, Any]:
        return {"a": self.a, "b": self.b, "lambda": self.lam, "gamma": self.gamma, "lhs": self.lhs}


def choose_params(H: float, lambda_fraction: float = DEFAULT_LAMBDA_FRACTION) -> LittleLipParams:
    """
    按密闭度估计选择整数 (a, b)

    b = 满足 1/(b−1) ≤ H/16 的最小整数，a = 使 γ(λ) > 0 的最小整数，λ = lambda_fraction·H。
    """
    if not (0 < H <= 1):
        raise DomainError(f"密闭度估计须在 (0, 1] 内: H={H}")
    if not (0 < lambda_fraction < 1):
        raise DomainError(f"lambda_fraction 须在 (0, 1) 内: {lambda_fraction}")
    lam = lambda_fraction * H
    b = max(3, math.ceil(16 / H) + 1)
    while 1 / (b - 2) <= H / 16:
        b -= 1
    room = lam / 8 - 1 / (b - 1)
    a = b + math.floor(2 * b / room) + 1
    while gamma_constant(a, b, lam) <= 0:
        a += 1
    while a - 1 > b and gamma_constant(a - 1, b, lam) > 0:
        a -= 1
    gamma = gamma_constant(a, b, lam)
    assert gamma > 0
    return LittleLipParams(a, b, lam, gamma)


# ----------------------------------------------------------------------
# 大 Lip
# ----------------------------------------------------------------------

def _increment_at_offset(f: TWFunction, x: Any, delta: float, tol: float) -> float:
    return float(f.offset_increments(x, np.array([delta]), tol=tol)[0])


def _usable_tol(f: TWFunction, wanted: float, bound: float, scale: float, n: int,
                verified: Sequence[int]) -> float:
    """
    显式层级上求值容差不低于截断尾项界

    放宽后的判定裕量 PASS_TOL_FACTOR·tol/scale 不小于保证界的 VERIFIABLE_SLACK_FRACTION 时，
    该尺度无法判定，抛 ResourceError 并给出已判定的最大 n。
    """
    h = f.hierarchy
    if h.implicit or h.saturated:
        return wanted
    tol = max(wanted, tail_increment_bound(f.a, f.b, h.depth + 1) * 1.0000001)
    if PASS_TOL_FACTOR * tol / scale >= VERIFIABLE_SLACK_FRACTION * bound:
        last = max(verified) if verified else None
        raise ResourceError(
            f"显式层级深度 {h.depth} 的求值误差 {tol:.3g} 使尺度 n={n} 的判定裕量 "
            f"{PASS_TOL_FACTOR * tol / scale:.3g} 超过保证界 {bound:.3g} 的 {VERIFIABLE_SLACK_FRACTION:.0%}",
            ["区间/格点直线上改用整数 a 的隐式格点层级",
             "有限空间上把层级建到包含全部载体点",
             f"最大可判定 n = {last}" if last is not None else "当前层级没有可判定的尺度"],
            max_feasible_depth=last)
    return tol


def big_lip_witnesses(f: TWFunction, x: PointRef, n_range: Iterable[int],
                      budget: int = 256) -> List[WitnessRecord]:
    """
    按证明构造 u_n：x 属于某层网时取 B(x, 1/(2aⁿ)) 内最远样本（α = (b−2)/(b−1)），
    否则取 S_n 中最近网点（β = (b−2)/(b(b−1))）
    """
    if not f.b > 2:
        raise DomainError(f"定理要求 hypothesis b > 2: b={f.b}", ["选择 b > 2 的 TW 类型"])
    if not f.monotone:
        raise UnsupportedError("大 Lip 验证只支持单调类型（S_n ⊆ S_{n+1}）的层级",
                               ["使用 build_hierarchy(..., monotone=True)"])
    space = f.space
    xp = space.point(x)
    a, b = f.a, f.b
    alpha = (b - 2) / (b - 1)
    beta = (b - 2) / (b * (b - 1))
    records: List[WitnessRecord] = []
    for n in n_range:
        net = f.hierarchy.level(n)
        on_net = dist_to_net(xp, net) < NET_POINT_TOL
        if on_net:
            bound = alpha * b ** n
            radius = 1 / (2 * a ** n)
            if space.is_continuum:
                offs = space.ball_offsets(xp, radius, budget)
                if offs.size == 0:
                    raise ResolutionError(f"尺度 n={n} 的球内没有样本点", scale_index=n)
                delta = float(offs[0])
                rho = abs(delta)
                tol = _usable_tol(f, EVAL_RTOL * bound * rho, bound, rho, n, [r.n for r in records])
                inc = _increment_at_offset(f, xp, delta, tol)
                u = float(Fraction(xp) + Fraction(delta))
            else:
                pts, dists = space.ball_with_distances(xp, radius, budget)
                if len(pts) == 0:
                    raise ResolutionError(f"x={space.jsonable(xp)} 在尺度 n={n} 孤立，找不到见证点",
                                          ["提高空间分辨率", "或缩小 n 的范围"], scale_index=n)
                u, rho = pts[0], float(dists[0])
                tol = _usable_tol(f, EVAL_RTOL * bound * rho, bound, rho, n, [r.n for r in records])
                inc = f.increment(u, xp, tol).value
                u = space.jsonable(int(u) if space.is_indexed else u)
            tag = CaseTag.NET_POINT
        else:
            bound = beta * b ** n
            if net.implicit_den is not None:
                u_exact, d_exact = net.nearest_exact(xp)
                rho = float(d_exact)
                tol = _usable_tol(f, EVAL_RTOL * bound * rho, bound, rho, n, [r.n for r in records])
                inc = f.increment(u_exact, xp, tol).value
                u = float(u_exact)
            else:
                u, rho = nearest_in_net(xp, net)
                tol = _usable_tol(f, EVAL_RTOL * bound * rho, bound, rho, n, [r.n for r in records])
                inc = f.increment(u, xp, tol).value
            tag = CaseTag.OFF_NET
        ratio = abs(inc) / rho
        pass_tol = PASS_TOL_FACTOR * tol / rho
        records.append(WitnessRecord(space.jsonable(xp), n, u, rho, ratio, bound, tag, tol,
                                     passed=ratio >= bound - pass_tol))
    failed = [r for r in records if not r.passed]
    if failed:
        get_logger().error("大 Lip 见证失败", x=space.jsonable(xp), n=[r.n for r in failed])
    return records


# ----------------------------------------------------------------------
# 网位移引理
# ----------------------------------------------------------------------

def _phi_offsets(net: Net, x: Any, offsets: np.ndarray) -> np.ndarray:
    """φ(x+δ) − φ(x)；整数分母格点网上精确计算"""
    if net.implicit_den is not None:
        fx = Fraction(x)
        phi_x = net.nearest_exact(fx)[1]
        return np.array([float(net.nearest_exact(fx + Fraction(float(d)))[1] - phi_x) for d in offsets])
    return net.distances(x + offsets) - dist_to_net(x, net)


def net_displacement_witness(space: MetricSpace, net: Net, x: PointRef, lam: float,
                             H: Optional[float] = None, rh: Optional[float] = None,
                             budget: int = 256, closed: bool = True) -> Tuple[Any, float]:
    """位移引理的见证点：返回 (u, |φ(u)−φ(x)|)，目标为 λε/8"""
    u, disp, _ = _displacement_search(space, net, x, lam, H, rh, budget, closed)
    return u, disp


def _displacement_search(space: MetricSpace, net: Net, x: PointRef, lam: float,
                         H: Optional[float], rh: Optional[float],
                         budget: int, closed: bool) -> Tuple[Any, float, Optional[float]]:
    """
    在 B[x,ε]（closed=False 时为 B(x,ε)）的样本中寻找 |φ(u)−φ(x)| 最大的 u

    候选包括证明的两种情形：φ(x) ≥ λε/8 时的最近网点，以及 |u−x| ∈ [3λε/8, 3ε/8] 的环。
    """
    xp = space.point(x)
    eps = net.epsilon
    if H is None:
        H = hermeticity_at(space, xp).H_estimate
    if not (0 < lam < H):
        raise DomainError(f"需要 0 < λ < H(X,x): λ={lam}, H={H:.6g}")
    if rh is None:
        rh = radius_of_hermeticity(space, xp, lam, H=H)
    if not eps < rh:
        raise DomainError(f"需要 ε < RH_λ(X,x): ε={eps:g}, RH={rh:g}")

    best_u, best, best_delta = None, -1.0, None
    if space.is_continuum:
        offs = space.ball_offsets(xp, eps, budget, closed=closed)
        if offs.size:
            disp = np.abs(_phi_offsets(net, xp, offs))
            j = int(np.argmax(disp))
            best_delta = float(offs[j])
            best_u, best = float(Fraction(xp) + Fraction(best_delta)), float(disp[j])
    else:
        pts, _ = space.ball_with_distances(xp, eps, budget, closed=closed)
        if len(pts):
            disp = np.abs(net.distances(pts) - dist_to_net(xp, net))
            j = int(np.argmax(disp))
            best_u, best = space.jsonable(int(pts[j]) if space.is_indexed else pts[j]), float(disp[j])

    phi_x = dist_to_net(xp, net)
    target = lam * eps / 8
    if phi_x >= target and phi_x > best:
        # 情形一：最近网点 u 满足 |u−x| = φ(x) < ε
        u, d = nearest_in_net(xp, net)
        if d < eps or (closed and d <= eps):
            best_u, best = space.jsonable(u), float(phi_x)
            best_delta = float(Fraction(u) - Fraction(xp)) if space.is_continuum else None
    if best < target:
        get_logger().error("位移引理未找到见证点", x=space.jsonable(xp), epsilon=eps,
                           best=best, target=target)
    return best_u, best, best_delta


# ----------------------------------------------------------------------
# 小 lip
# ----------------------------------------------------------------------

def scale_index(a: float, r: float) -> int:
    """n(r)：a^{-n} ≤ r < a^{-(n−1)}"""
    if not r > 0:
        raise DomainError(f"半径必须为正: r={r}")
    n = max(1, math.ceil(-math.log(r) / math.log(a)))
    while a ** (-n) > r:
        n += 1
    while n > 1 and a ** (-(n - 1)) <= r:
        n -= 1
    return n


def little_lip_bounds(f: TWFunction, x: PointRef, r_list: Sequence[float], lam: float,
                      H: Optional[float] = None, budget: int = 64) -> List[WitnessRecord]:
    """
    对每个 r 取 n = n(r)、ε = a^{-n}，用位移引理的见证点与球样本估计 Lip^r f(x)，
    与保证界 (γ/a)·bⁿ 比较
    """
    space = f.space
    xp = space.point(x)
    a, b = f.a, f.b
    if H is None:
        H = hermeticity_at(space, xp).H_estimate
    check_little_lip_hypothesis(a, b, H)
    gamma = gamma_constant(a, b, lam)
    if not gamma > 0:
        raise DomainError(f"γ = λ/8 − 2b/(a−b) − 1/(b−1) = {gamma:.6g} ≤ 0（λ={lam}）",
                          ["增大 λ（须小于 H）", "或增大 a"])
    rh = radius_of_hermeticity(space, xp, lam, H=H)
    cap = min(1.0, rh)
    records: List[WitnessRecord] = []
    for r in r_list:
        if not (0 < r < cap):
            raise DomainError(f"r 须在 (0, min(1, RH_λ)) = (0, {cap:g}) 内: r={r}")
        n = scale_index(a, r)
        eps = a ** (-n)
        bound = gamma / a * b ** n
        tol = _usable_tol(f, EVAL_RTOL * bound * r, bound, r, n, [rec.n for rec in records])
        net = f.hierarchy.level(n)
        # r 恰为 ε 时见证点须落在开球内
        u, disp, delta = _displacement_search(space, net, xp, lam, H, rh, budget, closed=eps < r)
        sampled = lip_r_ball(f, space, xp, r, budget)
        witness_ratio, rho = 0.0, math.nan
        if u is not None:
            if delta is not None:
                rho = abs(delta)
                witness_ratio = abs(_increment_at_offset(f, xp, delta, tol)) / r
            else:
                rho = space.distance(u, xp)
                witness_ratio = abs(f.increment(u, xp, tol).value) / r
        ratio = max(sampled.value, witness_ratio)
        bn = b ** n
        proof_estimate = (bn * disp - partial_sum_lipschitz(b, n) * rho
                          - 2 * b / (a - b) * bn * eps) / r
        records.append(WitnessRecord(
            space.jsonable(xp), n, u, rho, ratio, bound, CaseTag.LITTLE_LIP, tol,
            passed=ratio >= bound - PASS_TOL_FACTOR * tol / r,
            detail={"r": r, "epsilon": eps, "displacement": disp,
                    "sampled_Lip_r": sampled.value, "proof_estimate": proof_estimate}))
    return records
