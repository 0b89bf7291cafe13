#!/usr/bin/env python3

"""
tvdw 命令行入口

子命令：net、hierarchy、eval、lip、hermeticity、verify、synth
退出码：0 成功且全部验证通过；1 验证失败（反例已写出）；2 用法或前置条件错误

用法示例：
    python tvdw.py verify --theorem biglip --a 5 --b 3 --x 0 --samples 20 --output biglip.csv
    python tvdw.py synth --G "(0.2,0.8)" --verify --samples 100 --output synth.json
"""
import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from dotenv import load_dotenv

import lip_derivatives
import theorem_verifier
from epsilon_nets import (Net, build_hierarchy, check_dense, check_separated, greedy_maximal_net,
                          hierarchy_is_nested, net_from_dict, net_to_dict)
from hermeticity import (geometric_radius_grid, hermeticity_at, hermeticity_of_space,
                         ordered_map)
from metric_space import MetricSpace, SpaceKind
from prescribed_synth import (DEFAULT_VERIFY_BUDGET, RegionSpec, sample_regions, synthesize,
                              verify_prescribed_sets)
from report_writer import atomic_write_text, render_csv, render_json, summary_path, write_json
from tvdw_errors import (ConfigurationError, DomainError, ResolutionError, ResourceError,
                         TVDWError)
from tvdw_logger import LogLevel, get_logger, setup_logger
from tw_function import DEFAULT_TOL, TWFunction, tw_for_space

FORMATS = ("json", "csv")
MAX_THREADS = 64
DEFAULT_SPACE_SPEC = '{"kind": "interval", "lo": 0, "hi": 1, "resolution": 1e-4}'

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2


# ----------------------------------------------------------------------
# 配置
# ----------------------------------------------------------------------

@dataclass
class RunConfig:
    """一次运行的完整配置"""
    command: str
    space_spec: str = DEFAULT_SPACE_SPEC
    function_spec: Optional[str] = None
    points: List[Any] = field(default_factory=list)
    sample_count: int = 0
    seed: int = 0
    r_schedule: Optional[List[float]] = None
    threshold: float = lip_derivatives.DEFAULT_THRESHOLD
    budget: Optional[int] = None
    output: Optional[str] = None
    fmt: str = "json"
    threads: int = 1
    log_level: str = "WARNING"
    log_file: Optional[str] = None
    options: Dict[str, Any] = field(default_factory=dict)

    def budget_or(self, default: int) -> int:
        return default if self.budget is None else self.budget


class ConfigManager:
    """配置管理器：命令行参数 > 环境变量 > .env 文件 > 默认值"""

    def __init__(self, env_file: str = ".env"):
        self.env_file = env_file
        self.config: Optional[RunConfig] = None

    def _load_env_file(self):
        """加载 .env 文件，已存在的环境变量不被覆盖"""
        if self.env_file and os.path.exists(self.env_file):
            load_dotenv(self.env_file, override=False)

    def _get_config_value(self, key: str, default: Optional[str] = None) -> Optional[str]:
        value = os.getenv(key)
        return default if value is None or value.strip() == "" else value.strip()

    def _threads(self, cli_value: Optional[int]) -> int:
        raw = cli_value if cli_value is not None else self._get_config_value("TVDW_THREADS", "1")
        try:
            threads = int(raw)
        except (TypeError, ValueError):
            raise ConfigurationError(f"❌ 线程数不是整数: {raw!r}",
                                     ["TVDW_THREADS / --threads 取 1..64 的整数"])
        if not 1 <= threads <= MAX_THREADS:
            raise ConfigurationError(f"❌ 线程数超出范围: {threads}",
                                     [f"TVDW_THREADS / --threads 取 1..{MAX_THREADS}"])
        return threads

    def _log_level(self, cli_value: Optional[str]) -> str:
        raw = cli_value or self._get_config_value("TVDW_LOG_LEVEL", "WARNING")
        try:
            return LogLevel.parse(raw).value
        except ValueError:
            raise ConfigurationError(f"❌ 无效的日志级别: {raw}",
                                     [f"有效选项: {', '.join(level.value for level in LogLevel)}"])

    @staticmethod
    def _check_space_reference(text: str):
        if not text.lstrip().startswith("{") and not os.path.isfile(text):
            raise ConfigurationError(f"❌ 空间规格文件不存在: {text}",
                                     ["传入 JSON 文本（以 { 开头）或已存在的文件路径"])

    def load_config(self, args: argparse.Namespace) -> RunConfig:
        """由 argparse 结果生成并校验 RunConfig"""
        self._load_env_file()
        self._check_space_reference(args.space)

        if args.samples < 0:
            raise ConfigurationError(f"❌ --samples 不能为负数: {args.samples}")
        if args.budget is not None and args.budget < 2:
            raise ConfigurationError(f"❌ --budget 至少为 2: {args.budget}")
        if not args.threshold > 0:
            raise ConfigurationError(f"❌ --threshold 必须为正: {args.threshold}")

        options = {k: v for k, v in vars(args).items() if k not in _COMMON_DESTS}
        self.config = RunConfig(
            command=args.command,
            space_spec=args.space,
            function_spec=_function_spec(args),
            points=parse_point_list(args.x) if args.x else [],
            sample_count=args.samples,
            seed=args.seed,
            r_schedule=parse_schedule(args),
            threshold=args.threshold,
            budget=args.budget,
            output=args.output,
            fmt=args.format or _default_format(args),
            threads=self._threads(args.threads),
            log_level=self._log_level(args.log_level),
            log_file=self._get_config_value("TVDW_LOG_FILE"),
            options=options,
        )
        return self.config


# ----------------------------------------------------------------------
# 输入解析
# ----------------------------------------------------------------------

def _function_spec(args: argparse.Namespace) -> Optional[str]:
    spec = getattr(args, "function", None)
    if spec is None and args.command in ("eval", "lip") and args.a is not None and args.b is not None:
        spec = f"tw:{args.a!r},{args.b!r}"
    return spec


def parse_space_spec(text: str) -> MetricSpace:
    """JSON 文本或 JSON 文件路径 → MetricSpace；字段错误时报出字段名"""
    raw = text.strip()
    if not raw.startswith("{"):
        ConfigManager._check_space_reference(raw)
        with open(raw, "r", encoding="utf-8") as f:
            raw = f.read()
    try:
        spec = json.loads(raw)
    except json.JSONDecodeError as e:
        raise DomainError(f"空间规格不是合法 JSON: {e.msg}（第 {e.lineno} 行第 {e.colno} 列）")
    return MetricSpace.from_dict(spec)


def parse_point_list(text: str) -> List[Any]:
    """"0,0.25" 或 "[0.1,0.2],[0.3,0.4]" → 点引用列表"""
    try:
        values = json.loads(f"[{text}]")
    except json.JSONDecodeError:
        raise ConfigurationError(f"❌ 无法解析点列表: {text}",
                                 ["一维空间: --x 0,0.25", "box 空间: --x [0.1,0.2],[0.3,0.4]"])
    return values


def parse_schedule(args: argparse.Namespace) -> Optional[List[float]]:
    """--radii 显式列表优先，否则由 --rmax/--rmin/--ratio 生成几何网格"""
    if getattr(args, "radii", None):
        try:
            radii = [float(v) for v in args.radii.split(",") if v.strip()]
        except ValueError:
            raise ConfigurationError(f"❌ 无法解析半径列表: {args.radii}")
        if not radii or any(r <= 0 for r in radii):
            raise ConfigurationError("❌ 半径列表必须非空且全为正数")
        return radii
    if getattr(args, "rmax", None) is not None and getattr(args, "rmin", None) is not None:
        try:
            return geometric_radius_grid(args.rmax, args.rmin, args.ratio)
        except DomainError as e:
            raise ConfigurationError(f"❌ 半径网格参数无效: {e.message}")
    return None


def parse_function_spec(text: Optional[str], space: MetricSpace, depth: Optional[int] = None) -> Callable:
    """tw:a,b[,index_start] 或 builtin:identity|const[:c]|abs|square|dist:<x0>"""
    if not text:
        raise ConfigurationError("❌ 缺少 --function", ["例如 --function tw:4,2 或 --function builtin:abs"])
    kind, _, body = text.partition(":")
    if kind == "builtin":
        return lip_derivatives.builtin(body, space)
    if kind == "tw":
        try:
            parts = [float(v) for v in body.split(",")]
        except ValueError:
            raise DomainError(f"TW 规格无法解析: {text}", ["格式: tw:a,b[,index_start]"])
        if len(parts) not in (2, 3):
            raise DomainError(f"TW 规格需要 2 或 3 个数: {text}", ["格式: tw:a,b[,index_start]"])
        index_start = int(parts[2]) if len(parts) == 3 else 0
        return tw_for_space(space, parts[0], parts[1], index_start=index_start, depth=depth)
    raise DomainError(f"未知函数规格: {text}", ["可选 tw:a,b[,index_start] 或 builtin:<name>"])


def resolve_points(config: RunConfig, space: MetricSpace, required: bool = True) -> List[Any]:
    """显式点在前，随后是固定种子的随机样本"""
    points = [space.point(p) for p in config.points]
    if config.sample_count:
        rng = np.random.default_rng(config.seed)
        points.extend(space.random_points(rng, config.sample_count))
    if required and not points:
        raise ConfigurationError("❌ 没有待计算的点", ["用 --x 指定点，或用 --samples N 随机抽样"])
    return points


# ----------------------------------------------------------------------
# 输出
# ----------------------------------------------------------------------

def emit(config: RunConfig, payload: Any, columns: Optional[Sequence[str]] = None,
         rows: Optional[Sequence[Sequence[Any]]] = None):
    """按格式渲染并写出；无 --output 时写 stdout"""
    if config.fmt == "csv" and columns is not None:
        text = render_csv(columns, rows or [])
    else:
        text = render_json(payload)
    if not config.output:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    if not atomic_write_text(config.output, text):
        raise ResourceError(f"报告写入失败: {config.output}", ["检查目录权限与磁盘空间"])
    if config.fmt == "csv" and columns is not None and isinstance(payload, dict) and "summary" in payload:
        write_json(summary_path(config.output), payload["summary"])


# ----------------------------------------------------------------------
# 子命令
# ----------------------------------------------------------------------

def load_net(space: MetricSpace, path: str) -> Net:
    """读取 net 子命令的 JSON 输出（或只含 epsilon/points 的网 JSON）"""
    if not os.path.isfile(path):
        raise ConfigurationError(f"❌ 网文件不存在: {path}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise DomainError(f"网文件不是合法 JSON: {e.msg}（第 {e.lineno} 行）")
    if isinstance(data, dict) and "net" in data:
        data = data["net"]
    if not isinstance(data, dict):
        raise DomainError("网 JSON 必须是对象")
    return net_from_dict(space, data)


def cmd_net(config: RunConfig, space: MetricSpace) -> int:
    opts = config.options
    if opts.get("load"):
        # 重新认证已保存的网
        net = load_net(space, opts["load"])
    elif opts.get("epsilon") is None:
        raise ConfigurationError("❌ net 需要 --epsilon 或 --load")
    else:
        seeds = parse_point_list(opts["seed_points"]) if opts.get("seed_points") else []
        net = greedy_maximal_net(space, opts["epsilon"], seeds)
    sep, dense = check_separated(net), check_dense(net)
    payload = {"space": space.to_dict(), "net": net_to_dict(net),
               "separated": sep.to_dict(), "dense": dense.to_dict()}
    points = net_to_dict(net).get("points", [])
    emit(config, payload, ["index", "point"], [[i, p] for i, p in enumerate(points)])
    return EXIT_OK if sep.ok and dense.ok else EXIT_VERIFY_FAILED


def cmd_hierarchy(config: RunConfig, space: MetricSpace) -> int:
    opts = config.options
    h = build_hierarchy(space, opts["a"], opts["depth"], monotone=not opts["non_monotone"],
                        implicit=True if opts["implicit"] else None)
    nested = hierarchy_is_nested(h)
    payload = {"space": space.to_dict(), "a": h.a, "depth": h.depth, "monotone": h.monotone,
               "implicit": h.implicit, "nested": nested, "certificates": h.certificates}
    columns = ["n", "epsilon", "size", "separated", "dense", "min_separation", "max_gap"]
    rows = [[c[k] for k in columns] for c in h.certificates]
    emit(config, payload, columns, rows)
    certified = all(c["separated"] and c["dense"] for c in h.certificates)
    return EXIT_OK if certified and (nested or not h.monotone) else EXIT_VERIFY_FAILED


def cmd_eval(config: RunConfig, space: MetricSpace) -> int:
    f = parse_function_spec(config.function_spec, space, config.options.get("depth"))
    tol = config.options["tol"]
    points = resolve_points(config, space)

    def evaluate(p):
        if isinstance(f, TWFunction):
            return f.evaluate(p, tol).to_dict()
        return {"value": float(f([p])[0]), "terms_used": 0, "error_bound": 0.0}

    results = ordered_map(evaluate, points, config.threads)
    records = [{"x": space.jsonable(p), **res} for p, res in zip(points, results)]
    payload = {"function": f.describe(), "tol": tol, "results": records}
    columns = ["x", "value", "terms_used", "error_bound"]
    emit(config, payload, columns, [[r[k] for k in columns] for r in records])
    return EXIT_OK


def cmd_lip(config: RunConfig, space: MetricSpace) -> int:
    f = parse_function_spec(config.function_spec, space, config.options.get("depth"))
    budget = config.budget_or(lip_derivatives.DEFAULT_BUDGET)
    points = resolve_points(config, space)
    fixed_r = config.options.get("r")

    def estimate(p):
        if fixed_r is not None:
            return list(lip_derivatives.fixed_radius_suite(f, space, p, fixed_r, config.r_schedule, budget))
        suite = lip_derivatives.estimate_all(f, space, p, config.r_schedule, config.threshold, budget)
        return [suite.lip, suite.Lip, suite.LLip]

    per_point = ordered_map(estimate, points, config.threads)
    violations = sum(1 for g in per_point if not (g[0].value <= g[1].value <= g[2].value))
    wanted = config.options.get("functional", "all")
    keep = range(3) if wanted == "all" else [("lip", "Lip", "LLip").index(wanted)]
    estimates = [group[i] for group in per_point for i in keep]
    payload = {"function": f.describe(), "estimates": [e.to_dict() for e in estimates],
               "ordering_violations": violations}
    emit(config, payload, lip_derivatives.CSV_COLUMNS, [e.csv_row() for e in estimates])
    if violations:
        get_logger().error("泛函次序 lip ≤ Lip ≤ 𝕃ip 不成立", count=violations)
        return EXIT_VERIFY_FAILED
    return EXIT_OK


def cmd_hermeticity(config: RunConfig, space: MetricSpace) -> int:
    budget = config.budget_or(256)
    lambdas = config.options.get("lambdas") or []
    if config.options.get("sweep") and not config.points and not config.sample_count:
        config.sample_count = 100
    points = resolve_points(config, space)
    reports = ordered_map(lambda p: hermeticity_at(space, p, config.r_schedule, budget, lambdas),
                          points, config.threads)
    summary = hermeticity_of_space(space, points, config.r_schedule, budget, config.threads)
    payload = {"space": space.to_dict(), "points": [r.to_dict() for r in reports],
               "space_estimate": summary.to_dict()}
    columns = ["x", "H", "p_s", "duality_gap", "isolated"]
    rows = [[r.point, r.H_estimate, r.p_s_estimate, r.duality_gap, r.isolated] for r in reports]
    emit(config, payload, columns, rows)
    return EXIT_OK


def _little_lip_H(config: RunConfig, space: MetricSpace, points: List[Any]) -> float:
    if config.options.get("H") is not None:
        return config.options["H"]
    if space.kind in (SpaceKind.INTERVAL, SpaceKind.LATTICE_LINE, SpaceKind.BOX):
        return 1.0
    estimate = hermeticity_of_space(space, points, threads=config.threads).estimate
    if not estimate:
        raise DomainError("样本点全部孤立，无法验证小 lip 定理", ["检查空间与采样点"])
    return estimate


def cmd_verify(config: RunConfig, space: MetricSpace) -> int:
    opts = config.options
    logger = get_logger()
    points = resolve_points(config, space)
    if opts["theorem"] == "biglip":
        a = opts["a"] if opts["a"] is not None else 5
        b = opts["b"] if opts["b"] is not None else 3
        f = tw_for_space(space, a, b)
        n_max = opts["nmax"] or 8
        budget = config.budget_or(256)
        params: Dict[str, Any] = {"theorem": "biglip", "a": a, "b": b, "n_max": n_max}
        per_point = ordered_map(
            lambda p: theorem_verifier.big_lip_witnesses(f, p, range(1, n_max + 1), budget),
            points, config.threads)
    else:
        H = _little_lip_H(config, space, points)
        if opts["a"] is None or opts["b"] is None:
            chosen = theorem_verifier.choose_params(H)
            a, b, lam = chosen.a, chosen.b, chosen.lam
        else:
            a, b = opts["a"], opts["b"]
            lam = theorem_verifier.DEFAULT_LAMBDA_FRACTION * H
        lam = opts["lam"] if opts["lam"] is not None else lam
        theorem_verifier.check_little_lip_hypothesis(a, b, H)
        f = tw_for_space(space, a, b)
        n_max = opts["nmax"] or 4
        r_list = config.r_schedule or [float(a) ** (-n) for n in range(1, n_max + 1)]
        budget = config.budget_or(64)
        params = {"theorem": "littlelip", "a": a, "b": b, "H": H, "lambda": lam,
                  "gamma": theorem_verifier.gamma_constant(a, b, lam),
                  "hypothesis_lhs": theorem_verifier.hypothesis_lhs(a, b), "radii": r_list}
        per_point = ordered_map(
            lambda p: theorem_verifier.little_lip_bounds(f, p, r_list, lam, H, budget),
            points, config.threads)

    records = [rec for group in per_point for rec in group]
    summary = {**params, **theorem_verifier.summarize(records)}
    logger.log_verify_stats(theorem_verifier.summarize(records))
    payload = {"summary": summary, "records": [rec.to_dict() for rec in records]}
    emit(config, payload, theorem_verifier.CSV_COLUMNS, [rec.csv_row() for rec in records])
    return EXIT_OK if summary["passed"] == summary["tested"] else EXIT_VERIFY_FAILED


def cmd_synth(config: RunConfig, space: MetricSpace) -> int:
    opts = config.options
    region = RegionSpec.parse(space, opts["G"])
    sf = synthesize(space, region, opts["variant"], opts["a"], opts["b"], opts["H"], opts["lam"])
    payload: Dict[str, Any] = {
        "space": space.to_dict(), "function": sf.describe(), "region": region.to_dict(),
        "variant": sf.variant, "a": sf.a, "b": sf.b, "alpha": sf.alpha,
        "lambda": sf.lam, "gamma": sf.gamma,
    }
    code = EXIT_OK
    if opts["verify"]:
        rng = np.random.default_rng(config.seed)
        count = config.sample_count or 100
        samples_F, samples_G, samples_IntF, excluded = sample_regions(sf, rng, count, opts["collar"])
        report = verify_prescribed_sets(
            sf, samples_F, samples_G, samples_IntF, config.threshold, opts["collar"],
            config.r_schedule, config.budget_or(DEFAULT_VERIFY_BUDGET), config.threads, excluded)
        payload["verification"] = report.to_dict()
        code = EXIT_OK if report.passed else EXIT_VERIFY_FAILED
    emit(config, payload)
    return code


HANDLERS: Dict[str, Callable[[RunConfig, MetricSpace], int]] = {
    "net": cmd_net,
    "hierarchy": cmd_hierarchy,
    "eval": cmd_eval,
    "lip": cmd_lip,
    "hermeticity": cmd_hermeticity,
    "verify": cmd_verify,
    "synth": cmd_synth,
}

_DEFAULT_FORMAT = {"hierarchy": "csv", "verify": "csv"}


def _default_format(args: argparse.Namespace) -> str:
    if args.command == "hermeticity" and args.sweep:
        return "csv"
    return _DEFAULT_FORMAT.get(args.command, "json")


def run(config: RunConfig) -> int:
    """执行一次子命令，返回退出码"""
    logger = get_logger()
    task = f"tvdw {config.command}"
    logger.log_task_start(task, threads=config.threads, seed=config.seed)
    start = time.time()
    try:
        space = parse_space_spec(config.space_spec)
        code = HANDLERS[config.command](config, space)
    except ResolutionError as e:
        logger.error(f"[任务错误] {task}: 找不到见证点", scale_index=e.scale_index)
        print(f"\n❌ {e}", file=sys.stderr)
        return EXIT_VERIFY_FAILED
    except TVDWError as e:
        logger.error(f"[任务错误] {task}: {type(e).__name__}")
        print(f"\n❌ {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:
        logger.log_task_error(task, e)
        raise
    logger.log_task_complete(task, time.time() - start, exit_code=code)
    return code


# ----------------------------------------------------------------------
# 参数解析
# ----------------------------------------------------------------------

def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--space', dest='space', action='store', default=DEFAULT_SPACE_SPEC,
                        help='空间规格：JSON 文本或 JSON 文件路径（默认 [0,1]，分辨率 1e-4）')
    common.add_argument('--x', dest='x', action='store', default=None,
                        help='逗号分隔的点，例如 0,0.25；box 空间用 [0.1,0.2],[0.3,0.4]')
    common.add_argument('--samples', '--points', dest='samples', action='store', type=int, default=0,
                        help='随机样本数（固定种子）')
    common.add_argument('--seed', dest='seed', action='store', type=int, default=0,
                        help='随机种子，默认 0')
    common.add_argument('--radii', dest='radii', action='store', default=None,
                        help='逗号分隔的半径序列（优先于 --rmax/--rmin）')
    common.add_argument('--rmax', dest='rmax', action='store', type=float, default=None,
                        help='几何半径网格的最大半径')
    common.add_argument('--rmin', dest='rmin', action='store', type=float, default=None,
                        help='几何半径网格的最小半径')
    common.add_argument('--ratio', dest='ratio', action='store', type=float, default=0.5,
                        help='几何半径网格的公比，默认 0.5')
    common.add_argument('--threshold', dest='threshold', action='store', type=float,
                        default=lip_derivatives.DEFAULT_THRESHOLD, help='发散判定阈值，默认 1e3')
    common.add_argument('--budget', dest='budget', action='store', type=int, default=None,
                        help='每个球的采样预算')
    common.add_argument('--output', dest='output', action='store', default=None,
                        help='输出文件路径，缺省写到 stdout')
    common.add_argument('--format', dest='format', action='store', choices=FORMATS, default=None,
                        help='输出格式 json|csv')
    common.add_argument('--threads', dest='threads', action='store', type=int, default=None,
                        help='并行线程数 1..64（默认取 TVDW_THREADS 或 1）')
    common.add_argument('--log-level', dest='log_level', action='store', default=None,
                        help='日志级别（默认取 TVDW_LOG_LEVEL 或 WARNING）')
    common.add_argument('--env-file', dest='env_file', action='store', default='.env',
                        help='.env 文件路径')
    return common


_COMMON_DESTS = {"command", "space", "x", "samples", "seed", "radii", "rmax", "rmin", "ratio",
                 "threshold", "budget", "output", "format", "threads", "log_level", "env_file",
                 "function"}


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog='tvdw', description='度量空间上的 Takagi–van der Waerden 函数工具')
    sub = parser.add_subparsers(dest='command', metavar='command', required=True)

    p = sub.add_parser('net', parents=[common], help='贪心构造极大 ε-分离网并认证')
    p.add_argument('--epsilon', dest='epsilon', action='store', type=float, default=None, help='分离尺度 ε')
    p.add_argument('--seed-points', dest='seed_points', action='store', default=None,
                   help='必须包含的初始点（须 ε-分离）')
    p.add_argument('--load', dest='load', action='store', default=None,
                   help='读取已保存的网 JSON 并重新认证（忽略 --epsilon）')

    p = sub.add_parser('hierarchy', parents=[common], help='构造网层级并输出各层证书')
    p.add_argument('--a', dest='a', action='store', type=float, required=True, help='尺度底数 a > 1')
    p.add_argument('--depth', dest='depth', action='store', type=int, required=True, help='层级深度')
    p.add_argument('--non-monotone', dest='non_monotone', action='store_true', help='各层独立构造')
    p.add_argument('--implicit', dest='implicit', action='store_true', help='强制使用隐式格点')

    for name, text in (('eval', '求 TW 或内置函数值'), ('lip', '估计 lip / Lip / 𝕃ip')):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument('--function', dest='function', action='store', default=None,
                       help='tw:a,b[,index_start] 或 builtin:identity|const[:c]|abs|square|dist:<x0>')
        p.add_argument('--a', dest='a', action='store', type=float, default=None,
                       help='与 --b 一起等价于 --function tw:a,b')
        p.add_argument('--b', dest='b', action='store', type=float, default=None, help='类型参数 b')
        p.add_argument('--depth', dest='depth', action='store', type=int, default=None,
                       help='显式层级深度（缺省按空间自动选择）')
        if name == 'eval':
            p.add_argument('--tol', dest='tol', action='store', type=float, default=DEFAULT_TOL,
                           help='截断容差，默认 1e-12')
        else:
            p.add_argument('--r', dest='r', action='store', type=float, default=None,
                           help='固定半径：输出 lip_r、Lip_r、𝕃ip^r')
            p.add_argument('--functional', dest='functional', action='store',
                           choices=('lip', 'Lip', 'LLip', 'all'), default='all', help='只输出指定泛函')

    p = sub.add_parser('hermeticity', parents=[common], help='估计密闭度与壳孔隙度')
    p.add_argument('--all', dest='sweep', action='store_true',
                   help='扫描随机样本点（默认 100 个）并输出 CSV')
    p.add_argument('--lambda', dest='lambdas', action='append', type=float, default=None,
                   help='附带 RH_λ 的 λ 值，可重复')

    p = sub.add_parser('verify', parents=[common], help='按定理构造见证点并检查下界')
    p.add_argument('--theorem', dest='theorem', action='store', choices=('biglip', 'littlelip'),
                   required=True, help='biglip 或 littlelip')
    p.add_argument('--a', dest='a', action='store', type=int, default=None, help='类型参数 a')
    p.add_argument('--b', dest='b', action='store', type=int, default=None, help='类型参数 b')
    p.add_argument('--nmax', dest='nmax', action='store', type=int, default=None,
                   help='尺度上限（biglip 默认 8，littlelip 默认 4）')
    p.add_argument('--lambda', dest='lam', action='store', type=float, default=None, help='λ < H')
    p.add_argument('--H', dest='H', action='store', type=float, default=None, help='密闭度（默认自动）')

    p = sub.add_parser('synth', parents=[common], help='按开集 G 合成函数并验证')
    p.add_argument('--G', dest='G', action='store', required=True,
                   help='开集 G，例如 "(0.2,0.8)"；空集写 "empty"')
    p.add_argument('--variant', dest='variant', action='store', choices=('little', 'big'),
                   default='little', help='little 或 big')
    p.add_argument('--a', dest='a', action='store', type=int, default=None, help='类型参数 a')
    p.add_argument('--b', dest='b', action='store', type=int, default=None, help='类型参数 b')
    p.add_argument('--H', dest='H', action='store', type=float, default=None, help='密闭度')
    p.add_argument('--lambda', dest='lam', action='store', type=float, default=None, help='λ < H')
    p.add_argument('--collar', dest='collar', action='store', type=float, default=None,
                   help='∂G 附近排除的环带宽度（默认 10·分辨率）')
    p.add_argument('--verify', dest='verify', action='store_true', help='抽样验证规定集合')
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        config = ConfigManager(args.env_file).load_config(args)
    except ConfigurationError as e:
        print(f"\n{e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE

    logger = setup_logger("TVDW", log_level=LogLevel(config.log_level), log_file=config.log_file)
    try:
        return run(config)
    finally:
        if config.log_level in (LogLevel.DEBUG.value, LogLevel.INFO.value):
            logger.print_execution_summary()
        logger.close()


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\n\n⚠️ 用户中断了程序执行", file=sys.stderr)
        sys.exit(130)
