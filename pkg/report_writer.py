#!/usr/bin/env python3

"""
报告落盘
JSON/CSV 报告原子写入（临时文件 + fsync + 回读校验 + 重命名），
相同输入产生逐字节相同的输出
"""
import csv
import io
import json
import math
import os
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from tvdw_logger import get_logger

CSV_VERSION_LINE = "# tvdw v1"


def _sanitize(obj: Any) -> Any:
    """numpy 标量/数组转为内置类型，非有限浮点写成字符串"""
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def _cell(value: Any) -> str:
    value = _sanitize(value)
    if isinstance(value, (list, dict)):
        return json.dumps(value, sort_keys=True, ensure_ascii=False)
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


def render_json(data: Any) -> str:
    return json.dumps(_sanitize(data), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def render_csv(columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """首行为版本注释 "# tvdw v1"，随后是表头与数据行"""
    buf = io.StringIO()
    buf.write(CSV_VERSION_LINE + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(columns))
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def atomic_write_text(file_path: str, text: str) -> bool:
    """
    原子性写文件（先写临时文件，再重命名）

    Args:
        file_path: 目标文件路径
        text: 文件内容

    Returns:
        写入是否成功
    """
    logger = get_logger()
    temp_file = f"{file_path}.tmp"
    try:
        dir_path = os.path.dirname(file_path)
        if dir_path:
            os.makedirs(dir_path, exist_ok=True)

        with open(temp_file, "w", encoding="utf-8", newline="") as f:
            f.write(text)
            f.flush()
            os.fsync(f.fileno())

        with open(temp_file, "r", encoding="utf-8", newline="") as f:
            if f.read() != text:
                logger.error(f"[报告] 临时文件校验失败: {temp_file}")
                return False

        os.replace(temp_file, file_path)
        logger.info(f"[报告] ✅ 已写入 {file_path}", bytes=len(text.encode("utf-8")))
        return True

    except OSError as e:
        logger.error(f"[报告] 原子写入失败: {type(e).__name__}: {e}")
        try:
            if os.path.exists(temp_file):
                os.remove(temp_file)
        except OSError:
            pass
        return False


def write_json(file_path: str, data: Any) -> bool:
    return atomic_write_text(file_path, render_json(data))


def read_csv_report(file_path: str) -> List[Dict[str, str]]:
    """读回 v1 CSV 报告（跳过版本行）"""
    with open(file_path, "r", encoding="utf-8", newline="") as f:
        first = f.readline().rstrip("\n")
        if first != CSV_VERSION_LINE:
            raise ValueError(f"不是 tvdw v1 报告: {file_path}")
        return list(csv.DictReader(f))


def summary_path(output: Optional[str]) -> Optional[str]:
    """CSV 报告旁的汇总 JSON 路径：out.csv → out.summary.json"""
    if not output:
        return None
    root, _ = os.path.splitext(output)
    return f"{root}.summary.json"
