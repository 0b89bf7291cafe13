#!/usr/bin/env python3

"""
TVDW 统一日志系统
控制台输出走 stderr（stdout 留给 JSON 结果），可选滚动文件输出
"""
import logging
import sys
import json
import threading
import traceback
from datetime import datetime
from typing import Dict, Any, Optional, List
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from logging.handlers import RotatingFileHandler


class LogLevel(Enum):
    """日志级别"""
    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"

    @classmethod
    def parse(cls, text: str) -> "LogLevel":
        """从字符串解析日志级别（不区分大小写）"""
        try:
            return cls(text.strip().upper())
        except ValueError:
            raise ValueError(f"未知日志级别: {text}")


@dataclass
class LogStats:
    """日志统计信息"""
    total_logs: int = 0
    counts: Dict[str, int] = field(default_factory=lambda: {lvl.value: 0 for lvl in LogLevel})
    start_time: datetime = field(default_factory=datetime.now)

    def increment(self, level: LogLevel):
        """增加日志计数"""
        self.total_logs += 1
        self.counts[level.value] += 1

    def get_summary(self) -> Dict[str, Any]:
        """获取统计摘要"""
        runtime = datetime.now() - self.start_time
        errors = self.counts["ERROR"] + self.counts["CRITICAL"]
        return {
            'total_logs': self.total_logs,
            'debug_count': self.counts["DEBUG"],
            'info_count': self.counts["INFO"],
            'warning_count': self.counts["WARNING"],
            'error_count': self.counts["ERROR"],
            'critical_count': self.counts["CRITICAL"],
            'runtime_seconds': runtime.total_seconds(),
            'start_time': self.start_time.isoformat(),
            'error_rate': errors / max(1, self.total_logs)
        }


class TVDWLogger:
    """TVDW 统一日志系统"""

    def __init__(self,
                 name: str = "TVDW",
                 log_file: Optional[str] = None,
                 console_output: bool = True,
                 log_level: LogLevel = LogLevel.WARNING,
                 max_file_size: int = 10 * 1024 * 1024,  # 10MB
                 backup_count: int = 5):
        """
        初始化日志系统

        Args:
            name: 日志器名称
            log_file: 日志文件路径，None 表示不写文件
            console_output: 是否输出到 stderr
            log_level: 日志级别
            max_file_size: 最大文件大小（字节）
            backup_count: 备份文件数量
        """
        self.name = name
        self.console_output = console_output
        self.log_level = log_level
        self.log_file = Path(log_file) if log_file else None

        self.stats = LogStats()
        self.lock = threading.Lock()
        self.error_summary: List[Dict[str, Any]] = []

        self.logger = logging.getLogger(name)
        self.logger.setLevel(getattr(logging, log_level.value))
        self.logger.propagate = False
        self.logger.handlers.clear()

        formatter = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )

        if console_output:
            console_handler = logging.StreamHandler(sys.stderr)
            console_handler.setFormatter(formatter)
            self.logger.addHandler(console_handler)

        if self.log_file is not None:
            self.log_file.parent.mkdir(parents=True, exist_ok=True)
            file_handler = RotatingFileHandler(
                self.log_file,
                maxBytes=max_file_size,
                backupCount=backup_count,
                encoding='utf-8'
            )
            file_handler.setFormatter(formatter)
            self.logger.addHandler(file_handler)

        self.debug(f"TVDW 日志系统初始化完成 - 文件: {self.log_file or '无'}")

    def _log(self, level: LogLevel, message: str, extra_data: Dict = None):
        """内部日志方法"""
        with self.lock:
            self.stats.increment(level)

            if level in (LogLevel.ERROR, LogLevel.CRITICAL):
                self.error_summary.append({
                    'timestamp': datetime.now().isoformat(),
                    'level': level.value,
                    'message': message,
                    'extra_data': extra_data or {}
                })
                if len(self.error_summary) > 100:
                    self.error_summary = self.error_summary[-50:]

            log_method = getattr(self.logger, level.value.lower())
            if extra_data:
                extra_str = json.dumps(extra_data, ensure_ascii=False, default=str)
                log_method(f"{message} | 额外数据: {extra_str}")
            else:
                log_method(message)

    def debug(self, message: str, **kwargs):
        """调试日志"""
        self._log(LogLevel.DEBUG, message, kwargs)

    def info(self, message: str, **kwargs):
        """信息日志"""
        self._log(LogLevel.INFO, message, kwargs)

    def warning(self, message: str, **kwargs):
        """警告日志"""
        self._log(LogLevel.WARNING, message, kwargs)

    def error(self, message: str, **kwargs):
        """错误日志"""
        self._log(LogLevel.ERROR, message, kwargs)

    def log_exception(self, message: str, exception: Exception, **kwargs):
        """记录异常"""
        error_details = {
            'exception_type': type(exception).__name__,
            'exception_message': str(exception),
            'traceback': traceback.format_exc(),
            **kwargs
        }
        self.error(f"{message}: {exception}", **error_details)

    def log_task_start(self, task_name: str, **kwargs):
        """记录任务开始"""
        self.info(f"[任务开始] {task_name}", task_name=task_name, **kwargs)

    def log_task_complete(self, task_name: str, duration: float, **kwargs):
        """记录任务完成"""
        self.info(f"[任务完成] {task_name} - 耗时: {duration:.2f}秒",
                  task_name=task_name, duration=duration, **kwargs)

    def log_task_error(self, task_name: str, error: Exception, **kwargs):
        """记录任务错误"""
        self.log_exception(f"[任务错误] {task_name}", error, task_name=task_name, **kwargs)

    def log_verify_stats(self, stats: Dict[str, Any]):
        """记录验证汇总（tested / passed / min_margin）"""
        if stats.get('passed', 0) < stats.get('tested', 0):
            self.error("验证存在失败记录", **stats)
        else:
            self.info("验证统计信息", **stats)

    def get_stats(self) -> Dict[str, Any]:
        """获取日志统计信息"""
        with self.lock:
            return self.stats.get_summary()

    def get_error_summary(self) -> List[Dict[str, Any]]:
        """获取错误汇总"""
        with self.lock:
            return self.error_summary.copy()

    def print_execution_summary(self):
        """打印执行摘要（stderr）"""
        stats = self.get_stats()
        errors = self.get_error_summary()
        out = sys.stderr

        print("\n" + "=" * 60, file=out)
        print("TVDW 执行摘要", file=out)
        print("=" * 60, file=out)
        print(f"执行时间: {stats['runtime_seconds']:.2f} 秒", file=out)
        print(f"总日志数: {stats['total_logs']}", file=out)
        print(f"错误率: {stats['error_rate']:.1%}", file=out)

        if errors:
            print(f"\n错误汇总 (最近 {len(errors)} 个):", file=out)
            for i, error in enumerate(errors[-10:], 1):
                message = error['message'][:100]
                if len(error['message']) > 100:
                    message += "..."
                print(f"  {i}. [{error['timestamp'][:19]}] {error['level']}: {message}", file=out)
        else:
            print("\n✅ 执行过程中没有错误", file=out)

        if self.log_file is not None:
            print(f"\n📄 详细日志文件: {self.log_file}", file=out)
        print("=" * 60, file=out)

    def close(self):
        """关闭日志系统"""
        self.debug("TVDW 日志系统关闭")
        for handler in self.logger.handlers:
            handler.close()
        self.logger.handlers.clear()


# 全局日志实例
_global_logger: Optional[TVDWLogger] = None
_global_lock = threading.Lock()


def get_logger(name: str = "TVDW", **kwargs) -> TVDWLogger:
    """获取全局日志实例"""
    global _global_logger
    with _global_lock:
        if _global_logger is None:
            _global_logger = TVDWLogger(name, **kwargs)
        return _global_logger


def setup_logger(name: str = "TVDW", **kwargs) -> TVDWLogger:
    """设置全局日志实例"""
    global _global_logger
    with _global_lock:
        if _global_logger is not None:
            _global_logger.close()
        _global_logger = TVDWLogger(name, **kwargs)
        return _global_logger
