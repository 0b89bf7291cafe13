#!/usr/bin/env python3

"""
TVDW 异常体系
所有异常携带建议列表，打印时附带 "💡 建议：" 编号提示
"""
from typing import List, Optional


class TVDWError(ValueError):
    """工具包异常基类"""

    def __init__(self, message: str, suggestions: List[str] = None):
        super().__init__(message)
        self.message = message
        self.suggestions = suggestions or []

    def __str__(self):
        msg = self.message
        if self.suggestions:
            msg += "\n\n💡 建议："
            for i, suggestion in enumerate(self.suggestions, 1):
                msg += f"\n  {i}. {suggestion}"
        return msg


class DomainError(TVDWError):
    """参数或点不在定义域内"""


class PreconditionError(TVDWError):
    """操作前置条件不满足"""


class ResourceError(TVDWError):
    """所需深度超出当前分辨率或层级能力"""

    def __init__(self, message: str, suggestions: List[str] = None,
                 max_feasible_depth: Optional[int] = None):
        super().__init__(message, suggestions)
        self.max_feasible_depth = max_feasible_depth


class ResolutionError(TVDWError):
    """在给定尺度上找不到见证点"""

    def __init__(self, message: str, suggestions: List[str] = None,
                 scale_index: Optional[int] = None):
        super().__init__(message, suggestions)
        self.scale_index = scale_index


class UnsupportedError(TVDWError):
    """输入合法但验证器不支持"""


class ConfigurationError(TVDWError):
    """配置相关异常"""
