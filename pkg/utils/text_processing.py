# Copyright: (c) OpenChiip Organization. https://github.com/OpenChiip/Chiip
# Copyright: (c) <aigc@openchiip.com>

"""
文本处理工具模块：JSON规范化输出与表格数值格式化
"""
import json
import math
from typing import Any

import numpy as np


def _plain(value: Any) -> Any:
    """把numpy标量与数组转换为JSON可序列化的Python对象"""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def canonical_json(payload: Any) -> str:
    """
    规范化的JSON文本：键排序、两空格缩进、以换行结尾

    相同的数据总是得到逐字节相同的文本。

    Raises:
        ValueError: 含有NaN或Inf
    """
    return json.dumps(_plain(payload), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def format_mean_std(mean: float, std: float, digits: int = 2) -> str:
    """格式化为 'mean±std'，例如 0.80±0.00"""
    if not (math.isfinite(mean) and math.isfinite(std)):
        return "nan"
    return f"{mean:.{digits}f}±{std:.{digits}f}"


def format_p_value(p: float) -> str:
    """p值：小于1e-4时用科学计数法"""
    if p < 1e-4:
        return f"{p:.2e}"
    return f"{p:.4f}"
