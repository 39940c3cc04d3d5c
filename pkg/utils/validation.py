# Copyright: (c) OpenChiip Organization. https://github.com/OpenChiip/Chiip
# Copyright: (c) <aigc@openchiip.com>

"""
输入验证工具模块，提供异常类型与各种验证函数
"""
import math
from pathlib import Path
from typing import Iterable, Sequence, Tuple, Union

import numpy as np


class FstaError(Exception):
    """所有FSTA错误的基类"""


class ConfigError(FstaError, ValueError):
    """配置或命令行参数无效"""


class ShapeError(FstaError, ValueError):
    """张量形状不匹配"""


class DataError(FstaError, ValueError):
    """数据文件缺失、不一致或数值非法"""


class NumericalError(FstaError, ArithmeticError):
    """数值计算失败，例如损失出现NaN/Inf"""


def check_shape(name: str, shape: Sequence[int], expected: Sequence[int]) -> None:
    """
    验证形状是否与期望一致

    Args:
        name: 参与验证的对象名称，用于错误信息
        shape: 实际形状
        expected: 期望形状，-1表示该维度任意

    Raises:
        ShapeError: 形状不一致
    """
    shape = tuple(shape)
    expected = tuple(expected)
    if len(shape) != len(expected) or any(
        e != -1 and s != e for s, e in zip(shape, expected)
    ):
        raise ShapeError(f"{name} 的形状为 {shape}，期望 {expected}")


def check_finite(name: str, values: Union[np.ndarray, float]) -> None:
    """
    验证数值全部有限

    Raises:
        NumericalError: 存在NaN或Inf
    """
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        bad = int(np.size(arr) - np.count_nonzero(np.isfinite(arr)))
        raise NumericalError(f"{name} 含有 {bad} 个非有限值")


def check_probability(name: str, value: float, *, inclusive_high: bool = False) -> None:
    """验证概率取值范围 [0,1) 或 [0,1]"""
    if value is None or not math.isfinite(value):
        raise ConfigError(f"{name} 必须是有限数值，当前为 {value}")
    upper_ok = value <= 1.0 if inclusive_high else value < 1.0
    if value < 0.0 or not upper_ok:
        bound = "[0, 1]" if inclusive_high else "[0, 1)"
        raise ConfigError(f"{name} 必须位于 {bound} 区间内，当前为 {value}")


def check_positive(name: str, value: float, *, allow_zero: bool = False) -> None:
    """验证数值为正（或非负）"""
    if value is None or not math.isfinite(value):
        raise ConfigError(f"{name} 必须是有限数值，当前为 {value}")
    if value < 0 or (value == 0 and not allow_zero):
        relation = ">= 0" if allow_zero else "> 0"
        raise ConfigError(f"{name} 必须 {relation}，当前为 {value}")


def check_binary_adjacency(name: str, adjacency: np.ndarray) -> None:
    """
    验证二值邻接矩阵：方阵、取值为0/1、对角线为0

    Raises:
        DataError: 矩阵不满足约束
    """
    adjacency = np.asarray(adjacency)
    if adjacency.ndim != 2 or adjacency.shape[0] != adjacency.shape[1]:
        raise DataError(f"{name} 必须是方阵，当前形状为 {adjacency.shape}")
    if not np.all((adjacency == 0) | (adjacency == 1)):
        raise DataError(f"{name} 只能包含0或1")
    if np.any(np.diag(adjacency) != 0):
        raise DataError(f"{name} 的对角线必须为0")


def validate_path(path: Union[str, Path], check_exists: bool = False, kind: str = "file") -> Path:
    """
    验证路径并返回Path对象

    Args:
        path: 文件或目录路径
        check_exists: 是否要求路径已存在
        kind: 'file' 或 'dir'，仅在check_exists为True时检查类型

    Returns:
        Path: 路径对象

    Raises:
        DataError: 路径不存在或类型不符
    """
    path_obj = Path(path)
    if check_exists:
        if not path_obj.exists():
            raise DataError(f"路径不存在: {path_obj}")
        if kind == "dir" and not path_obj.is_dir():
            raise DataError(f"不是目录: {path_obj}")
        if kind == "file" and not path_obj.is_file():
            raise DataError(f"不是文件: {path_obj}")
    return path_obj


def parse_float_list(text: str, name: str) -> Tuple[float, ...]:
    """解析逗号分隔的浮点数列表，例如 '0.3,0.5,0.7'"""
    try:
        values = tuple(float(item) for item in _split_items(text))
    except ValueError as e:
        raise ConfigError(f"{name} 无法解析为数值列表: {text}") from e
    if not values:
        raise ConfigError(f"{name} 不能为空")
    return values


def parse_int_list(text: str, name: str) -> Tuple[int, ...]:
    """解析逗号分隔的整数列表，例如 '1,2,4'"""
    try:
        values = tuple(int(item) for item in _split_items(text))
    except ValueError as e:
        raise ConfigError(f"{name} 无法解析为整数列表: {text}") from e
    if not values:
        raise ConfigError(f"{name} 不能为空")
    return values


def _split_items(text: str) -> Iterable[str]:
    return [item.strip() for item in text.split(",") if item.strip()]
