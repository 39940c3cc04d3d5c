# Copyright: (c) OpenChiip Organization. https://github.com/OpenChiip/Chiip
# Copyright: (c) <aigc@openchiip.com>

"""
评估模块：自适应阈值、二值化、混淆计数指标（含SHD）、Welch t检验与多次运行汇总

指标在全部 N² 个有序节点对上计数（包括对角线，对角线两边都为0，恒为真阴性），
因此 accuracy == 1 − shd/N² 严格成立。
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
from scipy.special import betainc

from config import Config
from data import GroundTruthGraph
from model import EcMatrix
from utils.text_processing import format_mean_std
from utils.validation import ConfigError, DataError, ShapeError, check_binary_adjacency, check_probability

logger = logging.getLogger(__name__)

METRIC_NAMES = ('precision', 'recall', 'f1', 'accuracy', 'shd')


@dataclass(frozen=True)
class ThresholdConfig:
    """自适应阈值参数 η ∈ [0, 1]"""
    eta: float = 0.5

    def __post_init__(self):
        check_probability("eta", self.eta, inclusive_high=True)

    @classmethod
    def from_config(cls, config: Config) -> "ThresholdConfig":
        return cls(eta=float(config.get('threshold.eta', 0.5)))


@dataclass
class BinaryGraph:
    """二值化后的预测图，第 (i, j) 项为1表示边 j→i"""
    adjacency: np.ndarray

    def __post_init__(self):
        check_binary_adjacency("预测邻接矩阵", self.adjacency)
        self.adjacency = np.asarray(self.adjacency, dtype=np.int64)

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return int(self.adjacency.sum())


@dataclass
class MetricsReport:
    """一次预测与真实图比较的结果"""
    tp: int
    fp: int
    tn: int
    fn: int
    precision: float
    recall: float
    f1: float
    accuracy: float
    shd: int
    theta: Optional[float] = None
    eta: Optional[float] = None

    @property
    def n_cells(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy_fraction(self) -> Fraction:
        """精确的有理数准确率 (TP+TN)/N²"""
        return Fraction(self.tp + self.tn, self.n_cells)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'tp': self.tp,
            'fp': self.fp,
            'tn': self.tn,
            'fn': self.fn,
            'precision': self.precision,
            'recall': self.recall,
            'f1': self.f1,
            'accuracy': self.accuracy,
            'shd': self.shd,
            'theta': self.theta,
            'eta': self.eta,
        }

    @classmethod
    def from_dict(cls, values: Mapping[str, Any]) -> "MetricsReport":
        try:
            return cls(
                tp=int(values['tp']), fp=int(values['fp']), tn=int(values['tn']), fn=int(values['fn']),
                precision=float(values['precision']), recall=float(values['recall']),
                f1=float(values['f1']), accuracy=float(values['accuracy']), shd=int(values['shd']),
                theta=values.get('theta'), eta=values.get('eta'),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"指标记录格式无效: {e}") from e


@dataclass(frozen=True)
class MetricSummary:
    """某个指标在多次运行上的均值与样本标准差"""
    mean: float
    std: float
    count: int

    @property
    def text(self) -> str:
        return format_mean_std(self.mean, self.std)

    def to_dict(self) -> Dict[str, Any]:
        return {'mean': self.mean, 'std': self.std, 'count': self.count, 'text': self.text}


def _values(a: Union[EcMatrix, np.ndarray]) -> np.ndarray:
    values = a.values if isinstance(a, EcMatrix) else np.asarray(a, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise ShapeError(f"有效连接矩阵必须是方阵，当前形状为 {values.shape}")
    return values


def adaptive_threshold(a: Union[EcMatrix, np.ndarray], eta: float) -> float:
    """
    自适应阈值 θ = min|A| + η·(max|A| − min|A|)，最小值与最大值只在非对角元素上取

    Raises:
        ConfigError: η 不在 [0, 1]
        ShapeError: 节点数小于2
    """
    check_probability("eta", eta, inclusive_high=True)
    values = np.abs(_values(a))
    n = values.shape[0]
    if n < 2:
        raise ShapeError(f"自适应阈值需要至少2个节点，当前为 {n}")
    off_diagonal = values[~np.eye(n, dtype=bool)]
    low, high = float(off_diagonal.min()), float(off_diagonal.max())
    # 结果夹在 [min, max] 内，η=1 时恰为最大值
    if eta == 1.0:
        return high
    return min(high, low + eta * (high - low))


def binarize(a: Union[EcMatrix, np.ndarray], theta: float) -> BinaryGraph:
    """非对角元素 |A_ij| >= θ 记为边，对角线强制为0"""
    if not math.isfinite(theta):
        raise ConfigError(f"阈值必须是有限数值，当前为 {theta}")
    values = np.abs(_values(a))
    adjacency = (values >= theta).astype(np.int64)
    np.fill_diagonal(adjacency, 0)
    return BinaryGraph(adjacency)


def _ratio(numerator: int, denominator: int) -> float:
    return numerator / denominator if denominator else 0.0


def compute_metrics(pred: BinaryGraph, truth: GroundTruthGraph, theta: Optional[float] = None,
                    eta: Optional[float] = None) -> MetricsReport:
    """
    混淆计数与派生指标

    分母为0的比值记为0；SHD = FP + FN。

    Args:
        pred: 预测图
        truth: 真实图
        theta: 使用的阈值（只做记录）
        eta: 使用的 η（只做记录）

    Returns:
        MetricsReport: 评估结果

    Raises:
        ShapeError: 两个图的节点数不同
    """
    if pred.adjacency.shape != truth.adjacency.shape:
        raise ShapeError(f"预测图形状 {pred.adjacency.shape} 与真实图形状 {truth.adjacency.shape} 不一致")
    predicted = pred.adjacency.astype(bool)
    actual = truth.adjacency.astype(bool)
    tp = int(np.sum(predicted & actual))
    fp = int(np.sum(predicted & ~actual))
    fn = int(np.sum(~predicted & actual))
    tn = int(np.sum(~predicted & ~actual))
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return MetricsReport(
        tp=tp, fp=fp, tn=tn, fn=fn,
        precision=precision, recall=recall, f1=f1,
        accuracy=_ratio(tp + tn, predicted.size),
        shd=fp + fn,
        theta=theta, eta=eta,
    )


def welch_t_test(sample_a: Sequence[float], sample_b: Sequence[float]) -> float:
    """
    双侧Welch t检验，自由度按Welch–Satterthwaite公式，p值由正则化不完全贝塔函数给出

    p = I_{df/(df+t²)}(df/2, 1/2)

    Raises:
        DataError: 某个样本少于2个值，或两个样本方差都为0
    """
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise DataError(f"Welch t检验每组至少需要2个值，当前为 {a.size} 与 {b.size}")
    var_a = a.var(ddof=1) / a.size
    var_b = b.var(ddof=1) / b.size
    pooled = var_a + var_b
    if pooled == 0:
        raise DataError("两个样本的方差都为0，t检验无定义")
    t = (a.mean() - b.mean()) / math.sqrt(pooled)
    df = pooled ** 2 / (var_a ** 2 / (a.size - 1) + var_b ** 2 / (b.size - 1))
    p = float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return min(1.0, max(0.0, p))


def metric_samples(reports: Sequence[MetricsReport], name: str) -> List[float]:
    if name not in METRIC_NAMES:
        raise ConfigError(f"未知指标: {name}")
    return [float(getattr(report, name)) for report in reports]


def aggregate_runs(reports: Sequence[MetricsReport]) -> Dict[str, MetricSummary]:
    """
    各指标的均值与样本标准差（n−1为分母；只有一次运行时标准差为0）

    Raises:
        DataError: 没有任何运行结果
    """
    if not reports:
        raise DataError("没有可汇总的运行结果")
    summary: Dict[str, MetricSummary] = {}
    for name in METRIC_NAMES:
        values = np.array(metric_samples(reports, name))
        std = float(values.std(ddof=1)) if values.size > 1 else 0.0
        summary[name] = MetricSummary(mean=float(values.mean()), std=std, count=int(values.size))
    return summary

