# Copyright: (c) OpenChiip Organization. https://github.com/OpenChiip/Chiip
# Copyright: (c) <aigc@openchiip.com>

"""
模拟数据模块

生成带已知因果图的VAR(1)替代数据：拓扑预设、权重矩阵构造与谱半径约束、逐被试模拟、
逐节点标准化，以及按信噪比叠加观测噪声。

邻接矩阵约定：adjacency[i, j] = 1 表示存在边 j→i。节点从0开始编号。
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from config import Config
from utils.validation import ConfigError, DataError, check_binary_adjacency, check_positive

logger = logging.getLogger(__name__)

TOPOLOGIES = ('sim1', 'sim2', 'sim3', 'sim4', 'custom')

# 各预设在环之外追加的互逆边 (target, source)
_RECIPROCAL_EDGES = {
    'sim1': ((0, 1),),
    'sim2': ((0, 1), (1, 2)),
    'sim3': ((0, 1), (2, 3)),
}
_SIM4_NODES = 10
_SIM4_EXTRA_EDGES = 9


@dataclass
class GroundTruthGraph:
    """真实因果图的二值邻接矩阵"""
    adjacency: np.ndarray

    def __post_init__(self):
        check_binary_adjacency("真实邻接矩阵", self.adjacency)
        self.adjacency = np.asarray(self.adjacency, dtype=np.int64)

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return int(self.adjacency.sum())

    def edges(self) -> List[Tuple[int, int]]:
        """以 (source, target) 列出全部边"""
        targets, sources = np.nonzero(self.adjacency)
        return sorted(zip(sources.tolist(), targets.tolist()))


@dataclass
class GeneratorConfig:
    """VAR替代数据的生成参数"""
    topology: str = 'sim1'
    n_subjects: int = 60
    n_points: int = 500
    snr_db: float = 2.0
    edge_weight: float = 0.4
    self_weight: float = 0.3
    spectral_radius_cap: float = 0.8
    burn_in: int = 200
    seed: int = 42
    tr_seconds: float = 1.2
    session_minutes: float = 10.0
    adjacency: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise ConfigError(f"未知的拓扑预设: {self.topology}，可选 {', '.join(TOPOLOGIES)}")
        if self.topology == 'custom' and self.adjacency is None:
            raise ConfigError("custom 拓扑需要提供邻接矩阵")
        if self.topology != 'custom' and self.adjacency is not None:
            raise ConfigError(f"只有 custom 拓扑接受邻接矩阵，当前拓扑为 {self.topology}")
        if self.n_points < 2:
            raise ConfigError(f"时间点数必须 >= 2，当前为 {self.n_points}")
        if self.n_subjects < 1:
            raise ConfigError(f"被试数必须 >= 1，当前为 {self.n_subjects}")
        if self.burn_in < 0:
            raise ConfigError(f"burn_in 不能为负，当前为 {self.burn_in}")
        if not math.isfinite(self.snr_db):
            raise ConfigError(f"信噪比必须是有限数值，当前为 {self.snr_db}")
        if not 0.0 < self.spectral_radius_cap < 1.0:
            raise ConfigError(f"谱半径上限必须位于 (0, 1)，当前为 {self.spectral_radius_cap}")
        for name in ('edge_weight', 'self_weight'):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} 必须是有限数值")
        check_positive("tr_seconds", self.tr_seconds)
        check_positive("session_minutes", self.session_minutes)

    @classmethod
    def from_config(cls, config: Config, adjacency: Optional[np.ndarray] = None) -> "GeneratorConfig":
        section = config.section('generator')
        return cls(
            topology=str(section['topology']),
            n_subjects=int(section['n_subjects']),
            n_points=int(section['n_points']),
            snr_db=float(section['snr_db']),
            edge_weight=float(section['edge_weight']),
            self_weight=float(section['self_weight']),
            spectral_radius_cap=float(section['spectral_radius_cap']),
            burn_in=int(section['burn_in']),
            seed=int(section['seed']),
            tr_seconds=float(section['tr_seconds']),
            session_minutes=float(section['session_minutes']),
            adjacency=adjacency,
        )

    def metadata(self) -> Dict[str, Any]:
        """写入 manifest.json 的生成参数（TR与扫描时长只作记录，不影响生成）"""
        return {
            'topology': self.topology,
            'seed': self.seed,
            'snr_db': self.snr_db,
            'edge_weight': self.edge_weight,
            'self_weight': self.self_weight,
            'spectral_radius_cap': self.spectral_radius_cap,
            'burn_in': self.burn_in,
            'tr_seconds': self.tr_seconds,
            'session_minutes': self.session_minutes,
        }


@dataclass
class TimeSeriesDataset:
    """
    多被试时间序列数据集

    Attributes:
        subjects: 每个被试一个 [N, T] 数组
        truth: 可选的真实因果图
        metadata: 清单信息（topology、seed、snr_db 等）
    """
    subjects: List[np.ndarray]
    truth: Optional[GroundTruthGraph] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.subjects:
            raise DataError("数据集至少需要一个被试")
        self.subjects = [np.asarray(s, dtype=np.float64) for s in self.subjects]
        first = self.subjects[0].shape
        if len(first) != 2:
            raise DataError(f"被试序列必须是 [N, T] 二维数组，当前形状为 {first}")
        for index, series in enumerate(self.subjects):
            if series.shape != first:
                raise DataError(f"被试 {index} 的形状 {series.shape} 与被试 0 的形状 {first} 不一致")
            if not np.all(np.isfinite(series)):
                raise DataError(f"被试 {index} 含有非有限值")
        if self.truth is not None and self.truth.n_nodes != first[0]:
            raise DataError(f"真实图有 {self.truth.n_nodes} 个节点，序列有 {first[0]} 个节点")

    @property
    def n_subjects(self) -> int:
        return len(self.subjects)

    @property
    def n_nodes(self) -> int:
        return self.subjects[0].shape[0]

    @property
    def n_points(self) -> int:
        return self.subjects[0].shape[1]


def _ring(n_nodes: int) -> np.ndarray:
    adjacency = np.zeros((n_nodes, n_nodes), dtype=np.int64)
    for k in range(n_nodes):
        adjacency[(k + 1) % n_nodes, k] = 1
    return adjacency


def make_topology(preset: str, seed: int = 0, adjacency: Optional[np.ndarray] = None) -> GroundTruthGraph:
    """
    构造拓扑预设的真实因果图

    sim1/sim2/sim3 都是5节点有向环 0→1→2→3→4→0，再分别加上互逆边形成一个、两个共享节点的、
    或两个不相交的2-环；sim4 是10节点环加上9条随机额外边（由seed决定）。

    Args:
        preset: sim1/sim2/sim3/sim4/custom
        seed: sim4 额外边的随机种子
        adjacency: custom 预设使用的邻接矩阵

    Returns:
        GroundTruthGraph: 真实因果图

    Raises:
        ConfigError: 未知预设，或 custom 缺少邻接矩阵
    """
    if preset in _RECIPROCAL_EDGES:
        graph = _ring(5)
        for target, source in _RECIPROCAL_EDGES[preset]:
            graph[target, source] = 1
        return GroundTruthGraph(graph)
    if preset == 'sim4':
        graph = _ring(_SIM4_NODES)
        free = [(i, j) for i in range(_SIM4_NODES) for j in range(_SIM4_NODES)
                if i != j and graph[i, j] == 0]
        rng = np.random.default_rng(seed)
        for index in sorted(rng.choice(len(free), size=_SIM4_EXTRA_EDGES, replace=False).tolist()):
            graph[free[index]] = 1
        return GroundTruthGraph(graph)
    if preset == 'custom':
        if adjacency is None:
            raise ConfigError("custom 拓扑需要提供邻接矩阵")
        return GroundTruthGraph(np.array(adjacency))
    raise ConfigError(f"未知的拓扑预设: {preset}，可选 {', '.join(TOPOLOGIES)}")


def estimate_spectral_radius(weights: np.ndarray, iterations: int = 500) -> float:
    """
    幂迭代估计谱半径

    复特征值成对出现时迭代向量不收敛，但每步范数增长率的几何平均仍收敛到谱半径，
    因此取后半段迭代的对数增长率均值。
    """
    weights = np.asarray(weights, dtype=np.float64)
    n = weights.shape[0]
    vector = np.random.default_rng(0).standard_normal(n)
    vector /= np.linalg.norm(vector)
    growth = []
    for step in range(iterations):
        vector = weights @ vector
        norm = float(np.linalg.norm(vector))
        if norm == 0.0:
            return 0.0
        vector /= norm
        if step >= iterations // 2:
            growth.append(math.log(norm))
    return float(math.exp(sum(growth) / len(growth)))


def weight_matrix(graph: GroundTruthGraph, cfg: GeneratorConfig) -> np.ndarray:
    """W = self_weight·I + edge_weight·adjacency，谱半径超过上限时整体缩放到上限"""
    weights = cfg.self_weight * np.eye(graph.n_nodes) + cfg.edge_weight * graph.adjacency
    if not np.all(np.isfinite(weights)):
        raise ConfigError("VAR权重矩阵含有非有限值")
    radius = estimate_spectral_radius(weights)
    if radius >= cfg.spectral_radius_cap:
        logger.debug("谱半径 %.4f 超过上限 %.2f，缩放权重矩阵", radius, cfg.spectral_radius_cap)
        weights = weights * (cfg.spectral_radius_cap / radius)
    return weights


def _simulate(weights: np.ndarray, n_points: int, burn_in: int, rng: np.random.Generator) -> np.ndarray:
    n = weights.shape[0]
    innovations = rng.standard_normal((burn_in + n_points, n))
    state = np.zeros(n)
    kept = np.empty((n_points, n))
    for t in range(burn_in + n_points):
        state = weights @ state + innovations[t]
        if t >= burn_in:
            kept[t - burn_in] = state
    return kept.T


def _standardize(series: np.ndarray) -> np.ndarray:
    centered = series - series.mean(axis=1, keepdims=True)
    std = centered.std(axis=1, keepdims=True)
    if np.any(std == 0):
        raise DataError("存在方差为0的节点，无法标准化")
    return centered / std


def add_noise_snr(x: Union[np.ndarray, List[List[float]]], snr_db: float,
                  rng: np.random.Generator) -> np.ndarray:
    """
    按信噪比叠加高斯观测噪声

    每个节点的噪声方差 σ² = P/10^(snr_db/10)，P 为该节点的均方值。

    Args:
        x: [N, T] 信号
        snr_db: 信噪比（dB）
        rng: 噪声随机流

    Returns:
        np.ndarray: 加噪后的 [N, T] 序列

    Raises:
        ConfigError: snr_db 不是有限数值
        DataError: 某节点信号功率为0
    """
    x = np.asarray(x, dtype=np.float64)
    if not math.isfinite(snr_db):
        raise ConfigError(f"信噪比必须是有限数值，当前为 {snr_db}")
    power = np.mean(x * x, axis=-1, keepdims=True)
    if np.any(power == 0):
        raise DataError("信号功率为0，无法按信噪比定义噪声")
    sigma = np.sqrt(power / 10.0 ** (snr_db / 10.0))
    return x + sigma * rng.standard_normal(x.shape)


def generate_var_dataset(cfg: GeneratorConfig, graph: Optional[GroundTruthGraph] = None) -> TimeSeriesDataset:
    """
    生成VAR(1)替代数据集

    每个被试使用由 SeedSequence(seed) 派生的独立随机流：模拟 burn_in + T 步，丢弃预热段，
    逐节点标准化后按 snr_db 加噪。

    Args:
        cfg: 生成参数
        graph: 真实因果图，默认由 cfg.topology 构造

    Returns:
        TimeSeriesDataset: 含真实图与清单信息的数据集
    """
    graph = graph or make_topology(cfg.topology, cfg.seed, cfg.adjacency)
    weights = weight_matrix(graph, cfg)
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.n_subjects)
    subjects = []
    for stream in streams:
        rng = np.random.default_rng(stream)
        series = _standardize(_simulate(weights, cfg.n_points, cfg.burn_in, rng))
        subjects.append(add_noise_snr(series, cfg.snr_db, rng))
    logger.info(
        f"已生成 {cfg.topology} 数据：{cfg.n_subjects} 个被试，{graph.n_nodes} 个节点，"
        f"{graph.n_edges} 条边，每个被试 {cfg.n_points} 个时间点"
    )
    return TimeSeriesDataset(subjects=subjects, truth=graph, metadata=cfg.metadata())
