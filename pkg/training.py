# Copyright: (c) OpenChiip Organization. https://github.com/OpenChiip/Chiip
# Copyright: (c) <aigc@openchiip.com>

"""
训练模块：Adam优化、按被试小批量训练以及由检查点估计有效连接

一次训练严格顺序执行。初始化、每轮打乱与dropout掩码都取自同一个 default_rng(seed) 随机流，
因此 (seed, 数据, 配置) 唯一决定检查点的每个字节。
"""
import logging
import math
import time
from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np

from config import Config
from data import TimeSeriesDataset
from model import EcMatrix, ModelConfig, check_parameters, extract_ec, forward, init_params
from numerics import ComputationRecord, ParameterStore, backward
from spectral import pin_imaginary
from utils.validation import ConfigError, DataError, ShapeError, check_finite

logger = logging.getLogger(__name__)

FILTER_IMAG = 'fa.filter.im'


@dataclass(frozen=True)
class OptimizerConfig:
    """Adam与训练循环的超参数"""
    learning_rate: float = 1e-3
    beta1: float = 0.90
    beta2: float = 0.98
    eps: float = 1e-8
    epochs: int = 300
    batch_size: int = 32
    seed: int = 42
    log_every: int = 10

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError(f"学习率必须为正，当前为 {self.learning_rate}")
        for name in ('beta1', 'beta2'):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise ConfigError(f"{name} 必须位于 [0, 1)，当前为 {value}")
        if self.eps < 0:
            raise ConfigError(f"eps 不能为负，当前为 {self.eps}")
        if self.epochs < 1:
            raise ConfigError(f"训练轮数必须 >= 1，当前为 {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"批大小必须 >= 1，当前为 {self.batch_size}")
        if self.log_every < 1:
            raise ConfigError(f"log_every 必须 >= 1，当前为 {self.log_every}")

    @classmethod
    def from_config(cls, config: Config) -> "OptimizerConfig":
        section = config.section('optimizer')
        return cls(
            learning_rate=float(section['learning_rate']),
            beta1=float(section['beta1']),
            beta2=float(section['beta2']),
            eps=float(section['eps']),
            epochs=int(section['epochs']),
            batch_size=int(section['batch_size']),
            seed=int(section['seed']),
            log_every=int(section.get('log_every', 10)),
        )

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class OptimizerState:
    """Adam的一阶、二阶矩估计与全局步数"""
    first: "OrderedDict[str, np.ndarray]"
    second: "OrderedDict[str, np.ndarray]"
    step: int = 0

    @classmethod
    def fresh(cls, params: ParameterStore) -> "OptimizerState":
        return cls(
            first=OrderedDict((name, np.zeros_like(array)) for name, array in params.items()),
            second=OrderedDict((name, np.zeros_like(array)) for name, array in params.items()),
            step=0,
        )


@dataclass
class TrainReport:
    """训练摘要；seconds 与 epoch_seconds 为墙钟时间，不参与结果的逐字节比较"""
    epoch_losses: List[float]
    final_loss: float
    seconds: float
    config: Dict[str, Any]
    n_subjects: int = 0
    n_batches_per_epoch: int = 0
    epoch_seconds: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'epoch_losses': list(self.epoch_losses),
            'final_loss': self.final_loss,
            'seconds': self.seconds,
            'config': self.config,
            'n_subjects': self.n_subjects,
            'n_batches_per_epoch': self.n_batches_per_epoch,
            'epoch_seconds': list(self.epoch_seconds),
        }


def adam_step(params: ParameterStore, grads: Mapping[str, np.ndarray], state: OptimizerState,
              cfg: OptimizerConfig, n_points: Optional[int] = None) -> Tuple[ParameterStore, OptimizerState]:
    """
    一步带偏差修正的Adam更新

    m ← β₁m + (1−β₁)g，v ← β₂v + (1−β₂)g²，
    p ← p − lr·m̂/(√v̂ + eps)，其中 m̂ = m/(1−β₁^k)，v̂ = v/(1−β₂^k)，k 为更新后的步数。
    给出 n_points 时，更新后把谱滤波器钉住频点的虚部重新置0。

    Args:
        params: 当前参数
        grads: 每个参数的梯度
        state: 当前优化器状态
        cfg: 优化器配置
        n_points: 序列长度T

    Returns:
        Tuple[ParameterStore, OptimizerState]: 新参数与新状态（输入不被修改）

    Raises:
        DataError: 某个参数缺少梯度
        ShapeError: 梯度形状与参数不一致
    """
    step = state.step + 1
    first_fix = 1.0 - cfg.beta1 ** step
    second_fix = 1.0 - cfg.beta2 ** step
    updated = ParameterStore()
    first: "OrderedDict[str, np.ndarray]" = OrderedDict()
    second: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for name, value in params.items():
        if name not in grads:
            raise DataError(f"缺少参数 {name} 的梯度")
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != value.shape:
            raise ShapeError(f"参数 {name} 的梯度形状 {g.shape} 与参数形状 {value.shape} 不一致")
        m = cfg.beta1 * state.first[name] + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * state.second[name] + (1.0 - cfg.beta2) * g * g
        m_hat = m / first_fix
        denom = np.sqrt(v / second_fix) + cfg.eps
        # eps=0 且梯度恒为0时分母为0，此时不更新
        delta = np.divide(m_hat, denom, out=np.zeros_like(m_hat), where=denom > 0)
        new_value = value - cfg.learning_rate * delta
        if name == FILTER_IMAG and n_points is not None:
            pin_imaginary(new_value, n_points)
        updated.add(name, new_value)
        first[name] = m
        second[name] = v
    return updated, OptimizerState(first=first, second=second, step=step)


def _check_dataset(dataset: TimeSeriesDataset, model_cfg: ModelConfig) -> None:
    if (dataset.n_nodes, dataset.n_points) != (model_cfg.n_nodes, model_cfg.n_points):
        raise ShapeError(
            f"数据集形状 ({dataset.n_nodes}, {dataset.n_points}) 与模型配置 "
            f"({model_cfg.n_nodes}, {model_cfg.n_points}) 不一致"
        )


def train(dataset: TimeSeriesDataset, model_cfg: ModelConfig, opt_cfg: OptimizerConfig,
          filter_noise: float = 0.01) -> Tuple[ParameterStore, TrainReport]:
    """
    在全部被试上训练FSTA网络

    每轮用种子随机流打乱被试顺序，按 batch_size 切分（最后一个不完整的批次保留）。
    每个批次的损失是各被试损失的均值：逐个被试做前向与反向，按固定顺序累加梯度后除以批大小，
    再做一步Adam。

    Args:
        dataset: 训练数据
        model_cfg: 模型配置
        opt_cfg: 优化器配置
        filter_noise: 谱滤波器初始化扰动

    Returns:
        Tuple[ParameterStore, TrainReport]: 训练后的参数与训练摘要

    Raises:
        ShapeError: 数据集形状与模型配置不一致
        NumericalError: 损失出现NaN/Inf
    """
    _check_dataset(dataset, model_cfg)
    rng = np.random.default_rng(opt_cfg.seed)
    params = init_params(model_cfg, rng, filter_noise)
    state = OptimizerState.fresh(params)
    n_subjects = dataset.n_subjects
    n_batches = math.ceil(n_subjects / opt_cfg.batch_size)
    logger.info(
        f"开始训练：{n_subjects} 个被试，{opt_cfg.epochs} 轮，每轮 {n_batches} 个批次，"
        f"{params.n_values()} 个参数"
    )

    epoch_losses: List[float] = []
    epoch_seconds: List[float] = []
    started = time.perf_counter()
    for epoch in range(1, opt_cfg.epochs + 1):
        epoch_started = time.perf_counter()
        order = rng.permutation(n_subjects)
        epoch_total = 0.0
        for batch, offset in enumerate(range(0, n_subjects, opt_cfg.batch_size), start=1):
            members = order[offset:offset + opt_cfg.batch_size]
            grads = OrderedDict((name, np.zeros_like(array)) for name, array in params.items())
            batch_total = 0.0
            for index in members:
                record = ComputationRecord()
                result = forward(dataset.subjects[index], record.watch_store(params), model_cfg, 'train', rng)
                value = result.loss.item()
                check_finite(f"第 {epoch} 轮第 {batch} 个批次（被试 {int(index)}）的损失", value)
                for name, g in backward(result.loss, record).items():
                    grads[name] += g
                batch_total += value
            scale = 1.0 / len(members)
            for name in grads:
                grads[name] *= scale
            params, state = adam_step(params, grads, state, opt_cfg, model_cfg.n_points)
            epoch_total += batch_total
            logger.debug("epoch %d batch %d loss %.6f", epoch, batch, batch_total * scale)
        epoch_losses.append(epoch_total / n_subjects)
        epoch_seconds.append(time.perf_counter() - epoch_started)
        if epoch == 1 or epoch % opt_cfg.log_every == 0 or epoch == opt_cfg.epochs:
            logger.info(f"第 {epoch}/{opt_cfg.epochs} 轮，平均损失 {epoch_losses[-1]:.6f}")

    report = TrainReport(
        epoch_losses=epoch_losses,
        final_loss=epoch_losses[-1],
        seconds=time.perf_counter() - started,
        config={'model': model_cfg.to_dict(), 'optimizer': opt_cfg.to_dict(), 'filter_noise': filter_noise},
        n_subjects=n_subjects,
        n_batches_per_epoch=n_batches,
        epoch_seconds=epoch_seconds,
    )
    logger.info(f"训练完成，最终平均损失 {report.final_loss:.6f}，用时 {report.seconds:.1f} 秒")
    return params, report


def evaluate_ec(dataset: TimeSeriesDataset, checkpoint: ParameterStore, model_cfg: ModelConfig) -> EcMatrix:
    """
    用检查点参数在eval模式下估计组水平有效连接矩阵

    Raises:
        DataError: 检查点参数名称或形状与配置不符（报告第一个不符的名称）
        ShapeError: 数据集形状与配置不符
    """
    check_parameters(checkpoint, model_cfg)
    _check_dataset(dataset, model_cfg)
    return extract_ec(dataset, checkpoint, model_cfg)
