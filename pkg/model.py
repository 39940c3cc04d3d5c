# Copyright: (c) OpenChiip Organization. https://github.com/OpenChiip/Chiip
# Copyright: (c) <aigc@openchiip.com>

"""
FSTA网络模块

嵌入与位置编码 → 傅里叶注意力 → 时间注意力 → 时空融合注意力（同时给出重建与有效连接矩阵A）
→ 1×1卷积读出，以及重建损失加A的稀疏惩罚。

张量布局：输入 X 为 [N, T]；嵌入后为 [T, N, D]；时间注意力在 [N, T, D] 上进行。
A 的第 (i, j) 项表示节点 j 对节点 i 的影响，每行之和为1。
"""
import logging
import math
from collections import OrderedDict
from dataclasses import asdict, dataclass, fields, replace
from functools import lru_cache
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from config import Config
from numerics import (ParameterStore, Tensor, abs_, as_tensor, attention_weights, channel_mix, check_mode,
                      concat_last, dropout, layer_norm, matmul, mean, mul, relu, reshape, slice_last, softmax,
                      square, sum_, transpose)
from spectral import SpectralFilter, apply_filter, fft_real, ifft_real, n_bins, pin_imaginary, pin_mask
from utils.validation import ConfigError, DataError, ShapeError, check_shape

logger = logging.getLogger(__name__)

Params = Union[ParameterStore, Mapping[str, Tensor]]

# 消融变体：关闭傅里叶注意力、时间注意力、傅里叶注意力中的第一个残差或残差+归一化
ABLATION_VARIANTS: Dict[str, Dict[str, bool]] = {
    'default': {},
    'no-fa': {'use_fourier': False},
    'no-ta': {'use_temporal': False},
    'no-fa-ta': {'use_fourier': False, 'use_temporal': False},
    'no-add': {'fa_residual': False},
    'no-add-norm': {'fa_residual': False, 'fa_first_norm': False},
}


@dataclass(frozen=True)
class ModelConfig:
    """模型超参数"""
    n_nodes: int
    n_points: int
    embed_dim: int = 16
    n_heads: int = 2
    dropout_rate: float = 0.2
    pe_base: float = 10000.0
    sparsity_weight: float = 0.05
    layer_norm_eps: float = 1e-5
    ffn_dim: Optional[int] = None
    use_fourier: bool = True
    use_temporal: bool = True
    fa_residual: bool = True
    fa_first_norm: bool = True

    def __post_init__(self):
        if self.ffn_dim is None:
            object.__setattr__(self, 'ffn_dim', 4 * self.embed_dim)
        if self.n_nodes < 2:
            raise ConfigError(f"节点数必须 >= 2，当前为 {self.n_nodes}")
        if self.n_points < 2:
            raise ConfigError(f"时间点数必须 >= 2，当前为 {self.n_points}")
        if self.n_heads < 1:
            raise ConfigError(f"注意力头数必须 >= 1，当前为 {self.n_heads}")
        if self.embed_dim < 1 or self.embed_dim % self.n_heads != 0:
            raise ConfigError(f"嵌入维度 {self.embed_dim} 必须能被头数 {self.n_heads} 整除")
        if self.ffn_dim < 1:
            raise ConfigError(f"FFN隐藏维度必须 >= 1，当前为 {self.ffn_dim}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout 必须位于 [0, 1)，当前为 {self.dropout_rate}")
        if self.sparsity_weight < 0:
            raise ConfigError(f"稀疏权重 α 必须 >= 0，当前为 {self.sparsity_weight}")
        if self.layer_norm_eps <= 0 or self.pe_base <= 0:
            raise ConfigError("layer_norm_eps 与 pe_base 必须为正")

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.n_heads

    @property
    def n_bins(self) -> int:
        return n_bins(self.n_points)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: Mapping[str, Any]) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"模型配置包含未知字段: {', '.join(unknown)}")
        return cls(**dict(values))

    @classmethod
    def from_config(cls, config: Config, n_nodes: int, n_points: int) -> "ModelConfig":
        """由分层配置的 model 节构造，节点数与时间点数来自数据"""
        section = config.section('model')
        model_cfg = cls(
            n_nodes=n_nodes,
            n_points=n_points,
            embed_dim=int(section['embed_dim']),
            n_heads=int(section['n_heads']),
            dropout_rate=float(section['dropout_rate']),
            pe_base=float(section['pe_base']),
            sparsity_weight=float(section['sparsity_weight']),
            layer_norm_eps=float(section['layer_norm_eps']),
            ffn_dim=None if section.get('ffn_dim') is None else int(section['ffn_dim']),
        )
        return model_cfg.with_variant(section.get('variant', 'default'))

    def with_variant(self, name: str) -> "ModelConfig":
        """返回指定消融变体的配置"""
        if name not in ABLATION_VARIANTS:
            raise ConfigError(f"未知的模型变体: {name}，可选 {', '.join(ABLATION_VARIANTS)}")
        switches = {'use_fourier': True, 'use_temporal': True, 'fa_residual': True, 'fa_first_norm': True}
        switches.update(ABLATION_VARIANTS[name])
        return replace(self, **switches)


@dataclass
class AttentionMaps:
    """各头的时空融合注意力权重，每个元素形状 [T, N, N]，每行和为1"""
    heads: List[np.ndarray]


@dataclass
class EcMatrix:
    """有效连接矩阵 [N, N]，第 (i, j) 项为节点 j 对节点 i 的影响"""
    values: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.values.shape[0]

    def row_sums(self) -> np.ndarray:
        return self.values.sum(axis=1)

    def to_list(self) -> List[List[float]]:
        return self.values.tolist()


@dataclass
class ForwardResult:
    """一次前向计算的输出"""
    x_hat: Tensor
    maps: AttentionMaps
    a: Tensor
    loss: Tensor


@dataclass(frozen=True)
class _ParamSpec:
    shape: Tuple[int, ...]
    kind: str            # uniform / ones / zeros / filter_re / filter_im
    fan_in: int = 1


def _param_specs(cfg: ModelConfig) -> "OrderedDict[str, _ParamSpec]":
    D, d, F, N, hidden = cfg.embed_dim, cfg.head_dim, cfg.n_bins, cfg.n_nodes, cfg.ffn_dim
    specs: "OrderedDict[str, _ParamSpec]" = OrderedDict()

    def affine(prefix: str, weight: str, bias: str, fan_in: int, fan_out: int):
        specs[f'{prefix}.{weight}'] = _ParamSpec((fan_in, fan_out), 'uniform', fan_in)
        specs[f'{prefix}.{bias}'] = _ParamSpec((fan_out,), 'uniform', fan_in)

    def norm(prefix: str):
        specs[f'{prefix}.scale'] = _ParamSpec((D,), 'ones')
        specs[f'{prefix}.shift'] = _ParamSpec((D,), 'zeros')

    def ffn(prefix: str):
        specs[f'{prefix}.w1'] = _ParamSpec((D, hidden), 'uniform', D)
        specs[f'{prefix}.b1'] = _ParamSpec((hidden,), 'uniform', D)
        specs[f'{prefix}.w2'] = _ParamSpec((hidden, D), 'uniform', hidden)
        specs[f'{prefix}.b2'] = _ParamSpec((D,), 'uniform', hidden)

    affine('embed', 'kernel', 'bias', 1, D)
    specs['fa.filter.re'] = _ParamSpec((F, N, D), 'filter_re')
    specs['fa.filter.im'] = _ParamSpec((F, N, D), 'filter_im')
    norm('fa.norm1')
    ffn('fa.ffn')
    norm('fa.norm2')
    for h in range(cfg.n_heads):
        prefix = f'ta.head{h}'
        for w in ('wq', 'wk', 'wv'):
            specs[f'{prefix}.{w}'] = _ParamSpec((d, d), 'uniform', d)
        for b in ('bq', 'bk', 'bv'):
            specs[f'{prefix}.{b}'] = _ParamSpec((d,), 'uniform', d)
    specs['ta.wc'] = _ParamSpec((D, D), 'uniform', D)
    ffn('ta.ffn')
    norm('ta.norm')
    for h in range(cfg.n_heads):
        prefix = f'sfa.head{h}'
        for w in ('wq', 'wk'):
            specs[f'{prefix}.{w}'] = _ParamSpec((d, d), 'uniform', d)
        for b in ('bq', 'bk'):
            specs[f'{prefix}.{b}'] = _ParamSpec((d,), 'uniform', d)
    ffn('sfa.ffn')
    norm('sfa.norm')
    affine('readout', 'kernel', 'bias', D, 1)
    return specs


def parameter_shapes(cfg: ModelConfig) -> "OrderedDict[str, Tuple[int, ...]]":
    """按固定顺序列出全部参数名与形状"""
    return OrderedDict((name, spec.shape) for name, spec in _param_specs(cfg).items())


def init_params(cfg: ModelConfig, rng: np.random.Generator, filter_noise: float = 0.01) -> ParameterStore:
    """
    初始化参数

    仿射权重与偏置取 ±√(1/fan_in) 上的均匀分布；层归一化 scale=1、shift=0；
    谱滤波器以直通（实部1、虚部0）为起点，再在未钉住的元素上叠加 N(0, filter_noise²) 扰动。
    filter_noise=0 得到节点对称的初始化。

    Args:
        cfg: 模型配置
        rng: 随机数生成器
        filter_noise: 滤波器扰动的标准差

    Returns:
        ParameterStore: 新的参数仓库
    """
    store = ParameterStore()
    for name, spec in _param_specs(cfg).items():
        if spec.kind == 'uniform':
            bound = math.sqrt(1.0 / spec.fan_in)
            value = rng.uniform(-bound, bound, size=spec.shape)
        elif spec.kind == 'ones':
            value = np.ones(spec.shape)
        elif spec.kind == 'zeros':
            value = np.zeros(spec.shape)
        elif spec.kind == 'filter_re':
            value = 1.0 + filter_noise * rng.standard_normal(spec.shape)
        else:
            value = filter_noise * rng.standard_normal(spec.shape)
            pin_imaginary(value, cfg.n_points)
        store.add(name, value)
    logger.debug("已初始化 %d 个参数张量，共 %d 个数值", len(store), store.n_values())
    return store


def check_parameters(params: ParameterStore, cfg: ModelConfig) -> None:
    """
    校验参数仓库的名称与形状是否与配置一致

    Raises:
        DataError: 第一个缺失、多余或形状不符的参数
    """
    expected = parameter_shapes(cfg)
    for name, shape in expected.items():
        if name not in params:
            raise DataError(f"检查点缺少参数 {name}")
        if params[name].shape != shape:
            raise DataError(f"检查点参数 {name} 的形状为 {params[name].shape}，配置要求 {shape}")
    for name in params:
        if name not in expected:
            raise DataError(f"检查点包含配置之外的参数 {name}")


@lru_cache(maxsize=16)
def positional_encoding(n_points: int, embed_dim: int, base: float = 10000.0) -> np.ndarray:
    """
    正弦位置编码 [T, D]：(p, 2k) 处为 sin(p/γ^{2k/D})，(p, 2k+1) 处为 cos(p/γ^{2k/D})
    """
    position = np.arange(n_points, dtype=np.float64)[:, None]
    even = np.arange(0, embed_dim, 2, dtype=np.float64)
    angle = position / np.power(base, even / embed_dim)[None, :]
    table = np.zeros((n_points, embed_dim))
    table[:, 0::2] = np.sin(angle)
    table[:, 1::2] = np.cos(angle)[:, : embed_dim // 2]
    table.setflags(write=False)
    return table


def as_parameter_tensors(params: Params) -> Mapping[str, Tensor]:
    """参数仓库转为常量张量映射；已是张量映射则原样返回"""
    if isinstance(params, ParameterStore):
        return OrderedDict((name, Tensor(array)) for name, array in params.items())
    return params


def model_filter(params: Mapping[str, Tensor], n_points: int) -> SpectralFilter:
    """从参数构造谱滤波器；钉住频点的虚部经常量掩码恒为0"""
    re, im = params['fa.filter.re'], params['fa.filter.im']
    return SpectralFilter(re, mul(im, pin_mask(n_points, im.shape)))


def _record(stages: Optional[Dict[str, Tensor]], key: str, value: Tensor) -> None:
    if stages is not None:
        stages[key] = value


def _feed_forward(x: Tensor, params: Mapping[str, Tensor], ffn: str, norm: str, cfg: ModelConfig,
                  mode: str, rng: Optional[np.random.Generator],
                  stages: Optional[Dict[str, Tensor]]) -> Tensor:
    # Φ(x) = ρ(ReLU(x W1 + b1) W2 + b2 + x)，dropout 位于两次仿射之间
    pre = channel_mix(x, params[f'{ffn}.w1'], params[f'{ffn}.b1'])
    _record(stages, f'{ffn}.pre', pre)
    hidden = dropout(relu(pre), cfg.dropout_rate, mode, rng)
    out = channel_mix(hidden, params[f'{ffn}.w2'], params[f'{ffn}.b2'])
    return layer_norm(out + x, params[f'{norm}.scale'], params[f'{norm}.shift'], cfg.layer_norm_eps)


def embed_and_encode(x: Union[Tensor, np.ndarray], cfg: ModelConfig, params: Params,
                     mode: str = 'eval', rng: Optional[np.random.Generator] = None) -> Tensor:
    """
    1×1卷积把每个标量嵌入为D维，加上按节点广播的位置编码，再做dropout

    Args:
        x: [N, T] 时间序列

    Returns:
        Tensor: [T, N, D]
    """
    params = as_parameter_tensors(params)
    x = as_tensor(x)
    check_shape('输入序列', x.shape, (cfg.n_nodes, cfg.n_points))
    columns = reshape(transpose(x), (cfg.n_points, cfg.n_nodes, 1))
    embedded = channel_mix(columns, params['embed.kernel'], params['embed.bias'])
    table = positional_encoding(cfg.n_points, cfg.embed_dim, cfg.pe_base)
    return dropout(embedded + table[:, None, :], cfg.dropout_rate, mode, rng)


def fourier_attention(xs: Tensor, filt: SpectralFilter, params: Params, cfg: ModelConfig,
                      mode: str = 'eval', rng: Optional[np.random.Generator] = None,
                      stages: Optional[Dict[str, Tensor]] = None) -> Tensor:
    """
    傅里叶注意力：FFT → 滤波 → IFFT，残差+层归一化，再经FFN

    Args:
        xs: [T, N, D] 嵌入后的序列
        filt: 谱滤波器 [F, N, D]

    Returns:
        Tensor: [T, N, D]
    """
    params = as_parameter_tensors(params)
    length = xs.shape[0]
    filtered = ifft_real(apply_filter(fft_real(xs), filt), length)
    _record(stages, 'fa.spectral', filtered)
    inner = filtered + xs if cfg.fa_residual else filtered
    if cfg.fa_first_norm:
        inner = layer_norm(inner, params['fa.norm1.scale'], params['fa.norm1.shift'], cfg.layer_norm_eps)
    _record(stages, 'fa.residual', inner)
    return _feed_forward(inner, params, 'fa.ffn', 'fa.norm2', cfg, mode, rng, stages)


def temporal_attention(xp: Tensor, params: Params, cfg: ModelConfig, mode: str = 'eval',
                       rng: Optional[np.random.Generator] = None,
                       stages: Optional[Dict[str, Tensor]] = None) -> Tensor:
    """
    逐节点的多头时间自注意力

    Args:
        xp: [T, N, D]

    Returns:
        Tensor: [N, T, D]
    """
    params = as_parameter_tensors(params)
    if xp.shape[-1] != cfg.embed_dim:
        raise ShapeError(f"时间注意力输入通道为 {xp.shape[-1]}，配置要求 {cfg.embed_dim}")
    by_node = transpose(xp, (1, 0, 2))
    d = cfg.head_dim
    outputs = []
    for h in range(cfg.n_heads):
        prefix = f'ta.head{h}'
        part = slice_last(by_node, h * d, (h + 1) * d)
        q = channel_mix(part, params[f'{prefix}.wq'], params[f'{prefix}.bq'])
        k = channel_mix(part, params[f'{prefix}.wk'], params[f'{prefix}.bk'])
        v = channel_mix(part, params[f'{prefix}.wv'], params[f'{prefix}.bv'])
        weights = attention_weights(q, k, 1.0 / math.sqrt(d))
        _record(stages, f'{prefix}.attention', weights)
        outputs.append(matmul(weights, v))
    joined = matmul(concat_last(outputs), params['ta.wc'])
    _record(stages, 'ta.concat', joined)
    return _feed_forward(joined, params, 'ta.ffn', 'ta.norm', cfg, mode, rng, stages)


def fusion_attention(xp: Tensor, z_t: Tensor, params: Params, cfg: ModelConfig, mode: str = 'eval',
                     rng: Optional[np.random.Generator] = None,
                     stages: Optional[Dict[str, Tensor]] = None) -> Tuple[Tensor, AttentionMaps, Tensor]:
    """
    时空融合注意力

    每个时间步在节点维上做多头注意力得到 E_h[t]，对 t 与 h 取平均后再按行softmax得到A，
    用A在节点维上加权时间特征 z_t，最后经FFN。

    Args:
        xp: [T, N, D] 傅里叶注意力输出
        z_t: [N, T, D] 时间注意力输出

    Returns:
        Tuple[Tensor, AttentionMaps, Tensor]: 重建特征 [N, T, D]、各头注意力、A [N, N]
    """
    params = as_parameter_tensors(params)
    length, nodes, width = xp.shape
    if z_t.shape != (nodes, length, width):
        raise ShapeError(f"时间特征形状 {z_t.shape} 与融合输入 {xp.shape} 不对应")
    d = cfg.head_dim
    heads: List[np.ndarray] = []
    total = None
    for h in range(cfg.n_heads):
        prefix = f'sfa.head{h}'
        part = slice_last(xp, h * d, (h + 1) * d)
        q = channel_mix(part, params[f'{prefix}.wq'], params[f'{prefix}.bq'])
        k = channel_mix(part, params[f'{prefix}.wk'], params[f'{prefix}.bk'])
        weights = attention_weights(q, k, 1.0 / math.sqrt(d))
        heads.append(weights.data)
        per_head = mean(weights, axis=0)
        total = per_head if total is None else total + per_head
    a = softmax(total * (1.0 / cfg.n_heads), axis=-1)
    _record(stages, 'sfa.a', a)
    # A[i, j] 在节点维上收缩：对每个 (t, d) 切片做矩阵-向量乘
    mixed = reshape(matmul(a, reshape(z_t, (nodes, length * width))), (nodes, length, width))
    _record(stages, 'sfa.mixed', mixed)
    recon = _feed_forward(mixed, params, 'sfa.ffn', 'sfa.norm', cfg, mode, rng, stages)
    return recon, AttentionMaps(heads), a


def readout(recon3d: Tensor, params: Params) -> Tensor:
    """1×1卷积把D个通道压成1个，再去掉单例通道维，得到 [N, T]"""
    params = as_parameter_tensors(params)
    kernel = params['readout.kernel']
    if recon3d.shape[-1] != kernel.shape[0]:
        raise ShapeError(f"读出卷积核需要 {kernel.shape[0]} 个通道，输入有 {recon3d.shape[-1]} 个")
    out = channel_mix(recon3d, kernel, params['readout.bias'])
    return reshape(out, out.shape[:-1])


def loss(x: Union[Tensor, np.ndarray], x_hat: Tensor, a: Tensor, alpha: float) -> Tensor:
    """
    重建平方误差之和加 α 乘以 A 的L1范数

    Returns:
        Tensor: 标量损失
    """
    x = as_tensor(x)
    if x.shape != x_hat.shape:
        raise ShapeError(f"重建形状 {x_hat.shape} 与输入形状 {x.shape} 不一致")
    if alpha < 0:
        raise ConfigError(f"稀疏权重 α 必须 >= 0，当前为 {alpha}")
    reconstruction = sum_(square(x - x_hat))
    if alpha == 0:
        return reconstruction
    return reconstruction + sum_(abs_(a)) * alpha


def forward(x: Union[Tensor, np.ndarray], params: Params, cfg: ModelConfig, mode: str = 'eval',
            rng: Optional[np.random.Generator] = None,
            stages: Optional[Dict[str, Tensor]] = None) -> ForwardResult:
    """
    完整前向：嵌入 → 傅里叶注意力 → 时间注意力 → 融合注意力 → 读出 → 损失

    Args:
        x: [N, T] 单个被试的时间序列
        params: 参数仓库或参数张量映射（训练时为挂在计算记录上的张量）
        cfg: 模型配置
        mode: 'train' 或 'eval'；eval 模式下结果确定
        rng: 训练模式dropout使用的随机流
        stages: 若提供，写入各阶段的中间结果

    Returns:
        ForwardResult: 重建、注意力、A 与损失
    """
    check_mode(mode)
    params = as_parameter_tensors(params)
    x = as_tensor(x)
    xs = embed_and_encode(x, cfg, params, mode, rng)
    _record(stages, 'embed', xs)
    if cfg.use_fourier:
        xp = fourier_attention(xs, model_filter(params, cfg.n_points), params, cfg, mode, rng, stages)
    else:
        xp = xs
    _record(stages, 'fa', xp)
    if cfg.use_temporal:
        z_t = temporal_attention(xp, params, cfg, mode, rng, stages)
    else:
        z_t = transpose(xp, (1, 0, 2))
    _record(stages, 'ta', z_t)
    recon, maps, a = fusion_attention(xp, z_t, params, cfg, mode, rng, stages)
    x_hat = readout(recon, params)
    value = loss(x, x_hat, a, cfg.sparsity_weight)
    return ForwardResult(x_hat=x_hat, maps=maps, a=a, loss=value)


def extract_ec(dataset: Any, params: Params, cfg: ModelConfig) -> EcMatrix:
    """
    在全部被试上做eval模式前向，对各自的A取算术平均，并按行重新归一化

    Args:
        dataset: 具有 subjects 属性（[N, T] 数组列表）的数据集

    Returns:
        EcMatrix: 组水平的有效连接矩阵

    Raises:
        DataError: 数据集为空
    """
    subjects: Sequence[np.ndarray] = list(getattr(dataset, 'subjects', dataset))
    if not subjects:
        raise DataError("数据集为空，无法估计有效连接")
    tensors = as_parameter_tensors(params)
    total = np.zeros((cfg.n_nodes, cfg.n_nodes))
    for series in subjects:
        total += forward(series, tensors, cfg, mode='eval').a.data
    averaged = total / len(subjects)
    averaged = averaged / averaged.sum(axis=1, keepdims=True)
    return EcMatrix(averaged)
