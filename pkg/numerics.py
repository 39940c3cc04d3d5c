# Copyright: (c) OpenChiip Organization. https://github.com/OpenChiip/Chiip
# Copyright: (c) <aigc@openchiip.com>

"""
数值计算模块

提供float64稠密张量、带计算记录的反向模式自动微分、有限差分梯度检查，
以及按名称管理全部可学习参数的参数仓库（含检查点二进制容器）。

张量是值语义的：所有运算都返回新张量，从不原地修改输入。
"""
import json
import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from utils.validation import ConfigError, DataError, ShapeError, check_probability

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"FSTA1\n"

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence[float]]
Gradients = List[Optional[np.ndarray]]
VJP = Callable[[List[np.ndarray]], Gradients]


class Tensor:
    """float64稠密张量，可选地挂在一个计算记录上"""

    __slots__ = ("data", "record", "name")
    # 保证 ndarray 与 Tensor 混合运算时走 Tensor 的反射运算符
    __array_priority__ = 1000

    def __init__(self, data: ArrayLike, record: Optional["ComputationRecord"] = None,
                 name: Optional[str] = None):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data, dtype=np.float64)
        self.record = record
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"只有标量张量可以转换为数值，当前形状为 {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label})"

    def __add__(self, other: ArrayLike) -> "Tensor":
        return add(self, other)

    def __radd__(self, other: ArrayLike) -> "Tensor":
        return add(other, self)

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        return mul(other, self)

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        return div(self, other)

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __matmul__(self, other: ArrayLike) -> "Tensor":
        return matmul(self, other)

    def sum(self, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> "Tensor":
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> "Tensor":
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape: int) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes: int) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)


@dataclass
class _Entry:
    """计算记录中的一条原语运算"""
    inputs: Tuple[Tensor, ...]
    outputs: Tuple[Tensor, ...]
    vjp: VJP


class ComputationRecord:
    """
    计算记录（反向模式磁带）

    按执行顺序保存原语运算及其反向传播闭包。一个记录只服务于一次前向/反向计算，
    不在线程或训练过程之间共享。
    """

    def __init__(self):
        self.entries: List[_Entry] = []
        self.parameters: "OrderedDict[str, Tensor]" = OrderedDict()

    def __len__(self) -> int:
        return len(self.entries)

    def watch(self, name: str, array: np.ndarray) -> Tensor:
        """
        登记一个需要求梯度的参数

        Args:
            name: 参数名称，在记录内唯一
            array: 参数数值

        Returns:
            Tensor: 挂在本记录上的叶子张量
        """
        if name in self.parameters:
            raise ConfigError(f"参数重复登记: {name}")
        tensor = Tensor(array, record=self, name=name)
        self.parameters[name] = tensor
        return tensor

    def watch_store(self, store: "ParameterStore") -> "OrderedDict[str, Tensor]":
        """登记参数仓库中的全部参数，返回名称到张量的有序映射"""
        return OrderedDict((name, self.watch(name, array)) for name, array in store.items())

    def append(self, inputs: Sequence[Tensor], outputs: Sequence[Tensor], vjp: VJP) -> None:
        self.entries.append(_Entry(tuple(inputs), tuple(outputs), vjp))


def as_tensor(value: ArrayLike) -> Tensor:
    """把数组或标量包装成常量张量；已经是张量则原样返回"""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _shared_record(inputs: Sequence[Tensor]) -> Optional[ComputationRecord]:
    record = None
    for tensor in inputs:
        if tensor.record is None:
            continue
        if record is None:
            record = tensor.record
        elif tensor.record is not record:
            raise ValueError("同一运算的输入来自不同的计算记录")
    return record


def emit(data: np.ndarray, inputs: Sequence[Tensor], vjp: VJP) -> Tensor:
    """
    生成单输出运算的结果，并在需要时写入计算记录

    Args:
        data: 前向结果
        inputs: 参与运算的张量
        vjp: 反向函数，接收 [输出梯度]，返回与 inputs 对齐的梯度列表

    Returns:
        Tensor: 结果张量
    """
    record = _shared_record(inputs)
    out = Tensor(data, record=record)
    if record is not None:
        record.append(inputs, (out,), vjp)
    return out


def emit_many(datas: Sequence[np.ndarray], inputs: Sequence[Tensor], vjp: VJP) -> Tuple[Tensor, ...]:
    """生成多输出运算的结果；vjp 接收与输出对齐的梯度列表"""
    record = _shared_record(inputs)
    outs = tuple(Tensor(d, record=record) for d in datas)
    if record is not None:
        record.append(inputs, outs, vjp)
    return outs


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """把广播后的梯度求和还原到原形状"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(name: str, a: Tensor, b: Tensor) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError as e:
        raise ShapeError(f"{name}: 形状 {a.shape} 与 {b.shape} 无法广播") from e


# ---------------- 逐元素运算 ---------------- #

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)

    def vjp(grads):
        g = grads[0]
        return [_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)]

    return emit(a.data + b.data, (a, b), vjp)


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)

    def vjp(grads):
        g = grads[0]
        return [_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)]

    return emit(a.data - b.data, (a, b), vjp)


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)

    def vjp(grads):
        g = grads[0]
        return [_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)]

    return emit(a.data * b.data, (a, b), vjp)


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("div", a, b)

    def vjp(grads):
        g = grads[0]
        return [
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        ]

    return emit(a.data / b.data, (a, b), vjp)


def neg(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    return emit(-x.data, (x,), lambda grads: [-grads[0]])


def square(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    return emit(x.data * x.data, (x,), lambda grads: [2.0 * x.data * grads[0]])


def abs_(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    return emit(np.abs(x.data), (x,), lambda grads: [np.sign(x.data) * grads[0]])


def relu(x: ArrayLike) -> Tensor:
    """ReLU；在恰好为0处梯度取0"""
    x = as_tensor(x)
    mask = x.data > 0.0
    return emit(np.where(mask, x.data, 0.0), (x,), lambda grads: [grads[0] * mask])


# ---------------- 形状运算 ---------------- #

def reshape(x: ArrayLike, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    shape = tuple(shape)
    try:
        data = x.data.reshape(shape)
    except ValueError as e:
        raise ShapeError(f"无法把形状 {x.shape} 重排为 {shape}") from e
    return emit(data, (x,), lambda grads: [grads[0].reshape(x.shape)])


def transpose(x: ArrayLike, axes: Optional[Sequence[int]] = None) -> Tensor:
    x = as_tensor(x)
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return emit(np.transpose(x.data, axes), (x,), lambda grads: [np.transpose(grads[0], inverse)])


def swap_last(x: ArrayLike) -> Tensor:
    """交换最后两个维度"""
    x = as_tensor(x)
    axes = list(range(x.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return transpose(x, axes)


def slice_last(x: ArrayLike, start: int, stop: int) -> Tensor:
    """沿最后一维切片 x[..., start:stop]"""
    x = as_tensor(x)
    if not 0 <= start < stop <= x.shape[-1]:
        raise ShapeError(f"切片 [{start}:{stop}] 超出最后一维长度 {x.shape[-1]}")

    def vjp(grads):
        full = np.zeros_like(x.data)
        full[..., start:stop] = grads[0]
        return [full]

    return emit(x.data[..., start:stop], (x,), vjp)


def concat_last(tensors: Sequence[ArrayLike]) -> Tensor:
    """沿最后一维拼接"""
    tensors = [as_tensor(t) for t in tensors]
    widths = [t.shape[-1] for t in tensors]
    bounds = np.cumsum([0] + widths)
    leading = {t.shape[:-1] for t in tensors}
    if len(leading) != 1:
        raise ShapeError(f"拼接的张量前导形状不一致: {sorted(leading)}")

    def vjp(grads):
        g = grads[0]
        return [g[..., bounds[i]:bounds[i + 1]] for i in range(len(tensors))]

    return emit(np.concatenate([t.data for t in tensors], axis=-1), tensors, vjp)


# ---------------- 归约 ---------------- #

def _normalize_axes(axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def sum_(x: ArrayLike, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    axes = _normalize_axes(axis, x.ndim)

    def vjp(grads):
        g = grads[0]
        if not keepdims:
            g = np.expand_dims(g, axes)
        return [np.broadcast_to(g, x.shape).copy()]

    return emit(x.data.sum(axis=axes, keepdims=keepdims), (x,), vjp)


def mean(x: ArrayLike, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    axes = _normalize_axes(axis, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes])) if axes else 1
    return sum_(x, axis=axes, keepdims=keepdims) * (1.0 / count)


# ---------------- 矩阵与网络层 ---------------- #

def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    """
    批量矩阵乘法 [..,m,k] × [..,k,n] -> [..,m,n]，前导批维按广播规则对齐

    Raises:
        ShapeError: 内维不一致或批维无法广播，错误信息同时给出两个形状
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul 需要至少二维的输入，得到 {a.shape} 与 {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul 内维不一致: {a.shape} × {b.shape}")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError as e:
        raise ShapeError(f"matmul 批维无法广播: {a.shape} × {b.shape}") from e

    def vjp(grads):
        g = grads[0]
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return [_unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)]

    return emit(np.matmul(a.data, b.data), (a, b), vjp)


def softmax(x: ArrayLike, axis: int = -1) -> Tensor:
    """数值稳定的softmax（先减去最大值）"""
    x = as_tensor(x)
    if not -x.ndim <= axis < x.ndim:
        raise ShapeError(f"softmax 轴 {axis} 超出 {x.ndim} 维张量的范围")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def vjp(grads):
        g = grads[0]
        return [y * (g - (g * y).sum(axis=axis, keepdims=True))]

    return emit(y, (x,), vjp)


def layer_norm(x: ArrayLike, scale: ArrayLike, shift: ArrayLike, eps: float = 1e-5) -> Tensor:
    """
    沿最后一维做层归一化，再施加仿射变换 scale·x̂ + shift

    Args:
        x: 输入 [.., D]
        scale: 缩放 [D]
        shift: 平移 [D]
        eps: 方差下限，必须为正
    """
    x, scale, shift = as_tensor(x), as_tensor(scale), as_tensor(shift)
    width = x.shape[-1]
    if scale.shape != (width,) or shift.shape != (width,):
        raise ShapeError(f"layer_norm 仿射参数形状应为 ({width},)，得到 {scale.shape} 与 {shift.shape}")
    if eps <= 0:
        raise ConfigError(f"layer_norm eps 必须为正，当前为 {eps}")
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    normed = centered * inv_std
    lead = tuple(range(x.ndim - 1))

    def vjp(grads):
        g = grads[0]
        g_normed = g * scale.data
        gx = inv_std * (
            g_normed
            - g_normed.mean(axis=-1, keepdims=True)
            - normed * (g_normed * normed).mean(axis=-1, keepdims=True)
        )
        return [gx, (g * normed).sum(axis=lead), g.sum(axis=lead)]

    return emit(normed * scale.data + shift.data, (x, scale, shift), vjp)


def channel_mix(x: ArrayLike, kernel: ArrayLike, bias: ArrayLike) -> Tensor:
    """
    1×1卷积：只在通道维上做线性映射 [.., C_in] -> [.., C_out]

    前导维先展平成一个二维矩阵，前向与反向各只做一次矩阵乘法。

    Raises:
        ShapeError: 通道数与卷积核不匹配
    """
    x, kernel, bias = as_tensor(x), as_tensor(kernel), as_tensor(bias)
    if kernel.ndim != 2 or x.ndim < 1 or x.shape[-1] != kernel.shape[0]:
        raise ShapeError(f"channel_mix 通道不匹配: 输入 {x.shape}，卷积核 {kernel.shape}")
    if bias.shape != (kernel.shape[1],):
        raise ShapeError(f"channel_mix 偏置形状应为 ({kernel.shape[1]},)，得到 {bias.shape}")
    flat = x.data.reshape(-1, kernel.shape[0])
    out = flat @ kernel.data + bias.data

    def vjp(grads):
        g = grads[0].reshape(-1, kernel.shape[1])
        return [(g @ kernel.data.T).reshape(x.shape), flat.T @ g, g.sum(axis=0)]

    return emit(out.reshape(x.shape[:-1] + (kernel.shape[1],)), (x, kernel, bias), vjp)


def attention_weights(q: ArrayLike, k: ArrayLike, scale: float) -> Tensor:
    """
    缩放点积注意力权重 softmax(q·kᵀ·scale)，沿最后一维归一化

    等价于 softmax(matmul(q, swap_last(k)) * scale)，但整段只记一条计算记录，
    反向时不再保留中间的打分矩阵。

    Args:
        q: 查询 [.., T, d]
        k: 键 [.., T', d]
        scale: 打分缩放系数

    Returns:
        Tensor: 权重 [.., T, T']，每行和为1
    """
    q, k = as_tensor(q), as_tensor(k)
    if q.ndim < 2 or k.ndim < 2 or q.shape[-1] != k.shape[-1]:
        raise ShapeError(f"attention_weights 查询与键的宽度不一致: {q.shape} 与 {k.shape}")
    try:
        np.broadcast_shapes(q.shape[:-2], k.shape[:-2])
    except ValueError as e:
        raise ShapeError(f"attention_weights 批维无法广播: {q.shape} 与 {k.shape}") from e
    scores = np.matmul(q.data, np.swapaxes(k.data, -1, -2)) * scale
    scores -= scores.max(axis=-1, keepdims=True)
    y = np.exp(scores)
    y /= y.sum(axis=-1, keepdims=True)
    del scores

    def vjp(grads):
        g = grads[0]
        gs = g * y
        gs -= y * gs.sum(axis=-1, keepdims=True)
        gs *= scale
        gq = np.matmul(gs, k.data)
        gk = np.matmul(np.swapaxes(gs, -1, -2), q.data)
        return [_unbroadcast(gq, q.shape), _unbroadcast(gk, k.shape)]

    return emit(y, (q, k), vjp)


def dropout(x: ArrayLike, rate: float, mode: str, rng: Optional[np.random.Generator]) -> Tensor:
    """
    反向缩放的dropout：训练时以概率rate置零并把保留值放大 1/(1-rate)，推理时恒等

    Args:
        x: 输入
        rate: 丢弃概率，0 <= rate < 1
        mode: 'train' 或 'eval'
        rng: 掩码只从此随机流中抽取
    """
    check_probability("dropout rate", rate)
    check_mode(mode)
    x = as_tensor(x)
    if mode == "eval" or rate == 0.0:
        return x
    if rng is None:
        raise ConfigError("训练模式的dropout需要提供随机数生成器")
    keep = (rng.random(x.shape) >= rate).astype(np.float64) / (1.0 - rate)
    return mul(x, keep)


def check_mode(mode: str) -> None:
    if mode not in ("train", "eval"):
        raise ConfigError(f"未知的运行模式: {mode}，应为 'train' 或 'eval'")


# ---------------- 反向传播 ---------------- #

def backward(loss: Tensor, record: Optional[ComputationRecord] = None) -> "OrderedDict[str, np.ndarray]":
    """
    沿计算记录逆序回放，求损失对每个已登记参数的梯度

    扇出处的梯度按记录顺序求和，保证逐位可复现。

    Args:
        loss: 标量损失
        record: 计算记录，默认取 loss 所属的记录

    Returns:
        OrderedDict[str, np.ndarray]: 参数名到梯度的映射，与登记顺序一致

    Raises:
        ShapeError: 损失不是标量
    """
    if loss.size != 1:
        raise ShapeError(f"backward 需要标量损失，得到形状 {loss.shape}")
    record = record or loss.record
    if record is None:
        raise ValueError("损失张量没有关联的计算记录")

    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for entry in reversed(record.entries):
        # 输出张量的梯度在此之后不再被读取
        out_grads = [grads.pop(id(out), None) for out in entry.outputs]
        if all(g is None for g in out_grads):
            continue
        out_grads = [
            np.zeros_like(out.data) if g is None else g
            for out, g in zip(entry.outputs, out_grads)
        ]
        for tensor, g in zip(entry.inputs, entry.vjp(out_grads)):
            if g is None or tensor.record is None:
                continue
            key = id(tensor)
            grads[key] = grads[key] + g if key in grads else g

    return OrderedDict(
        (name, np.array(grads.get(id(tensor), np.zeros_like(tensor.data)), dtype=np.float64))
        for name, tensor in record.parameters.items()
    )


def grad_check(
    f: Callable[[Mapping[str, Tensor]], Tensor],
    params: "ParameterStore",
    h: float = 1e-5,
    abs_floor: float = 0.0,
) -> float:
    """
    用中心差分校验解析梯度

    对每个参数元素比较解析梯度与 (f(p+h) - f(p-h)) / 2h，相对误差分母取
    max(|解析|, |数值|, 1e-8)。f 必须是确定性的（dropout使用eval模式），
    且调用方需保证扰动不跨越ReLU拐点。

    Args:
        f: 由参数张量映射计算标量损失的函数
        params: 参数仓库，检查过程中会临时修改并恢复
        h: 差分步长
        abs_floor: 绝对误差不超过该值的元素计为0误差，用于屏蔽结构性为零的梯度上的舍入噪声

    Returns:
        float: 所有元素中最大的相对误差
    """
    if h <= 0:
        raise ConfigError(f"差分步长必须为正，当前为 {h}")
    record = ComputationRecord()
    loss = f(record.watch_store(params))
    analytic = backward(loss, record)

    worst = 0.0
    worst_name = None
    for name, array in params.items():
        flat = array.reshape(-1)
        g_flat = analytic[name].reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + h
            plus = _evaluate(f, params)
            flat[i] = original - h
            minus = _evaluate(f, params)
            flat[i] = original
            numeric = (plus - minus) / (2.0 * h)
            diff = abs(g_flat[i] - numeric)
            if diff <= abs_floor:
                continue
            rel = diff / max(abs(g_flat[i]), abs(numeric), 1e-8)
            if rel > worst:
                worst, worst_name = rel, f"{name}[{i}]"
    logger.debug("梯度检查完成，最大相对误差 %.3e 出现在 %s", worst, worst_name)
    return worst


def _evaluate(f: Callable[[Mapping[str, Tensor]], Tensor], params: "ParameterStore") -> float:
    constants = OrderedDict((name, Tensor(array)) for name, array in params.items())
    return f(constants).item()


# ---------------- 参数仓库 ---------------- #

class ParameterStore:
    """
    有序的参数仓库：名称唯一，初始化后形状不可变

    也是检查点的载体，二进制布局为 magic "FSTA1\\n" + 单行JSON头 + 小端float64载荷。
    """

    def __init__(self):
        self._params: "OrderedDict[str, np.ndarray]" = OrderedDict()

    def add(self, name: str, array: np.ndarray) -> None:
        if name in self._params:
            raise ConfigError(f"参数名称重复: {name}")
        self._params[name] = np.array(array, dtype=np.float64)

    def assign(self, name: str, array: np.ndarray) -> None:
        """原位替换参数数值，形状必须保持不变"""
        current = self[name]
        array = np.asarray(array, dtype=np.float64)
        if array.shape != current.shape:
            raise ShapeError(f"参数 {name} 形状不可变: {current.shape} -> {array.shape}")
        current[...] = array

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self._params[name]
        except KeyError:
            raise KeyError(f"未知参数: {name}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> List[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def shapes(self) -> "OrderedDict[str, Tuple[int, ...]]":
        return OrderedDict((name, array.shape) for name, array in self._params.items())

    def copy(self) -> "ParameterStore":
        clone = ParameterStore()
        for name, array in self._params.items():
            clone.add(name, array)
        return clone

    def n_values(self) -> int:
        return int(sum(array.size for array in self._params.values()))

    def to_bytes(self, config: Optional[Mapping] = None) -> bytes:
        """
        序列化为检查点容器

        Args:
            config: 随检查点保存的模型配置（JSON可序列化）

        Returns:
            bytes: 完整容器内容
        """
        entries = []
        payload = []
        offset = 0
        for name, array in self._params.items():
            raw = np.ascontiguousarray(array, dtype="<f8").tobytes()
            entries.append({"name": name, "shape": list(array.shape), "offset": offset})
            payload.append(raw)
            offset += len(raw)
        header = json.dumps(
            {"config": dict(config or {}), "parameters": entries},
            sort_keys=True,
            separators=(",", ":"),
        )
        return CHECKPOINT_MAGIC + header.encode("utf-8") + b"\n" + b"".join(payload)

    @classmethod
    def from_bytes(cls, blob: bytes) -> Tuple["ParameterStore", dict]:
        """
        从检查点容器反序列化

        Returns:
            Tuple[ParameterStore, dict]: 参数仓库与随附的配置

        Raises:
            DataError: 容器损坏或格式不符
        """
        if not blob.startswith(CHECKPOINT_MAGIC):
            raise DataError("检查点缺少 FSTA1 标识")
        end = blob.find(b"\n", len(CHECKPOINT_MAGIC))
        if end < 0:
            raise DataError("检查点头部未以换行结束")
        try:
            header = json.loads(blob[len(CHECKPOINT_MAGIC):end].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise DataError(f"检查点头部不是合法JSON: {e}") from e
        payload = blob[end + 1:]

        store = cls()
        expected_offset = 0
        for entry in header.get("parameters", []):
            shape = tuple(int(s) for s in entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            offset = int(entry["offset"])
            if offset != expected_offset or offset + 8 * count > len(payload):
                raise DataError(f"检查点参数 {entry['name']} 的偏移或长度无效")
            values = np.frombuffer(payload, dtype="<f8", count=count, offset=offset)
            store.add(entry["name"], values.reshape(shape).astype(np.float64))
            expected_offset = offset + 8 * count
        if expected_offset != len(payload):
            raise DataError(f"检查点载荷长度不符: 期望 {expected_offset} 字节，实际 {len(payload)} 字节")
        return store, header.get("config", {})
