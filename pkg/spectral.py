# Copyright: (c) OpenChiip Organization. https://github.com/OpenChiip/Chiip
# Copyright: (c) <aigc@openchiip.com>

"""
频域模块

沿时间轴（第0维）的实输入FFT/IFFT、可学习滤波器调制、朴素DFT与循环卷积两个校验实现，
以及穿过频域的反向传播规则。长度为2的幂时走基2 FFT，其余长度直接与缓存的 [F, T] 实基相乘。

半谱约定：长度为T的实序列只保留 F = T//2 + 1 个频点；第0个频点（T为偶数时还有第T/2个）
的虚部恒为0，这样逆变换的输出严格为实数。
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple, Union

import numpy as np

from numerics import Tensor, add, as_tensor, emit, emit_many, mul, sub
from utils.validation import DataError, ShapeError

logger = logging.getLogger(__name__)

# 钉住频点的虚部允许的舍入残差（相对于谱幅度）
PIN_TOLERANCE = 1e-9


def n_bins(length: int) -> int:
    """长度为T的实序列的半谱频点数 ⌊T/2⌋+1"""
    return length // 2 + 1


def pinned_bins(length: int) -> Tuple[int, ...]:
    """虚部必须为0的频点：0，以及T为偶数时的T/2"""
    if length % 2 == 0:
        return (0, length // 2)
    return (0,)


def pin_mask(length: int, shape: Tuple[int, ...]) -> np.ndarray:
    """与滤波器同形的0/1掩码，钉住的频点为0"""
    mask = np.ones(shape, dtype=np.float64)
    for f in pinned_bins(length):
        mask[f] = 0.0
    return mask


def pin_imaginary(imag: np.ndarray, length: int) -> None:
    """原位把钉住频点的虚部置0"""
    for f in pinned_bins(length):
        imag[f] = 0.0


@dataclass(frozen=True)
class ComplexSpectrum:
    """半谱：实部与虚部分开存放，形状 [F, N, D]，并保留原始长度T"""
    re: Tensor
    im: Tensor
    length: int

    def __post_init__(self):
        if self.re.shape != self.im.shape:
            raise ShapeError(f"频谱实部 {self.re.shape} 与虚部 {self.im.shape} 形状不一致")
        if self.re.shape[0] != n_bins(self.length):
            raise ShapeError(
                f"长度 {self.length} 的半谱应有 {n_bins(self.length)} 个频点，得到 {self.re.shape[0]}"
            )

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.re.shape

    def to_complex(self) -> np.ndarray:
        return self.re.data + 1j * self.im.data


@dataclass(frozen=True)
class SpectralFilter:
    """可学习的复数滤波器，实部与虚部都是 [F, N, D] 张量"""
    re: Tensor
    im: Tensor

    def __post_init__(self):
        if self.re.shape != self.im.shape:
            raise ShapeError(f"滤波器实部 {self.re.shape} 与虚部 {self.im.shape} 形状不一致")

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.re.shape

    @classmethod
    def identity(cls, length: int, n_nodes: int, width: int) -> "SpectralFilter":
        shape = (n_bins(length), n_nodes, width)
        return cls(Tensor(np.ones(shape)), Tensor(np.zeros(shape)))


@dataclass(frozen=True)
class CyclicKernel:
    """循环卷积核 [T, N, D]"""
    values: np.ndarray

    @property
    def length(self) -> int:
        return self.values.shape[0]


# ---------------- 变换核心 ---------------- #

def dft_naive(x: Union[np.ndarray, list]) -> np.ndarray:
    """
    直接O(T²)求和的离散傅里叶变换 H_f = Σ_t x_t e^{-j2πft/T}

    也接受 [T, ...] 形状的数组，沿第0维变换。作为快速实现的校验基准。
    """
    x = np.asarray(x)
    length = x.shape[0]
    if length < 1:
        raise ShapeError("DFT 需要至少一个样本")
    return np.tensordot(_dft_matrix(length), x, axes=(1, 0))


@lru_cache(maxsize=32)
def _dft_matrix(length: int) -> np.ndarray:
    idx = np.arange(length)
    # 先对T取模再换算角度，避免 f·t 很大时的相位误差
    phase = (np.outer(idx, idx) % length) * (2.0 * np.pi / length)
    matrix = np.cos(phase) - 1j * np.sin(phase)
    matrix.setflags(write=False)
    return matrix


@lru_cache(maxsize=32)
def _bit_reverse(length: int) -> np.ndarray:
    bits = length.bit_length() - 1
    order = np.array([int(format(i, f"0{bits}b")[::-1], 2) if bits else 0 for i in range(length)])
    order.setflags(write=False)
    return order


def _is_power_of_two(length: int) -> bool:
    return length >= 1 and length & (length - 1) == 0


def _fft_axis0(z: np.ndarray) -> np.ndarray:
    """
    沿第0维的复数DFT

    长度为2的幂时使用迭代式基2 Cooley–Tukey（按时间抽取），其余长度退回朴素DFT。
    """
    length = z.shape[0]
    if not _is_power_of_two(length):
        return dft_naive(z)
    trailing = z.shape[1:]
    x = np.asarray(z, dtype=np.complex128)[_bit_reverse(length)].reshape(length, -1)
    m = 2
    while m <= length:
        half = m // 2
        k = np.arange(half)
        twiddle = np.cos(2.0 * np.pi * k / m) - 1j * np.sin(2.0 * np.pi * k / m)
        blocks = x.reshape(length // m, m, -1)
        u = blocks[:, :half]
        t = blocks[:, half:] * twiddle[None, :, None]
        x = np.concatenate([u + t, u - t], axis=1).reshape(length, -1)
        m *= 2
    return x.reshape((length,) + trailing)


@lru_cache(maxsize=32)
def _real_basis(length: int) -> Tuple[np.ndarray, np.ndarray]:
    """半谱实基 cos θ_ft 与 sin θ_ft，形状均为 [F, T]"""
    phase = (np.outer(np.arange(n_bins(length)), np.arange(length)) % length) * (2.0 * np.pi / length)
    cos, sin = np.cos(phase), np.sin(phase)
    cos.setflags(write=False)
    sin.setflags(write=False)
    return cos, sin


def _rfft_data(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    length = x.shape[0]
    if _is_power_of_two(length):
        spectrum = _fft_axis0(x.astype(np.complex128))[: n_bins(length)]
        re = np.ascontiguousarray(spectrum.real)
        im = np.ascontiguousarray(spectrum.imag)
    else:
        # 其余长度只需半谱，直接与实基相乘
        cos, sin = _real_basis(length)
        flat = np.asarray(x, dtype=np.float64).reshape(length, -1)
        shape = (n_bins(length),) + x.shape[1:]
        re = (cos @ flat).reshape(shape)
        im = -(sin @ flat).reshape(shape)
    pin_imaginary(im, length)
    return re, im


def _synthesize(re: np.ndarray, im: np.ndarray, length: int) -> np.ndarray:
    """x_t = Σ_f re_f cos θ_ft − im_f sin θ_ft，不含频点重数与1/T"""
    if _is_power_of_two(length):
        padded = np.zeros((length,) + re.shape[1:], dtype=np.complex128)
        padded[: n_bins(length)] = re + 1j * im
        # Re(FFT(conj Z))_t 正好是上式
        return _fft_axis0(np.conj(padded)).real
    cos, sin = _real_basis(length)
    width = int(np.prod(re.shape[1:], dtype=np.int64))
    out = cos.T @ re.reshape(-1, width) - sin.T @ im.reshape(-1, width)
    return out.reshape((length,) + re.shape[1:])


def _irfft_data(re: np.ndarray, im: np.ndarray, length: int) -> np.ndarray:
    """由半谱重建长度为T的实序列（钉住频点的虚部按0处理）"""
    weights = _bin_weights(length).reshape((-1,) + (1,) * (re.ndim - 1))
    im = im.copy()
    pin_imaginary(im, length)
    # 厄米对称：非边界频点与其共轭各出现一次
    return _synthesize(weights * re, weights * im, length) / length


def _bin_weights(length: int) -> np.ndarray:
    """半谱各频点在逆变换中的重数：边界频点为1，其余为2"""
    weights = np.full(n_bins(length), 2.0)
    for f in pinned_bins(length):
        weights[f] = 1.0
    return weights


def _check_pinned(re: np.ndarray, im: np.ndarray, length: int, what: str) -> None:
    scale = max(1.0, float(np.max(np.abs(re))) if re.size else 1.0)
    for f in pinned_bins(length):
        residual = float(np.max(np.abs(im[f]))) if im[f].size else 0.0
        if residual > PIN_TOLERANCE * scale:
            raise DataError(
                f"{what} 在频点 {f} 的虚部为 {residual:.3e}，违反实数输出约束"
            )


# ---------------- 可微运算 ---------------- #

def fft_real(x: Union[Tensor, np.ndarray]) -> ComplexSpectrum:
    """
    沿时间轴的实输入FFT，返回频点 0..⌊T/2⌋

    Args:
        x: [T, ...] 实张量

    Returns:
        ComplexSpectrum: 半谱
    """
    x = as_tensor(x)
    length = x.shape[0]
    if length < 1:
        raise ShapeError("fft_real 需要 T >= 1")
    re, im = _rfft_data(x.data)

    def vjp(grads):
        g_re, g_im = grads
        g_im = g_im.copy()
        pin_imaginary(g_im, length)
        # d x_t = Σ_f g_re cos θ − g_im sin θ
        return [_synthesize(g_re, g_im, length)]

    re_t, im_t = emit_many((re, im), (x,), vjp)
    return ComplexSpectrum(re_t, im_t, length)


def apply_filter(spec: ComplexSpectrum, filt: SpectralFilter) -> ComplexSpectrum:
    """
    逐元素复数乘法 (a+bi)(c+di) = (ac−bd) + (ad+bc)i，对频谱与滤波器都可微

    Raises:
        ShapeError: 形状不一致
    """
    if spec.shape != filt.shape:
        raise ShapeError(f"滤波器形状 {filt.shape} 与频谱形状 {spec.shape} 不一致")
    re = sub(mul(spec.re, filt.re), mul(spec.im, filt.im))
    im = add(mul(spec.re, filt.im), mul(spec.im, filt.re))
    return ComplexSpectrum(re, im, spec.length)


def ifft_real(spec: ComplexSpectrum, length: int) -> Tensor:
    """
    实输出的逆变换，归一化因子为1/T

    Raises:
        ShapeError: 频点数与T不匹配
        DataError: 钉住频点的虚部不为0
    """
    if spec.shape[0] != n_bins(length):
        raise ShapeError(f"长度 {length} 需要 {n_bins(length)} 个频点，得到 {spec.shape[0]}")
    _check_pinned(spec.re.data, spec.im.data, length, "频谱")
    out = _irfft_data(spec.re.data, spec.im.data, length)
    weights = _bin_weights(length).reshape((-1,) + (1,) * (spec.re.ndim - 1)) / length

    def vjp(grads):
        g_re, g_im = _rfft_data(grads[0])
        return [weights * g_re, weights * g_im]

    return emit(out, (spec.re, spec.im), vjp)


# ---------------- 循环卷积校验 ---------------- #

def cyclic_convolve(kernel: CyclicKernel, x: Union[Tensor, np.ndarray]) -> Tensor:
    """
    直接按模下标求和的循环卷积 y_t = Σ_m C_m · x_{(t−m) mod T}

    O(T²)，作为频域滤波等价性的校验基准，不参与求导。
    """
    x = as_tensor(x).data
    if kernel.values.shape != x.shape:
        raise ShapeError(f"卷积核形状 {kernel.values.shape} 与输入形状 {x.shape} 不一致")
    out = np.zeros_like(x)
    for m in range(x.shape[0]):
        # np.roll(x, m)[t] == x[(t - m) mod T]
        out += kernel.values[m] * np.roll(x, m, axis=0)
    return Tensor(out)


def filter_to_kernel(filt: SpectralFilter, length: int) -> CyclicKernel:
    """
    滤波器的实逆变换，得到等价的循环卷积核

    Raises:
        DataError: 钉住频点的虚部不为0
    """
    _check_pinned(filt.re.data, filt.im.data, length, "滤波器")
    return CyclicKernel(_irfft_data(filt.re.data, filt.im.data, length))


def kernel_to_filter(kernel: CyclicKernel) -> SpectralFilter:
    """循环卷积核的半谱，即与之等价的滤波器"""
    re, im = _rfft_data(kernel.values)
    return SpectralFilter(Tensor(re), Tensor(im))
