import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from numerics import ParameterStore, Tensor, grad_check, mul, sum_
from spectral import (ComplexSpectrum, CyclicKernel, SpectralFilter, apply_filter, cyclic_convolve, dft_naive,
                      fft_real, filter_to_kernel, ifft_real, kernel_to_filter, n_bins, pin_mask, pinned_bins)
from utils.validation import DataError, ShapeError


def _random_filter(rng, length, shape):
    re = rng.standard_normal((n_bins(length),) + shape)
    im = rng.standard_normal((n_bins(length),) + shape) * pin_mask(length, (n_bins(length),) + shape)
    return SpectralFilter(Tensor(re), Tensor(im))


@pytest.mark.parametrize("length, expected", [(1, 1), (2, 2), (7, 4), (8, 5), (500, 251)])
def test_bin_count(length, expected):
    assert n_bins(length) == expected


def test_pinned_bins_depend_on_parity():
    assert pinned_bins(8) == (0, 4)
    assert pinned_bins(7) == (0,)


@pytest.mark.parametrize("length", [1, 2, 3, 4, 5, 8, 12, 16, 31, 64])
def test_fft_matches_naive_dft(length):
    x = np.random.default_rng(length).standard_normal((length, 2, 3))
    spec = fft_real(x)
    expected = dft_naive(x)[: n_bins(length)]
    assert_allclose(spec.re.data, expected.real, atol=1e-9)
    assert_allclose(spec.im.data, expected.imag, atol=1e-9)


@pytest.mark.parametrize("length", [4, 9, 16])
def test_pinned_imaginary_parts_are_exactly_zero(length):
    spec = fft_real(np.random.default_rng(0).standard_normal((length, 3)))
    for f in pinned_bins(length):
        assert_array_equal(spec.im.data[f], 0.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=1, max_value=40), st.integers(min_value=0, max_value=2 ** 16))
def test_inverse_recovers_signal(length, seed):
    x = np.random.default_rng(seed).standard_normal((length, 2))
    assert_allclose(ifft_real(fft_real(x), length).data, x, atol=1e-10)


@pytest.mark.parametrize("length", [5, 16, 33])
def test_parseval(length):
    x = np.random.default_rng(1).standard_normal(length)
    spec = fft_real(x).to_complex()
    weights = np.full(n_bins(length), 2.0)
    weights[list(pinned_bins(length))] = 1.0
    assert_allclose(np.sum(x * x), np.sum(weights * np.abs(spec) ** 2) / length, rtol=1e-10)


def test_identity_filter_passes_signal_through():
    x = np.random.default_rng(2).standard_normal((10, 3, 4))
    filt = SpectralFilter.identity(10, 3, 4)
    assert_allclose(ifft_real(apply_filter(fft_real(x), filt), 10).data, x, atol=1e-12)


def test_filter_shape_mismatch():
    spec = fft_real(np.zeros((8, 2, 2)))
    with pytest.raises(ShapeError):
        apply_filter(spec, SpectralFilter.identity(8, 3, 2))


def test_inverse_rejects_imaginary_part_on_pinned_bin():
    re = np.ones((5, 1))
    im = np.zeros((5, 1))
    im[4] = 0.5
    with pytest.raises(DataError):
        ifft_real(ComplexSpectrum(Tensor(re), Tensor(im), 8), 8)


def test_spectrum_bin_count_checked():
    with pytest.raises(ShapeError):
        ComplexSpectrum(Tensor(np.ones((4, 2))), Tensor(np.zeros((4, 2))), 8)


def test_spectral_filter_equals_cyclic_convolution():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((12, 2, 3))
    filt = _random_filter(rng, 12, (2, 3))
    via_fft = ifft_real(apply_filter(fft_real(x), filt), 12).data
    via_conv = cyclic_convolve(filter_to_kernel(filt, 12), x).data
    assert_allclose(via_fft, via_conv, atol=1e-10)


def test_delta_kernel_is_identity():
    values = np.zeros((6, 1, 1))
    values[0] = 1.0
    x = np.random.default_rng(4).standard_normal((6, 1, 1))
    assert_allclose(cyclic_convolve(CyclicKernel(values), x).data, x)
    filt = kernel_to_filter(CyclicKernel(values))
    assert_allclose(filt.re.data, 1.0, atol=1e-12)
    assert_allclose(filt.im.data, 0.0, atol=1e-12)


def test_kernel_filter_conversion_is_consistent():
    rng = np.random.default_rng(5)
    filt = _random_filter(rng, 9, (2, 2))
    back = kernel_to_filter(filter_to_kernel(filt, 9))
    assert_allclose(back.re.data, filt.re.data, atol=1e-10)
    assert_allclose(back.im.data, filt.im.data, atol=1e-10)


@pytest.mark.parametrize("length", [7, 8, 12])
def test_gradient_through_frequency_domain(length):
    rng = np.random.default_rng(length)
    weights = rng.standard_normal((length, 2, 2))
    shape = (n_bins(length), 2, 2)
    params = ParameterStore()
    params.add('x', rng.standard_normal((length, 2, 2)))
    params.add('re', rng.standard_normal(shape))
    params.add('im', rng.standard_normal(shape))
    mask = pin_mask(length, shape)

    def f(p):
        filt = SpectralFilter(p['re'], mul(p['im'], mask))
        y = ifft_real(apply_filter(fft_real(p['x']), filt), length)
        return sum_(y * y * weights)

    assert grad_check(f, params, abs_floor=1e-7) < 1e-4


@pytest.mark.parametrize("length", [6, 8, 12, 500])
def test_transforms_agree_with_numpy_fft(length):
    rng = np.random.default_rng(length)
    x = rng.standard_normal((length, 3, 2))
    spec = fft_real(x)
    expected = np.fft.rfft(x, axis=0)
    assert_allclose(spec.re.data, expected.real, atol=1e-9)
    assert_allclose(spec.im.data, expected.imag, atol=1e-9)
    filt = _random_filter(rng, length, (3, 2))
    response = filt.re.data + 1j * filt.im.data
    filtered = ifft_real(apply_filter(spec, filt), length).data
    assert_allclose(filtered, np.fft.irfft(expected * response, n=length, axis=0), atol=1e-9)
