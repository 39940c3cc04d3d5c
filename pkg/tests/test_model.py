from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from config import Config
from data import TimeSeriesDataset
from model import (ABLATION_VARIANTS, ModelConfig, as_parameter_tensors, check_parameters, embed_and_encode,
                   extract_ec, forward, fourier_attention, fusion_attention, init_params, loss, model_filter,
                   parameter_shapes, positional_encoding, readout, temporal_attention)
from numerics import ParameterStore, Tensor
from spectral import pinned_bins
from utils.validation import ConfigError, DataError, ShapeError


def _series(cfg, seed=0, scale=1.0):
    return np.random.default_rng(seed).standard_normal((cfg.n_nodes, cfg.n_points)) * scale


@pytest.mark.parametrize("overrides", [
    {'n_nodes': 1},
    {'n_points': 1},
    {'embed_dim': 6, 'n_heads': 4},
    {'n_heads': 0},
    {'dropout_rate': 1.0},
    {'sparsity_weight': -0.1},
])
def test_invalid_model_config(overrides):
    values = dict(n_nodes=3, n_points=8, embed_dim=4, n_heads=2)
    values.update(overrides)
    with pytest.raises(ConfigError):
        ModelConfig(**values)


def test_ffn_width_defaults_to_four_times_embedding():
    assert ModelConfig(n_nodes=3, n_points=8, embed_dim=6, n_heads=3).ffn_dim == 24
    assert ModelConfig(n_nodes=3, n_points=8, embed_dim=6, n_heads=3, ffn_dim=5).ffn_dim == 5


def test_model_config_from_layered_config():
    config = Config()
    config.set('model.n_heads', 4)
    config.set('model.variant', 'no-ta')
    cfg = ModelConfig.from_config(config, n_nodes=5, n_points=100)
    assert (cfg.n_nodes, cfg.n_points, cfg.n_heads, cfg.embed_dim) == (5, 100, 4, 16)
    assert not cfg.use_temporal and cfg.use_fourier


def test_model_config_dict_rejects_unknown_keys(tiny_cfg):
    assert ModelConfig.from_dict(tiny_cfg.to_dict()) == tiny_cfg
    with pytest.raises(ConfigError):
        ModelConfig.from_dict(dict(tiny_cfg.to_dict(), depth=3))


def test_unknown_variant(tiny_cfg):
    with pytest.raises(ConfigError):
        tiny_cfg.with_variant('no-sfa')


def test_parameter_names_and_shapes(tiny_cfg):
    shapes = parameter_shapes(tiny_cfg)
    names = list(shapes)
    assert names[:2] == ['embed.kernel', 'embed.bias']
    assert names[-2:] == ['readout.kernel', 'readout.bias']
    assert shapes['fa.filter.re'] == (5, 3, 4)
    assert shapes['ta.head1.wq'] == (2, 2)
    assert shapes['ta.wc'] == (4, 4)
    assert shapes['sfa.ffn.w1'] == (4, 16)
    assert shapes['readout.kernel'] == (4, 1)
    assert 'sfa.head0.wv' not in shapes


def test_init_is_deterministic_and_pins_filter(tiny_cfg):
    a = init_params(tiny_cfg, np.random.default_rng(3))
    b = init_params(tiny_cfg, np.random.default_rng(3))
    assert a.to_bytes() == b.to_bytes()
    assert a.shapes() == parameter_shapes(tiny_cfg)
    for f in pinned_bins(tiny_cfg.n_points):
        assert_array_equal(a['fa.filter.im'][f], 0.0)
    assert_array_equal(a['fa.norm1.scale'], 1.0)
    bound = np.sqrt(1.0 / tiny_cfg.embed_dim)
    assert np.all(np.abs(a['ta.wc']) <= bound)


def test_symmetric_init_has_pass_through_filter(tiny_cfg):
    params = init_params(tiny_cfg, np.random.default_rng(0), filter_noise=0.0)
    assert_array_equal(params['fa.filter.re'], 1.0)
    assert_array_equal(params['fa.filter.im'], 0.0)


def test_positional_encoding_values():
    table = positional_encoding(6, 4)
    assert table.shape == (6, 4)
    assert_allclose(table[0], [0.0, 1.0, 0.0, 1.0])
    assert_allclose(table[:, 0], np.sin(np.arange(6)))
    assert_allclose(table[3, 2], np.sin(3 / 100.0))


def test_positional_encoding_odd_width():
    table = positional_encoding(5, 3)
    assert table.shape == (5, 3)
    assert_allclose(table[:, 2], np.sin(np.arange(5) / 10000 ** (2 / 3)))


def test_forward_shapes_and_distributions(small_cfg):
    params = init_params(small_cfg, np.random.default_rng(1))
    result = forward(_series(small_cfg), params, small_cfg)
    n, t = small_cfg.n_nodes, small_cfg.n_points
    assert result.x_hat.shape == (n, t)
    assert result.a.shape == (n, n)
    assert len(result.maps.heads) == small_cfg.n_heads
    for head in result.maps.heads:
        assert head.shape == (t, n, n)
        assert_allclose(head.sum(axis=-1), 1.0, atol=1e-12)
    assert np.all(result.a.data > 0)
    assert_allclose(result.a.data.sum(axis=1), 1.0, atol=1e-12)
    assert np.isfinite(result.loss.item())


def test_forward_rejects_wrong_input_shape(small_cfg):
    params = init_params(small_cfg, np.random.default_rng(1))
    with pytest.raises(ShapeError):
        forward(np.zeros((small_cfg.n_nodes + 1, small_cfg.n_points)), params, small_cfg)


def test_eval_mode_is_deterministic_and_train_mode_uses_rng(small_cfg):
    params = init_params(small_cfg, np.random.default_rng(2))
    x = _series(small_cfg)
    first = forward(x, params, small_cfg, 'eval').x_hat.data
    assert_array_equal(first, forward(x, params, small_cfg, 'eval').x_hat.data)
    train_a = forward(x, params, small_cfg, 'train', np.random.default_rng(5)).x_hat.data
    train_b = forward(x, params, small_cfg, 'train', np.random.default_rng(5)).x_hat.data
    train_c = forward(x, params, small_cfg, 'train', np.random.default_rng(6)).x_hat.data
    assert_array_equal(train_a, train_b)
    assert not np.array_equal(train_a, train_c)
    with pytest.raises(ConfigError):
        forward(x, params, small_cfg, 'train')


def test_loss_adds_sparsity_of_row_stochastic_a(small_cfg):
    params = init_params(small_cfg, np.random.default_rng(3))
    x = _series(small_cfg)
    result = forward(x, params, small_cfg)
    plain = loss(x, result.x_hat, result.a, 0.0).item()
    assert_allclose(plain, np.sum((x - result.x_hat.data) ** 2))
    penalised = loss(x, result.x_hat, result.a, 0.5).item()
    assert_allclose(penalised - plain, 0.5 * small_cfg.n_nodes, rtol=1e-10)


def test_loss_checks_shapes():
    with pytest.raises(ShapeError):
        loss(np.zeros((2, 3)), Tensor(np.zeros((3, 2))), Tensor(np.eye(2)), 0.1)


def test_stages_are_recorded(tiny_cfg):
    params = init_params(tiny_cfg, np.random.default_rng(0))
    stages = {}
    forward(_series(tiny_cfg), params, tiny_cfg, stages=stages)
    for key in ('embed', 'fa.spectral', 'fa.residual', 'fa', 'ta.head0.attention', 'ta.concat', 'ta',
                'sfa.a', 'sfa.mixed', 'fa.ffn.pre', 'ta.ffn.pre', 'sfa.ffn.pre'):
        assert key in stages
    assert stages['fa'].shape == (tiny_cfg.n_points, tiny_cfg.n_nodes, tiny_cfg.embed_dim)
    assert stages['ta'].shape == (tiny_cfg.n_nodes, tiny_cfg.n_points, tiny_cfg.embed_dim)


def test_variants_skip_blocks(tiny_cfg):
    params = init_params(tiny_cfg, np.random.default_rng(0))
    x = _series(tiny_cfg)

    stages = {}
    forward(x, params, tiny_cfg.with_variant('no-fa'), stages=stages)
    assert 'fa.spectral' not in stages
    assert_array_equal(stages['fa'].data, stages['embed'].data)

    stages = {}
    forward(x, params, tiny_cfg.with_variant('no-ta'), stages=stages)
    assert 'ta.concat' not in stages
    assert_array_equal(stages['ta'].data, np.transpose(stages['fa'].data, (1, 0, 2)))

    stages = {}
    forward(x, params, tiny_cfg.with_variant('no-add-norm'), stages=stages)
    assert_array_equal(stages['fa.residual'].data, stages['fa.spectral'].data)


@pytest.mark.parametrize("variant", sorted(ABLATION_VARIANTS))
def test_every_variant_gives_row_stochastic_a(tiny_cfg, variant):
    cfg = tiny_cfg.with_variant(variant)
    result = forward(_series(cfg), init_params(cfg, np.random.default_rng(1)), cfg)
    assert_allclose(result.a.data.sum(axis=1), 1.0, atol=1e-12)


def test_check_parameters_names_first_problem(tiny_cfg):
    params = init_params(tiny_cfg, np.random.default_rng(0))
    check_parameters(params, tiny_cfg)

    missing = ParameterStore()
    for name, array in params.items():
        if name != 'ta.wc':
            missing.add(name, array)
    with pytest.raises(DataError, match='ta.wc'):
        check_parameters(missing, tiny_cfg)

    extra = params.copy()
    extra.add('decoder.kernel', np.zeros(2))
    with pytest.raises(DataError, match='decoder.kernel'):
        check_parameters(extra, tiny_cfg)

    other = ModelConfig(n_nodes=4, n_points=8, embed_dim=4, n_heads=2)
    with pytest.raises(DataError, match='fa.filter.re'):
        check_parameters(params, other)


def test_extract_ec_averages_subjects(tiny_cfg):
    params = init_params(tiny_cfg, np.random.default_rng(0))
    subjects = [_series(tiny_cfg, seed) for seed in range(3)]
    ec = extract_ec(TimeSeriesDataset(subjects), params, tiny_cfg)
    manual = np.mean([forward(s, params, tiny_cfg).a.data for s in subjects], axis=0)
    assert_allclose(ec.values, manual / manual.sum(axis=1, keepdims=True), atol=1e-14)
    assert_allclose(ec.row_sums(), 1.0, atol=1e-12)
    assert ec.n_nodes == 3
    with pytest.raises(DataError):
        extract_ec([], params, tiny_cfg)


def _np_softmax(scores):
    e = np.exp(scores - scores.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _np_layer_norm(x, scale, shift, eps=1e-5):
    centered = x - x.mean(axis=-1, keepdims=True)
    return centered / np.sqrt((centered ** 2).mean(axis=-1, keepdims=True) + eps) * scale + shift


def _np_feed_forward(x, p, ffn, norm):
    hidden = np.maximum(x @ p[f'{ffn}.w1'] + p[f'{ffn}.b1'], 0.0)
    return _np_layer_norm(hidden @ p[f'{ffn}.w2'] + p[f'{ffn}.b2'] + x, p[f'{norm}.scale'], p[f'{norm}.shift'])


def test_embed_of_zero_input_is_positional_encoding(tiny_cfg):
    params = init_params(tiny_cfg, np.random.default_rng(0))
    params.assign('embed.kernel', np.zeros((1, tiny_cfg.embed_dim)))
    params.assign('embed.bias', np.zeros(tiny_cfg.embed_dim))
    out = embed_and_encode(np.zeros((tiny_cfg.n_nodes, tiny_cfg.n_points)), tiny_cfg, params).data
    table = positional_encoding(tiny_cfg.n_points, tiny_cfg.embed_dim)
    expected = np.broadcast_to(table[:, None, :], (tiny_cfg.n_points, tiny_cfg.n_nodes, tiny_cfg.embed_dim))
    assert_array_equal(out, expected)


def test_fourier_attention_matches_step_by_step_reference(tiny_cfg):
    params = init_params(tiny_cfg, np.random.default_rng(3), filter_noise=0.3)
    xs = np.random.default_rng(4).standard_normal((tiny_cfg.n_points, tiny_cfg.n_nodes, tiny_cfg.embed_dim))
    tensors = as_parameter_tensors(params)
    out = fourier_attention(Tensor(xs), model_filter(tensors, tiny_cfg.n_points), params, tiny_cfg).data

    p = dict(params.items())
    response = p['fa.filter.re'] + 1j * p['fa.filter.im']
    filtered = np.fft.irfft(np.fft.rfft(xs, axis=0) * response, n=tiny_cfg.n_points, axis=0)
    inner = _np_layer_norm(filtered + xs, p['fa.norm1.scale'], p['fa.norm1.shift'])
    assert_allclose(out, _np_feed_forward(inner, p, 'fa.ffn', 'fa.norm2'), atol=1e-10)


def test_temporal_attention_matches_hand_computation():
    cfg = ModelConfig(n_nodes=2, n_points=3, embed_dim=4, n_heads=2, dropout_rate=0.0)
    params = init_params(cfg, np.random.default_rng(5))
    xp = np.random.default_rng(6).standard_normal((3, 2, 4))
    stages = {}
    out = temporal_attention(Tensor(xp), params, cfg, stages=stages).data

    p = dict(params.items())
    by_node = np.transpose(xp, (1, 0, 2))
    heads = []
    for h in range(2):
        part = by_node[..., 2 * h:2 * h + 2]
        q = part @ p[f'ta.head{h}.wq'] + p[f'ta.head{h}.bq']
        k = part @ p[f'ta.head{h}.wk'] + p[f'ta.head{h}.bk']
        v = part @ p[f'ta.head{h}.wv'] + p[f'ta.head{h}.bv']
        weights = _np_softmax(q @ np.swapaxes(k, -1, -2) / np.sqrt(2.0))
        assert_allclose(stages[f'ta.head{h}.attention'].data, weights, atol=1e-12)
        heads.append(weights @ v)
    joined = np.concatenate(heads, axis=-1) @ p['ta.wc']
    assert out.shape == (2, 3, 4)
    assert_allclose(out, _np_feed_forward(joined, p, 'ta.ffn', 'ta.norm'), atol=1e-12)


def test_fusion_with_constant_queries_and_keys_gives_uniform_a(small_cfg):
    cfg = replace(small_cfg, dropout_rate=0.0)
    params = init_params(cfg, np.random.default_rng(7))
    d = cfg.head_dim
    for h in range(cfg.n_heads):
        for name in ('wq', 'wk'):
            params.assign(f'sfa.head{h}.{name}', np.zeros((d, d)))
        for name in ('bq', 'bk'):
            params.assign(f'sfa.head{h}.{name}', np.zeros(d))
    rng = np.random.default_rng(8)
    xp = rng.standard_normal((cfg.n_points, cfg.n_nodes, cfg.embed_dim))
    z_t = rng.standard_normal((cfg.n_nodes, cfg.n_points, cfg.embed_dim))
    stages = {}
    _, maps, a = fusion_attention(Tensor(xp), Tensor(z_t), params, cfg, stages=stages)
    assert_allclose(a.data, np.full((cfg.n_nodes, cfg.n_nodes), 1.0 / cfg.n_nodes), atol=1e-14)
    for head in maps.heads:
        assert_allclose(head, 1.0 / cfg.n_nodes, atol=1e-14)
    mixed = np.broadcast_to(z_t.mean(axis=0), z_t.shape)
    assert_allclose(stages['sfa.mixed'].data, mixed, atol=1e-12)


def test_readout_selector_zero_and_dense_kernels(tiny_cfg):
    params = init_params(tiny_cfg, np.random.default_rng(9))
    recon = np.random.default_rng(10).standard_normal((tiny_cfg.n_nodes, tiny_cfg.n_points, tiny_cfg.embed_dim))

    selector = np.zeros((tiny_cfg.embed_dim, 1))
    selector[2, 0] = 1.0
    params.assign('readout.kernel', selector)
    params.assign('readout.bias', np.zeros(1))
    assert_array_equal(readout(Tensor(recon), params).data, recon[..., 2])

    params.assign('readout.kernel', np.zeros((tiny_cfg.embed_dim, 1)))
    params.assign('readout.bias', np.array([0.7]))
    assert_array_equal(readout(Tensor(recon), params).data, np.full((tiny_cfg.n_nodes, tiny_cfg.n_points), 0.7))

    kernel = np.random.default_rng(11).standard_normal((tiny_cfg.embed_dim, 1))
    params.assign('readout.kernel', kernel)
    params.assign('readout.bias', np.array([-0.2]))
    assert_allclose(readout(Tensor(recon), params).data, (recon @ kernel)[..., 0] - 0.2, atol=1e-12)


def test_forward_loss_matches_stage_by_stage_oracle(tiny_cfg):
    params = init_params(tiny_cfg, np.random.default_rng(12))
    x = _series(tiny_cfg, seed=13)
    stages = {}
    result = forward(x, params, tiny_cfg, stages=stages)

    p = dict(params.items())
    recon = _np_feed_forward(stages['sfa.mixed'].data, p, 'sfa.ffn', 'sfa.norm')
    x_hat = (recon @ p['readout.kernel'])[..., 0] + p['readout.bias'][0]
    a = stages['sfa.a'].data
    assert_allclose(result.x_hat.data, x_hat, atol=1e-12)
    expected = np.sum((x - x_hat) ** 2) + tiny_cfg.sparsity_weight * np.sum(np.abs(a))
    assert_allclose(result.loss.item(), expected, rtol=1e-12)
