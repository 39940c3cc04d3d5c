"""End-to-end criteria: transform equivalence, gradients, structural invariants, metrics, reproducibility"""
import itertools
import json
import os
import statistics
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose

from cli import EXIT_OK, group_label, main
from data import GroundTruthGraph
from evaluation import BinaryGraph, adaptive_threshold, binarize, compute_metrics
from file_manager import FileManager
from model import ModelConfig, forward, init_params
from numerics import ComputationRecord, Tensor, backward, grad_check
from spectral import (SpectralFilter, apply_filter, cyclic_convolve, dft_naive, fft_real, filter_to_kernel,
                      ifft_real, n_bins, pin_mask, pinned_bins)
from training import OptimizerConfig, evaluate_ec, train

EXTERNAL_ENV = 'FSTA_EXTERNAL_SIM1'


def test_spectral_filtering_equals_cyclic_convolution():
    rng = np.random.default_rng(2024)
    lengths = (4, 5, 8, 16, 500)
    worst = 0.0
    for trial in range(200):
        length = lengths[trial % len(lengths)]
        nodes, width = int(rng.integers(1, 4)), int(rng.integers(1, 5))
        shape = (n_bins(length), nodes, width)
        filt = SpectralFilter(Tensor(rng.standard_normal(shape)),
                              Tensor(rng.standard_normal(shape) * pin_mask(length, shape)))
        x = rng.standard_normal((length, nodes, width))
        via_fft = ifft_real(apply_filter(fft_real(x), filt), length).data
        via_conv = cyclic_convolve(filter_to_kernel(filt, length), x).data
        worst = max(worst, float(np.max(np.abs(via_fft - via_conv))))
    assert worst < 1e-10


def test_fft_matches_naive_dft_up_to_512():
    rng = np.random.default_rng(7)
    for length in range(1, 513):
        x = rng.standard_normal((length, 2))
        spec = fft_real(x)
        expected = dft_naive(x)[: n_bins(length)]
        scale = max(1.0, float(np.max(np.abs(expected))))
        assert np.max(np.abs(spec.to_complex() - expected)) < 1e-9 * scale, length
        weights = np.full(n_bins(length), 2.0)
        weights[list(pinned_bins(length))] = 1.0
        energy = np.sum(weights[:, None] * np.abs(spec.to_complex()) ** 2) / length
        assert_allclose(energy, np.sum(x * x), rtol=1e-10)


def _kink_free_params(cfg, x, margin=5e-4):
    """A seed whose feed-forward pre-activations all stay clear of the ReLU kink"""
    for seed in range(500):
        params = init_params(cfg, np.random.default_rng(seed), filter_noise=0.1)
        stages = {}
        forward(x, params, cfg, 'eval', stages=stages)
        if all(np.min(np.abs(value.data)) > margin for key, value in stages.items() if key.endswith('.pre')):
            return params
    pytest.fail("no seed keeps every pre-activation away from zero")


def test_full_model_gradient_matches_finite_differences(tiny_cfg):
    x = 0.5 * np.random.default_rng(11).standard_normal((tiny_cfg.n_nodes, tiny_cfg.n_points))
    params = _kink_free_params(tiny_cfg, x)

    def f(tensors):
        return forward(x, tensors, tiny_cfg, 'eval').loss

    assert grad_check(f, params, h=1e-5, abs_floor=1e-7) < 1e-4


def test_structural_invariants_over_random_inputs():
    cfg = ModelConfig(n_nodes=4, n_points=12, embed_dim=8, n_heads=2)
    rng = np.random.default_rng(5)
    for trial in range(100):
        params = init_params(cfg, np.random.default_rng(trial))
        x = rng.standard_normal((cfg.n_nodes, cfg.n_points)) * rng.uniform(0.1, 10.0)
        result = forward(x, params, cfg, 'eval')
        assert result.x_hat.shape == (4, 12)
        assert np.all(result.a.data > 0)
        assert_allclose(result.a.data.sum(axis=1), 1.0, atol=1e-6)
        for head in result.maps.heads:
            assert_allclose(head.sum(axis=-1), 1.0, atol=1e-6)


def test_node_permutation_equivariance_at_symmetric_init():
    cfg = ModelConfig(n_nodes=5, n_points=16, embed_dim=8, n_heads=2)
    params = init_params(cfg, np.random.default_rng(0), filter_noise=0.0)
    x = np.random.default_rng(1).standard_normal((5, 16))
    perm = np.array([3, 0, 4, 1, 2])
    base = forward(x, params, cfg)
    permuted = forward(x[perm], params, cfg)
    assert_allclose(permuted.x_hat.data, base.x_hat.data[perm], atol=1e-8)
    assert_allclose(permuted.a.data, base.a.data[np.ix_(perm, perm)], atol=1e-8)


def _brute_force(pred, truth):
    counts = {'tp': 0, 'fp': 0, 'tn': 0, 'fn': 0}
    n = pred.shape[0]
    for i in range(n):
        for j in range(n):
            if pred[i, j] and truth[i, j]:
                counts['tp'] += 1
            elif pred[i, j]:
                counts['fp'] += 1
            elif truth[i, j]:
                counts['fn'] += 1
            else:
                counts['tn'] += 1
    return counts


def _all_graphs(n):
    cells = [(i, j) for i in range(n) for j in range(n) if i != j]
    for bits in itertools.product((0, 1), repeat=len(cells)):
        graph = np.zeros((n, n), dtype=np.int64)
        for (i, j), bit in zip(cells, bits):
            graph[i, j] = bit
        yield graph


def test_metrics_against_brute_force_on_every_three_node_pair():
    graphs = list(_all_graphs(3))
    assert len(graphs) == 64
    for pred, truth in itertools.product(graphs, repeat=2):
        report = compute_metrics(BinaryGraph(pred), GroundTruthGraph(truth))
        counts = _brute_force(pred, truth)
        assert (report.tp, report.fp, report.tn, report.fn) == (counts['tp'], counts['fp'], counts['tn'],
                                                                 counts['fn'])
        assert report.shd == counts['fp'] + counts['fn']
        assert report.accuracy_fraction == 1 - Fraction(report.shd, 9)
        precision = Fraction(counts['tp'], counts['tp'] + counts['fp']) if counts['tp'] + counts['fp'] else 0
        recall = Fraction(counts['tp'], counts['tp'] + counts['fn']) if counts['tp'] + counts['fn'] else 0
        assert report.precision == pytest.approx(float(precision))
        assert report.recall == pytest.approx(float(recall))
        if precision + recall:
            assert report.f1 == pytest.approx(float(2 * precision * recall / (precision + recall)))
        else:
            assert report.f1 == 0.0


@pytest.mark.parametrize("accuracy, shd, nodes", [
    (0.89, 2.70, 5),
    (0.91, 2.20, 5),
    (0.88, 2.95, 5),
    (0.88, 11.85, 10),
])
def test_reported_accuracy_matches_shd_identity(accuracy, shd, nodes):
    assert abs((1 - shd / nodes ** 2) - accuracy) <= 0.01
    # the same identity holds exactly for any single prediction on that many nodes
    rng = np.random.default_rng(nodes)
    truth = np.zeros((nodes, nodes), dtype=np.int64)
    pred = (rng.random((nodes, nodes)) < 0.3).astype(np.int64)
    np.fill_diagonal(pred, 0)
    report = compute_metrics(BinaryGraph(pred), GroundTruthGraph(truth))
    assert report.accuracy == pytest.approx(1 - report.shd / nodes ** 2)


def _pipeline(root: Path):
    data, checkpoint = root / 'data', root / 'model.ckpt'
    ec, metrics = root / 'ec.json', root / 'metrics.json'
    assert main(['gen', '--subjects', '3', '--points', '16', '--seed', '9', '--out', str(data)]) == EXIT_OK
    assert main(['train', '--data', str(data), '--out', str(checkpoint), '--epochs', '2', '--batch', '2',
                 '--embed', '4', '--seed', '4']) == EXIT_OK
    assert main(['estimate', '--data', str(data), '--checkpoint', str(checkpoint), '--out', str(ec)]) == EXIT_OK
    assert main(['eval', '--pred', str(ec), '--truth', str(data), '--out', str(metrics)]) == EXIT_OK
    artifacts = {path.relative_to(root).as_posix(): path.read_bytes()
                 for path in sorted(root.rglob('*')) if path.is_file() and not path.name.endswith('.run.json')}
    report = json.loads(artifacts.pop('model.report.json'))
    report.pop('seconds')
    report.pop('epoch_seconds')
    return artifacts, report


def test_pipeline_is_byte_reproducible(tmp_path, quiet_env):
    first, report_a = _pipeline(tmp_path / 'a')
    second, report_b = _pipeline(tmp_path / 'b')
    assert first.keys() == second.keys()
    for name in first:
        assert first[name] == second[name], name
    assert report_a == report_b


def _bench(root: Path, data: Path):
    out = root / 'bench.json'
    assert main(['bench', '--data', str(data), '--runs', '3', '--epochs', '2', '--batch', '2', '--embed', '4',
                 '--out', str(out)]) == EXIT_OK
    return {path.name: path.read_bytes() for path in sorted(root.iterdir())
            if path.is_file() and not path.name.endswith('.run.json')}


def test_bench_runs_are_byte_reproducible(tmp_path, quiet_env):
    data = tmp_path / 'data'
    assert main(['gen', '--subjects', '3', '--points', '16', '--seed', '2', '--out', str(data)]) == EXIT_OK
    first = _bench(tmp_path / 'a', data)
    second = _bench(tmp_path / 'b', data)
    assert 'bench.json' in first
    assert first == second
    runs = json.loads(first['bench.json'])['runs']
    assert len({run['seed'] for run in runs}) == 3


@pytest.mark.slow
def test_desk_scale_recovery_on_sim1(tmp_path, quiet_env):
    data, out = tmp_path / 'sim1', tmp_path / 'bench.json'
    assert main(['gen', '--topology', 'sim1', '--out', str(data)]) == EXIT_OK
    assert main(['bench', '--data', str(data), '--runs', '5', '--eta', '0.5', '--out', str(out)]) == EXIT_OK
    summary = json.loads(out.read_text())['groups'][group_label(2, 'default', 0.5)]['summary']
    assert summary['f1']['mean'] >= 0.60
    assert summary['shd']['mean'] <= 5.0


@pytest.mark.slow
@pytest.mark.skipif(not os.environ.get(EXTERNAL_ENV), reason=f"set {EXTERNAL_ENV} to a Sim1 dataset directory")
def test_external_sim1_dataset():
    dataset = FileManager().load_dataset(os.environ[EXTERNAL_ENV])
    assert dataset.truth is not None
    model_cfg = ModelConfig(n_nodes=dataset.n_nodes, n_points=dataset.n_points)
    params, _ = train(dataset, model_cfg, OptimizerConfig())
    ec = evaluate_ec(dataset, params, model_cfg)
    report = compute_metrics(binarize(ec, adaptive_threshold(ec, 0.5)), dataset.truth)
    assert abs(report.f1 - 0.77) <= 0.15
    assert abs(report.accuracy - 0.89) <= 0.10


@pytest.mark.slow
def test_default_training_step_fits_desk_budget():
    cfg = ModelConfig(n_nodes=5, n_points=500)
    opt = OptimizerConfig()
    rng = np.random.default_rng(0)
    params = init_params(cfg, rng)
    x = rng.standard_normal((cfg.n_nodes, cfg.n_points))
    timings = []
    for _ in range(5):
        started = time.perf_counter()
        record = ComputationRecord()
        result = forward(x, record.watch_store(params), cfg, 'train', rng)
        backward(result.loss, record)
        timings.append(time.perf_counter() - started)
    # 60 个被试 × 300 轮
    assert statistics.median(timings) * 60 * opt.epochs < 1800.0
