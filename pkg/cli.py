# Copyright: (c) OpenChiip Organization. https://github.com/OpenChiip/Chiip
# Copyright: (c) <aigc@openchiip.com>

"""
命令行界面模块

子命令：gen → train → estimate → eval，以及多种子基准测试 bench 和查看配置的 config。
退出码：0 成功，2 参数或配置错误，3 数据或形状错误，4 数值计算失败。
"""
import argparse
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from rich.console import Console
from rich.table import Table

from config import Config, load_config
from data import GeneratorConfig, GroundTruthGraph, TimeSeriesDataset, generate_var_dataset
from evaluation import (METRIC_NAMES, BinaryGraph, MetricsReport, ThresholdConfig, adaptive_threshold,
                        aggregate_runs, binarize, compute_metrics, metric_samples, welch_t_test)
from file_manager import TRUTH_FILE, FileManager
from model import ABLATION_VARIANTS, ModelConfig, extract_ec
from project import TOOL_VERSION, RunTracker
from training import OptimizerConfig, evaluate_ec, train
from utils.logger import LoggerContext, setup_logger
from utils.text_processing import format_p_value
from utils.validation import (ConfigError, DataError, NumericalError, ShapeError, parse_float_list,
                              parse_int_list)

logger = logging.getLogger(__name__)
console = Console()

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

# 命令行参数名 → 配置键
GENERATOR_FLAGS = {
    'topology': 'generator.topology',
    'subjects': 'generator.n_subjects',
    'points': 'generator.n_points',
    'snr': 'generator.snr_db',
    'edge_weight': 'generator.edge_weight',
    'self_weight': 'generator.self_weight',
    'radius_cap': 'generator.spectral_radius_cap',
    'burn_in': 'generator.burn_in',
    'seed': 'generator.seed',
    'tr': 'generator.tr_seconds',
    'session': 'generator.session_minutes',
}
TRAINING_FLAGS = {
    'epochs': 'optimizer.epochs',
    'batch': 'optimizer.batch_size',
    'lr': 'optimizer.learning_rate',
    'beta1': 'optimizer.beta1',
    'beta2': 'optimizer.beta2',
    'eps': 'optimizer.eps',
    'seed': 'optimizer.seed',
    'log_every': 'optimizer.log_every',
    'embed': 'model.embed_dim',
    'heads': 'model.n_heads',
    'ffn_dim': 'model.ffn_dim',
    'dropout': 'model.dropout_rate',
    'alpha': 'model.sparsity_weight',
    'filter_noise': 'model.filter_noise',
    'variant': 'model.variant',
}


def _default(key: str) -> Any:
    node: Any = Config.DEFAULT_CONFIG
    for part in key.split('.'):
        node = node[part]
    return node


def _add_common_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', type=str, help='JSON配置文件路径')
    parser.add_argument('--log-level', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], help='日志级别')
    parser.add_argument('--log-file', type=str, help='日志文件路径')
    parser.add_argument('--debug', action='store_true', help='启用调试模式（等同 --log-level DEBUG）')


def _add_training_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group('训练参数')
    group.add_argument('--epochs', type=int, help=f"训练轮数 (默认: {_default('optimizer.epochs')})")
    group.add_argument('--batch', type=int, help=f"批大小 (默认: {_default('optimizer.batch_size')})")
    group.add_argument('--lr', type=float, help=f"学习率 (默认: {_default('optimizer.learning_rate')})")
    group.add_argument('--beta1', type=float, help=f"Adam β1 (默认: {_default('optimizer.beta1')})")
    group.add_argument('--beta2', type=float, help=f"Adam β2 (默认: {_default('optimizer.beta2')})")
    group.add_argument('--eps', type=float, help=f"Adam eps (默认: {_default('optimizer.eps')})")
    group.add_argument('--seed', type=int, help=f"随机种子 (默认: {_default('optimizer.seed')})")
    group.add_argument('--log-every', type=int, help='每隔多少轮输出一次损失')
    group.add_argument('--embed', type=int, help=f"嵌入维度 D (默认: {_default('model.embed_dim')})")
    group.add_argument('--heads', type=int, help=f"注意力头数 (默认: {_default('model.n_heads')})")
    group.add_argument('--ffn-dim', type=int, help='FFN隐藏维度 (默认: 4·D)')
    group.add_argument('--dropout', type=float, help=f"dropout (默认: {_default('model.dropout_rate')})")
    group.add_argument('--alpha', type=float, help=f"稀疏权重 α (默认: {_default('model.sparsity_weight')})")
    group.add_argument('--filter-noise', type=float, help=f"滤波器初始化扰动 (默认: {_default('model.filter_noise')})")
    group.add_argument('--variant', choices=sorted(ABLATION_VARIANTS), help='模型消融变体 (默认: default)')


def build_parser() -> argparse.ArgumentParser:
    """构造带全部子命令的参数解析器"""
    parser = argparse.ArgumentParser(prog='fsta', description='FSTA-EC - 由多变量时间序列估计有效连接')
    parser.add_argument('--version', action='version', version=f'%(prog)s {TOOL_VERSION}')
    sub = parser.add_subparsers(dest='command', required=True)

    gen = sub.add_parser('gen', help='生成带真实因果图的VAR模拟数据集')
    _add_common_options(gen)
    gen.add_argument('--topology', choices=['sim1', 'sim2', 'sim3', 'sim4', 'custom'], help='拓扑预设 (默认: sim1)')
    gen.add_argument('--truth', type=str, help='custom 拓扑使用的 truth.csv')
    gen.add_argument('--subjects', type=int, help=f"被试数 (默认: {_default('generator.n_subjects')})")
    gen.add_argument('--points', type=int, help=f"每个被试的时间点数 (默认: {_default('generator.n_points')})")
    gen.add_argument('--snr', type=float, help=f"信噪比dB (默认: {_default('generator.snr_db')})")
    gen.add_argument('--edge-weight', type=float, help='边权重')
    gen.add_argument('--self-weight', type=float, help='自回归权重')
    gen.add_argument('--radius-cap', type=float, help='谱半径上限')
    gen.add_argument('--burn-in', type=int, help='丢弃的预热步数')
    gen.add_argument('--seed', type=int, help=f"随机种子 (默认: {_default('generator.seed')})")
    gen.add_argument('--tr', type=float, help='记录在清单中的TR（秒）')
    gen.add_argument('--session', type=float, help='记录在清单中的扫描时长（分钟）')
    gen.add_argument('--out', required=True, help='输出数据集目录')

    tr = sub.add_parser('train', help='训练FSTA网络')
    _add_common_options(tr)
    _add_training_options(tr)
    tr.add_argument('--data', required=True, help='数据集目录')
    tr.add_argument('--out', required=True, help='检查点输出路径')
    tr.add_argument('--report', help='训练摘要JSON路径 (默认: <out>.report.json)')

    est = sub.add_parser('estimate', help='由检查点估计有效连接矩阵')
    _add_common_options(est)
    est.add_argument('--data', required=True, help='数据集目录')
    est.add_argument('--checkpoint', required=True, help='检查点路径')
    est.add_argument('--eta', type=float, help=f"阈值参数 η (默认: {_default('threshold.eta')})")
    est.add_argument('--out', required=True, help='输出JSON路径')

    ev = sub.add_parser('eval', help='与真实因果图比较')
    _add_common_options(ev)
    ev.add_argument('--pred', required=True, help='estimate 输出的JSON')
    ev.add_argument('--truth', required=True, help='truth.csv 或包含它的数据集目录')
    ev.add_argument('--out', required=True, help='输出JSON路径')

    bench = sub.add_parser('bench', help='多种子重复 训练+估计+评估 并汇总')
    _add_common_options(bench)
    _add_training_options(bench)
    bench.add_argument('--data', required=True, help='数据集目录（需要 truth.csv）')
    bench.add_argument('--runs', type=int, help=f"每个配置的运行次数 (默认: {_default('bench.runs')})")
    bench.add_argument('--eta', type=float, help='阈值参数 η')
    bench.add_argument('--eta-grid', type=str, help='η 扫描列表，例如 0.3,0.5,0.7')
    bench.add_argument('--heads-grid', type=str, help='头数扫描列表，例如 1,2,4')
    bench.add_argument('--ablation-grid', type=str, help='消融变体列表，例如 default,no-fa,no-ta')
    bench.add_argument('--compare', type=str, help='另一份 bench 结果JSON，用于Welch t检验')
    bench.add_argument('--out', required=True, help='汇总JSON路径（同时写出 .txt 表格）')

    cfg = sub.add_parser('config', help='显示生效的配置')
    _add_common_options(cfg)
    cfg.add_argument('--save', type=str, help='把生效配置保存到该路径')

    return parser


@dataclass
class BenchJob:
    """一次基准运行所需的全部输入（可跨进程传递）"""
    heads: int
    variant: str
    seed: int
    etas: Tuple[float, ...]
    subjects: List[np.ndarray]
    truth: np.ndarray
    model: Dict[str, Any]
    optimizer: Dict[str, Any]
    filter_noise: float


def group_label(heads: int, variant: str, eta: float) -> str:
    return f"heads={heads} variant={variant} eta={eta:g}"


def run_bench_job(job: BenchJob) -> List[Dict[str, Any]]:
    """
    训练一次并在每个 η 上评估；失败时为每个 η 记录一条失败结果而不抛出
    """
    base = {'heads': job.heads, 'variant': job.variant, 'seed': job.seed}
    try:
        dataset = TimeSeriesDataset(subjects=job.subjects, truth=GroundTruthGraph(job.truth))
        model_cfg = ModelConfig.from_dict(job.model)
        opt_cfg = OptimizerConfig(**job.optimizer)
        with LoggerContext(logging.getLogger('training'), logging.WARNING):
            params, report = train(dataset, model_cfg, opt_cfg, job.filter_noise)
        ec = extract_ec(dataset, params, model_cfg)
    except Exception as e:
        logger.warning(f"种子 {job.seed}（heads={job.heads}, variant={job.variant}）运行失败: {e}")
        return [
            dict(base, group=group_label(job.heads, job.variant, eta), eta=eta, status='failed', error=str(e))
            for eta in job.etas
        ]

    records = []
    for eta in job.etas:
        theta = adaptive_threshold(ec, eta)
        metrics = compute_metrics(binarize(ec, theta), dataset.truth, theta=theta, eta=eta)
        records.append(dict(
            base,
            group=group_label(job.heads, job.variant, eta),
            eta=eta,
            status='ok',
            final_loss=report.final_loss,
            metrics=metrics.to_dict(),
        ))
    return records


class CLI:
    """命令行界面类"""

    def __init__(self, config: Config, file_manager: Optional[FileManager] = None):
        """
        初始化命令行界面

        Args:
            config: 已合并配置文件的配置管理器
            file_manager: 文件管理器
        """
        self.config = config
        self.file_manager = file_manager or FileManager()

    def run(self, args: argparse.Namespace) -> int:
        """执行子命令并把异常转换为退出码"""
        handlers = {
            'gen': self.cmd_gen,
            'train': self.cmd_train,
            'estimate': self.cmd_estimate,
            'eval': self.cmd_eval,
            'bench': self.cmd_bench,
            'config': self.cmd_config,
        }
        try:
            return handlers[args.command](args)
        except ConfigError as e:
            console.print(f"[red]配置错误: {e}[/red]")
            return EXIT_USAGE
        except (ShapeError, DataError) as e:
            console.print(f"[red]数据错误: {e}[/red]")
            return EXIT_DATA
        except NumericalError as e:
            logger.error(f"数值计算失败: {e}", exc_info=args.debug)
            console.print(f"[red]数值计算失败: {e}[/red]")
            return EXIT_NUMERICAL

    def _override(self, args: argparse.Namespace, mapping: Dict[str, str]) -> None:
        self.config.override({key: getattr(args, flag, None) for flag, key in mapping.items()})

    def cmd_gen(self, args: argparse.Namespace) -> int:
        """生成数据集目录并打印清单摘要"""
        self._override(args, GENERATOR_FLAGS)
        topology = self.config.get('generator.topology')
        if args.truth and topology != 'custom':
            raise ConfigError(f"--truth 只能与 --topology custom 一起使用，当前拓扑为 {topology}")
        adjacency = None
        if args.truth:
            adjacency = self.file_manager.read_matrix_csv(args.truth).astype(np.int64)
        gen_cfg = GeneratorConfig.from_config(self.config, adjacency=adjacency)
        tracker = RunTracker('gen', vars(args), seed=gen_cfg.seed, file_manager=self.file_manager)
        if args.truth:
            tracker.add_input(args.truth)

        dataset = generate_var_dataset(gen_cfg)
        target = self.file_manager.save_dataset(dataset, args.out)
        tracker.add_output(target)
        tracker.finish()

        table = Table(title=f"数据集 {target}", show_header=True)
        table.add_column("项目")
        table.add_column("值")
        table.add_row("拓扑", gen_cfg.topology)
        table.add_row("节点数", str(dataset.n_nodes))
        table.add_row("边数", str(dataset.truth.n_edges))
        table.add_row("被试数", str(dataset.n_subjects))
        table.add_row("时间点数", str(dataset.n_points))
        table.add_row("信噪比(dB)", f"{gen_cfg.snr_db:g}")
        table.add_row("种子", str(gen_cfg.seed))
        console.print(table)
        return EXIT_OK

    def _model_and_optimizer(self, args: argparse.Namespace,
                             dataset: TimeSeriesDataset) -> Tuple[ModelConfig, OptimizerConfig, float]:
        self._override(args, TRAINING_FLAGS)
        model_cfg = ModelConfig.from_config(self.config, dataset.n_nodes, dataset.n_points)
        opt_cfg = OptimizerConfig.from_config(self.config)
        return model_cfg, opt_cfg, float(self.config.get('model.filter_noise', 0.01))

    def cmd_train(self, args: argparse.Namespace) -> int:
        """训练并写出检查点与训练摘要"""
        dataset = self.file_manager.load_dataset(args.data)
        model_cfg, opt_cfg, filter_noise = self._model_and_optimizer(args, dataset)
        tracker = RunTracker('train', vars(args), seed=opt_cfg.seed, file_manager=self.file_manager)
        tracker.add_input(args.data)

        params, report = train(dataset, model_cfg, opt_cfg, filter_noise)
        checkpoint = self.file_manager.save_checkpoint(args.out, params, model_cfg.to_dict())
        report_path = Path(args.report) if args.report else Path(args.out).with_suffix('.report.json')
        self.file_manager.write_json(report_path, report.to_dict())
        tracker.add_output(checkpoint)
        tracker.add_output(report_path)
        tracker.finish()

        console.print(f"[green]训练完成[/green]：最终损失 {report.final_loss:.6f}，检查点 {checkpoint}，摘要 {report_path}")
        return EXIT_OK

    def _load_model(self, checkpoint_path: str):
        params, stored = self.file_manager.load_checkpoint(checkpoint_path)
        if not stored:
            raise ConfigError(f"检查点 {checkpoint_path} 没有随附模型配置")
        return params, ModelConfig.from_dict(stored)

    def cmd_estimate(self, args: argparse.Namespace) -> int:
        """估计有效连接矩阵并按 η 二值化"""
        self.config.override({'threshold.eta': args.eta})
        threshold = ThresholdConfig.from_config(self.config)
        dataset = self.file_manager.load_dataset(args.data)
        params, model_cfg = self._load_model(args.checkpoint)
        tracker = RunTracker('estimate', vars(args), file_manager=self.file_manager)
        tracker.add_input(args.data)
        tracker.add_input(args.checkpoint)

        ec = evaluate_ec(dataset, params, model_cfg)
        theta = adaptive_threshold(ec, threshold.eta)
        graph = binarize(ec, theta)
        out = self.file_manager.write_json(args.out, {
            'a': ec.to_list(),
            'theta': theta,
            'eta': threshold.eta,
            'binary': graph.adjacency.tolist(),
        })
        tracker.add_output(out)
        tracker.finish()

        table = Table(title=f"有效连接 A（θ={theta:.4f}，η={threshold.eta:g}）", show_header=True)
        table.add_column("目标\\来源")
        for j in range(ec.n_nodes):
            table.add_column(f"n{j}", justify="right")
        for i, row in enumerate(ec.values):
            cells = [f"[bold]{v:.3f}[/bold]" if graph.adjacency[i, j] else f"{v:.3f}" for j, v in enumerate(row)]
            table.add_row(f"n{i}", *cells)
        console.print(table)
        return EXIT_OK

    def _load_truth(self, path: str) -> GroundTruthGraph:
        truth_path = Path(path)
        if truth_path.is_dir():
            truth_path = truth_path / TRUTH_FILE
        matrix = self.file_manager.read_matrix_csv(truth_path)
        return GroundTruthGraph(matrix.astype(np.int64))

    def cmd_eval(self, args: argparse.Namespace) -> int:
        """比较预测图与真实图并写出指标"""
        prediction = self.file_manager.read_json(args.pred)
        if not isinstance(prediction, dict) or 'binary' not in prediction:
            raise DataError(f"{args.pred} 缺少 binary 字段")
        pred = BinaryGraph(np.array(prediction['binary'], dtype=np.int64))
        truth = self._load_truth(args.truth)
        tracker = RunTracker('eval', vars(args), file_manager=self.file_manager)
        tracker.add_input(args.pred)
        tracker.add_input(args.truth)

        report = compute_metrics(pred, truth, theta=prediction.get('theta'), eta=prediction.get('eta'))
        out = self.file_manager.write_json(args.out, report.to_dict())
        tracker.add_output(out)
        tracker.finish()

        table = Table(title="评估结果", show_header=True)
        for name in ('TP', 'FP', 'TN', 'FN', 'Precision', 'Recall', 'F1', 'Accuracy', 'SHD'):
            table.add_column(name, justify="right")
        table.add_row(
            str(report.tp), str(report.fp), str(report.tn), str(report.fn),
            f"{report.precision:.4f}", f"{report.recall:.4f}", f"{report.f1:.4f}",
            f"{report.accuracy:.4f}", str(report.shd),
        )
        console.print(table)
        return EXIT_OK

    def _bench_jobs(self, args: argparse.Namespace, dataset: TimeSeriesDataset) -> List[BenchJob]:
        model_cfg, opt_cfg, filter_noise = self._model_and_optimizer(args, dataset)
        self.config.override({'bench.runs': args.runs, 'threshold.eta': args.eta})
        runs = int(self.config.get('bench.runs'))
        if runs < 1:
            raise ConfigError(f"--runs 必须 >= 1，当前为 {runs}")
        if args.eta_grid:
            etas = parse_float_list(args.eta_grid, '--eta-grid')
        else:
            etas = (ThresholdConfig.from_config(self.config).eta,)
        for eta in etas:
            ThresholdConfig(eta)
        heads_grid = parse_int_list(args.heads_grid, '--heads-grid') if args.heads_grid else (model_cfg.n_heads,)
        variants = self._variants(args)

        jobs = []
        for heads in heads_grid:
            for variant in variants:
                # 在主进程中先构造一次，非法组合（如 D 不能被头数整除）直接报配置错误
                job_model = ModelConfig.from_dict(dict(model_cfg.to_dict(), n_heads=heads)).with_variant(variant)
                for i in range(runs):
                    job_opt = dict(opt_cfg.to_dict(), seed=opt_cfg.seed + i)
                    jobs.append(BenchJob(
                        heads=heads, variant=variant, seed=opt_cfg.seed + i, etas=tuple(etas),
                        subjects=dataset.subjects, truth=dataset.truth.adjacency,
                        model=job_model.to_dict(), optimizer=job_opt, filter_noise=filter_noise,
                    ))
        return jobs

    def _variants(self, args: argparse.Namespace) -> Tuple[str, ...]:
        if not args.ablation_grid:
            return (self.config.get('model.variant', 'default'),)
        variants = tuple(item.strip() for item in args.ablation_grid.split(',') if item.strip())
        unknown = [v for v in variants if v not in ABLATION_VARIANTS]
        if unknown or not variants:
            raise ConfigError(f"未知的消融变体: {', '.join(unknown) or args.ablation_grid}")
        return variants

    def cmd_bench(self, args: argparse.Namespace) -> int:
        """多种子重复实验，输出 mean±std 汇总，可选与另一份结果做Welch t检验"""
        dataset = self.file_manager.load_dataset(args.data)
        if dataset.truth is None:
            raise DataError(f"{args.data} 缺少 {TRUTH_FILE}，无法评估")
        jobs = self._bench_jobs(args, dataset)
        threads = int(self.config.get('bench.threads', 1))
        tracker = RunTracker('bench', vars(args), seed=jobs[0].seed, file_manager=self.file_manager)
        tracker.add_input(args.data)
        logger.info(f"基准测试：{len(jobs)} 次训练，并行度 {threads}")

        if threads > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
                results = list(pool.map(run_bench_job, jobs))
        else:
            results = [run_bench_job(job) for job in jobs]
        runs = [record for records in results for record in records]

        groups = self._aggregate(runs)
        payload: Dict[str, Any] = {'runs': runs, 'groups': groups, 'version': TOOL_VERSION}
        if args.compare:
            tracker.add_input(args.compare)
            payload['comparison'] = self._compare(runs, self.file_manager.read_json(args.compare))

        out = self.file_manager.write_json(args.out, payload)
        table = self._bench_table(groups, payload.get('comparison'))
        text_path = Path(args.out).with_suffix('.txt')
        recorder = Console(record=True, width=140, file=io.StringIO())
        recorder.print(table)
        self.file_manager.write_text(text_path, recorder.export_text())
        tracker.add_output(out)
        tracker.add_output(text_path)
        tracker.finish()
        console.print(table)

        if not any(record['status'] == 'ok' for record in runs):
            console.print("[red]所有运行均失败[/red]")
            return EXIT_NUMERICAL
        return EXIT_OK

    def _aggregate(self, runs: List[Dict[str, Any]]) -> Dict[str, Any]:
        groups: Dict[str, Any] = {}
        for record in runs:
            entry = groups.setdefault(record['group'], {
                'heads': record['heads'], 'variant': record['variant'], 'eta': record['eta'],
                'n_ok': 0, 'n_failed': 0, 'reports': [],
            })
            if record['status'] == 'ok':
                entry['n_ok'] += 1
                entry['reports'].append(MetricsReport.from_dict(record['metrics']))
            else:
                entry['n_failed'] += 1
        for entry in groups.values():
            reports = entry.pop('reports')
            if reports:
                entry['summary'] = {name: s.to_dict() for name, s in aggregate_runs(reports).items()}
            else:
                entry['summary'] = None
        return groups

    def _compare(self, runs: List[Dict[str, Any]], other: Any) -> Dict[str, Any]:
        if not isinstance(other, dict) or 'runs' not in other:
            raise DataError("--compare 文件不是 bench 结果")
        ours = _reports_by_group(runs)
        theirs = _reports_by_group(other['runs'])
        pairs = [(label, label) for label in ours if label in theirs]
        if not pairs and len(ours) == 1 and len(theirs) == 1:
            pairs = [(next(iter(ours)), next(iter(theirs)))]
        comparison: Dict[str, Any] = {}
        for mine, other_label in pairs:
            p_values: Dict[str, Optional[float]] = {}
            for name in METRIC_NAMES:
                try:
                    p_values[name] = welch_t_test(metric_samples(ours[mine], name),
                                                  metric_samples(theirs[other_label], name))
                except DataError as e:
                    logger.warning(f"{mine} 的 {name} 无法做t检验: {e}")
                    p_values[name] = None
            comparison[mine] = p_values
        return comparison

    def _bench_table(self, groups: Dict[str, Any], comparison: Optional[Dict[str, Any]]) -> Table:
        table = Table(title="基准测试汇总（mean±std）", show_header=True)
        table.add_column("配置")
        for name in ('Precision', 'Recall', 'F1', 'Accuracy', 'SHD'):
            table.add_column(name, justify="right")
        table.add_column("成功/失败", justify="right")
        for label, entry in groups.items():
            counts = f"{entry['n_ok']}/{entry['n_failed']}"
            if entry['summary'] is None:
                table.add_row(label, *(['-'] * len(METRIC_NAMES)), counts)
                continue
            row = [entry['summary'][name]['text'] for name in METRIC_NAMES]
            table.add_row(label, *row, counts)
            if comparison and label in comparison:
                cells = ['-' if p is None else format_p_value(p) for p in comparison[label].values()]
                table.add_row("  p值", *cells, "")
        return table

    def cmd_config(self, args: argparse.Namespace) -> int:
        """显示当前配置"""
        table = Table(title="当前配置", show_header=True)
        table.add_column("配置项")
        table.add_column("值")
        for key, value in self.config.flatten().items():
            table.add_row(key, str(value))
        console.print(table)
        if args.save:
            self.config.save(args.save)
            console.print(f"[green]已保存配置到 {args.save}[/green]")
        return EXIT_OK


def _reports_by_group(runs: Sequence[Dict[str, Any]]) -> Dict[str, List[MetricsReport]]:
    grouped: Dict[str, List[MetricsReport]] = {}
    for record in runs:
        if record.get('status') == 'ok':
            grouped.setdefault(record['group'], []).append(MetricsReport.from_dict(record['metrics']))
    return grouped


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    命令行主函数

    Args:
        argv: 参数列表，默认取 sys.argv[1:]

    Returns:
        int: 退出码
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
    except ConfigError as e:
        console.print(f"[red]配置错误: {e}[/red]")
        return EXIT_USAGE
    if args.log_level:
        config.set('log_level', args.log_level)
    if args.log_file:
        config.set('log_file', args.log_file)
    level = 'DEBUG' if args.debug else config.get('log_level', 'INFO')
    setup_logger(level=level, log_file=config.get('log_file'))
    return CLI(config).run(args)
