# Copyright: (c) OpenChiip Organization. https://github.com/OpenChiip/Chiip
# Copyright: (c) <aigc@openchiip.com>

"""
文件系统操作模块，负责数据集目录、检查点与JSON结果文件的读写

数据集目录布局：
    manifest.json        {n_nodes, n_points, n_subjects, snr_db, topology, seed, ...}（外部数据可省略）
    truth.csv            N×N 的0/1矩阵，第i行第j列为1表示边 j→i（可省略）
    subject_000.csv ...  每行一个时间点，每列一个节点，表头 n0..n{N-1}

所有CSV由 numpy.savetxt 写出、numpy.loadtxt 读入：',' 分隔、LF换行，数值以17位有效数字写出，可精确往返。
"""
import json
import logging
import re
import warnings
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

import numpy as np

from data import GroundTruthGraph, TimeSeriesDataset
from numerics import ParameterStore
from utils.text_processing import canonical_json
from utils.validation import DataError, validate_path

logger = logging.getLogger(__name__)

MANIFEST_FILE = 'manifest.json'
TRUTH_FILE = 'truth.csv'
SUBJECT_PATTERN = 'subject_{:03d}.csv'
SUBJECT_NAME = re.compile(r'subject_(\d+)\.csv')
VALUE_FORMAT = '%.17g'

PathLike = Union[str, Path]


class FileManager:
    """文件系统管理器，相对路径都相对于工作目录解析"""

    def __init__(self, workspace_dir: PathLike = '.'):
        """
        初始化文件管理器

        Args:
            workspace_dir: 工作目录路径
        """
        self.workspace_dir = Path(workspace_dir)
        if not self.workspace_dir.exists():
            self.workspace_dir.mkdir(parents=True)
            logger.info(f"创建工作目录: {self.workspace_dir.absolute()}")

    def write_text(self, path: PathLike, content: str) -> Path:
        """写入文本文件（LF换行），必要时创建父目录"""
        file_path = self._get_absolute_path(path)
        file_path.parent.mkdir(parents=True, exist_ok=True)
        with open(file_path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(content)
        return file_path

    def write_json(self, path: PathLike, payload: Any) -> Path:
        """以规范化格式写出JSON（键排序，相同内容逐字节相同）"""
        file_path = self.write_text(path, canonical_json(payload))
        logger.debug(f"已写入 {file_path}")
        return file_path

    def read_json(self, path: PathLike) -> Any:
        """
        读取JSON文件

        Raises:
            DataError: 文件不存在或不是合法JSON
        """
        file_path = self._require_file(path)
        try:
            with open(file_path, 'r', encoding='utf-8') as f:
                return json.load(f)
        except json.JSONDecodeError as e:
            raise DataError(f"{file_path} 不是合法JSON: {e}") from e

    def write_matrix_csv(self, path: PathLike, matrix: np.ndarray) -> Path:
        """写出带表头 n0..n{C-1} 的CSV，每行对应矩阵的一行"""
        matrix = np.asarray(matrix)
        if matrix.ndim != 2:
            raise DataError(f"只能写出二维矩阵，得到形状 {matrix.shape}")
        file_path = self._get_absolute_path(path)
        file_path.parent.mkdir(parents=True, exist_ok=True)
        header = ','.join(f'n{k}' for k in range(matrix.shape[1]))
        fmt = '%d' if np.issubdtype(matrix.dtype, np.integer) else VALUE_FORMAT
        with open(file_path, 'w', encoding='utf-8', newline='\n') as f:
            np.savetxt(f, matrix, fmt=fmt, delimiter=',', header=header, comments='')
        return file_path

    def read_matrix_csv(self, path: PathLike) -> np.ndarray:
        """
        读取带表头的CSV为二维float64数组

        Raises:
            DataError: 文件缺失、列数不一致或含有无法解析的数值，错误信息包含文件名
        """
        file_path = self._require_file(path)
        with open(file_path, 'r', encoding='utf-8') as f:
            header = f.readline().strip()
        if not header:
            raise DataError(f"{file_path.name} 为空，缺少表头")
        width = len(header.split(','))
        try:
            with warnings.catch_warnings():
                # 只有表头时 loadtxt 会告警并返回空数组，由下面的检查报告
                warnings.simplefilter('ignore', UserWarning)
                values = np.loadtxt(file_path, dtype=np.float64, delimiter=',', skiprows=1, ndmin=2,
                                    encoding='utf-8')
        except ValueError as e:
            raise DataError(f"{file_path.name} 含有无法解析的数值或列数不一致: {e}") from e
        if values.size == 0:
            raise DataError(f"{file_path.name} 没有数据行")
        if values.shape[1] != width:
            raise DataError(f"{file_path.name} 的数据有 {values.shape[1]} 列，表头有 {width} 列")
        return values

    def save_dataset(self, dataset: TimeSeriesDataset, directory: PathLike) -> Path:
        """
        保存数据集目录

        Args:
            dataset: 数据集
            directory: 目标目录

        Returns:
            Path: 数据集目录
        """
        target = self._get_absolute_path(directory)
        target.mkdir(parents=True, exist_ok=True)
        for stale in target.glob('subject_*.csv'):
            stale.unlink()
        manifest = dict(dataset.metadata)
        manifest.update({
            'n_nodes': dataset.n_nodes,
            'n_points': dataset.n_points,
            'n_subjects': dataset.n_subjects,
        })
        self.write_json(target / MANIFEST_FILE, manifest)
        if dataset.truth is not None:
            self.write_matrix_csv(target / TRUTH_FILE, dataset.truth.adjacency)
        for index, series in enumerate(dataset.subjects):
            self.write_matrix_csv(target / SUBJECT_PATTERN.format(index), series.T)
        logger.info(f"已保存数据集到 {target}（{dataset.n_subjects} 个被试）")
        return target

    def load_dataset(self, directory: PathLike) -> TimeSeriesDataset:
        """
        加载数据集目录；manifest.json 与 truth.csv 都可缺省

        Raises:
            DataError: 目录或被试文件缺失，或与清单不一致
        """
        source = validate_path(self._get_absolute_path(directory), check_exists=True, kind='dir')
        files = self._subject_files(source)
        if not files:
            raise DataError(f"{source} 中没有 subject_*.csv 文件")
        subjects = [self.read_matrix_csv(path).T for path in files]
        shapes = {s.shape for s in subjects}
        if len(shapes) != 1:
            raise DataError(f"{source} 中被试文件的形状不一致: {sorted(shapes)}")

        metadata: Dict[str, Any] = {}
        manifest_path = source / MANIFEST_FILE
        if manifest_path.exists():
            metadata = self.read_json(manifest_path)
            self._check_manifest(metadata, subjects, manifest_path)

        truth = None
        truth_path = source / TRUTH_FILE
        if truth_path.exists():
            matrix = self.read_matrix_csv(truth_path)
            try:
                truth = GroundTruthGraph(matrix.astype(np.int64))
            except DataError as e:
                raise DataError(f"{TRUTH_FILE}: {e}") from e
            if not np.array_equal(truth.adjacency, matrix):
                raise DataError(f"{TRUTH_FILE} 只能包含0或1")

        for key in ('n_nodes', 'n_points', 'n_subjects'):
            metadata.pop(key, None)
        try:
            dataset = TimeSeriesDataset(subjects=subjects, truth=truth, metadata=metadata)
        except DataError as e:
            raise DataError(f"{source}: {e}") from e
        logger.info(f"已加载数据集 {source}：{dataset.n_subjects} 个被试，{dataset.n_nodes} 个节点")
        return dataset

    def save_checkpoint(self, path: PathLike, params: ParameterStore, config: Dict[str, Any]) -> Path:
        """写出检查点容器（随附模型配置）"""
        file_path = self._get_absolute_path(path)
        file_path.parent.mkdir(parents=True, exist_ok=True)
        file_path.write_bytes(params.to_bytes(config))
        logger.info(f"已保存检查点 {file_path}（{params.n_values()} 个参数）")
        return file_path

    def load_checkpoint(self, path: PathLike) -> Tuple[ParameterStore, Dict[str, Any]]:
        """
        读取检查点容器

        Returns:
            Tuple[ParameterStore, Dict]: 参数仓库与模型配置

        Raises:
            DataError: 文件缺失或损坏
        """
        file_path = self._require_file(path)
        try:
            return ParameterStore.from_bytes(file_path.read_bytes())
        except DataError as e:
            raise DataError(f"{file_path.name}: {e}") from e

    def _subject_files(self, source: Path) -> List[Path]:
        """按文件名中的编号（而非字典序）排列被试文件"""
        numbered: Dict[int, Path] = {}
        for path in source.glob('subject_*.csv'):
            match = SUBJECT_NAME.fullmatch(path.name)
            if match is None:
                raise DataError(f"{path.name} 不符合 subject_<编号>.csv 的命名")
            index = int(match.group(1))
            if index in numbered:
                raise DataError(f"{numbered[index].name} 与 {path.name} 的被试编号重复")
            numbered[index] = path
        return [numbered[index] for index in sorted(numbered)]

    def _check_manifest(self, manifest: Dict[str, Any], subjects: List[np.ndarray], path: Path) -> None:
        n_nodes, n_points = subjects[0].shape
        expected = {'n_subjects': len(subjects), 'n_nodes': n_nodes, 'n_points': n_points}
        for key, actual in expected.items():
            if key in manifest and int(manifest[key]) != actual:
                raise DataError(f"{path.name} 中 {key}={manifest[key]}，实际数据为 {actual}")

    def _require_file(self, path: PathLike) -> Path:
        return validate_path(self._get_absolute_path(path), check_exists=True, kind='file')

    def _get_absolute_path(self, path: PathLike) -> Path:
        """
        获取绝对路径

        Args:
            path: 相对于workspace的路径，或绝对路径

        Returns:
            Path: 绝对路径
        """
        path = Path(path)
        if path.is_absolute():
            return path
        return self.workspace_dir / path


def save_dataset(dataset: TimeSeriesDataset, directory: PathLike) -> Path:
    """保存数据集目录"""
    return FileManager().save_dataset(dataset, directory)


def load_dataset(directory: PathLike) -> TimeSeriesDataset:
    """加载数据集目录"""
    return FileManager().load_dataset(directory)
