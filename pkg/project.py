# Copyright: (c) OpenChiip Organization. https://github.com/OpenChiip/Chiip
# Copyright: (c) <aigc@openchiip.com>

"""
运行记录模块，为命令行写出的每个产物生成旁注文件（RunManifest）

产物 P 的旁注为 P.run.json；目录产物的旁注是同级的 <dir>.run.json。
旁注含墙钟时间，不参与产物的逐字节可复现比较。
"""
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

from file_manager import FileManager

logger = logging.getLogger(__name__)

TOOL_NAME = 'fsta-ec'
TOOL_VERSION = '0.1.0'
SIDECAR_SUFFIX = '.run.json'


@dataclass
class RunManifest:
    """一次命令执行的记录"""
    command: str                     # 子命令名称
    flags: Dict[str, Any]            # 完整的参数集合
    seed: Optional[int]              # 随机种子（无随机性的命令为None）
    version: str                     # 工具版本
    inputs: List[str] = field(default_factory=list)
    outputs: List[str] = field(default_factory=list)
    started_at: float = 0.0          # 开始时间戳
    seconds: float = 0.0             # 墙钟耗时

    def to_dict(self) -> Dict[str, Any]:
        payload = asdict(self)
        payload['tool'] = TOOL_NAME
        return payload


def sidecar_path(artifact: Union[str, Path]) -> Path:
    """产物对应的旁注路径"""
    artifact = Path(artifact)
    if artifact.is_dir():
        return artifact.parent / f"{artifact.name}{SIDECAR_SUFFIX}"
    return artifact.with_name(artifact.name + SIDECAR_SUFFIX)


def _plain_flags(flags: Mapping[str, Any]) -> Dict[str, Any]:
    plain: Dict[str, Any] = {}
    for key, value in flags.items():
        if callable(value):
            continue
        if isinstance(value, Path):
            value = str(value)
        elif isinstance(value, (list, tuple)):
            value = [str(v) if isinstance(v, Path) else v for v in value]
        plain[key] = value
    return plain


class RunTracker:
    """记录一次命令的输入、输出与耗时，并在结束时写出旁注"""

    def __init__(self, command: str, flags: Mapping[str, Any], seed: Optional[int] = None,
                 file_manager: Optional[FileManager] = None):
        """
        初始化运行记录

        Args:
            command: 子命令名称
            flags: 命令行参数（argparse 的 vars(args)）
            seed: 随机种子
            file_manager: 用于写旁注的文件管理器
        """
        self.file_manager = file_manager or FileManager()
        self.manifest = RunManifest(
            command=command,
            flags=_plain_flags(flags),
            seed=seed,
            version=TOOL_VERSION,
            started_at=time.time(),
        )
        self._clock = time.perf_counter()

    def add_input(self, path: Union[str, Path]) -> None:
        self.manifest.inputs.append(str(path))

    def add_output(self, path: Union[str, Path]) -> None:
        self.manifest.outputs.append(str(path))

    def finish(self) -> List[Path]:
        """
        结束记录并为每个输出写旁注

        Returns:
            List[Path]: 写出的旁注路径
        """
        self.manifest.seconds = time.perf_counter() - self._clock
        written = []
        for output in self.manifest.outputs:
            path = self.file_manager.write_json(sidecar_path(output), self.manifest.to_dict())
            written.append(path)
        logger.debug(f"已写出 {len(written)} 个运行记录")
        return written
