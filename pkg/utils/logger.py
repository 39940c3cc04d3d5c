# Copyright: (c) OpenChiip Organization. https://github.com/OpenChiip/Chiip
# Copyright: (c) <aigc@openchiip.com>

"""
日志工具模块，提供统一的日志配置
"""
import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Optional, Union

from rich.console import Console
from rich.logging import RichHandler

# 预定义的日志格式
LOG_FORMATS = {
    'simple': '%(levelname)s - %(message)s',
    'standard': '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    'detailed': '%(asctime)s - %(name)s - %(levelname)s - %(pathname)s:%(lineno)d - %(message)s',
}

DATE_FORMAT = '%Y-%m-%d %H:%M:%S'


def setup_logger(
    name: Optional[str] = None,
    level: Union[int, str] = logging.INFO,
    log_file: Optional[str] = None,
    log_format: Optional[str] = None,
    **kwargs: Any
) -> logging.Logger:
    """
    配置并获取日志记录器

    控制台输出写到stderr（stdout留给表格与结果）；终端下使用rich渲染，否则使用普通格式。

    Args:
        name: 日志记录器名称，默认为root logger
        level: 日志级别，可以是logging模块的级别常量或对应的字符串
        log_file: 日志文件路径，如果提供则同时输出到文件
        log_format: 文件与非终端输出的格式字符串，默认为 'standard'
        **kwargs: 其他配置参数
            - console_level: 控制台日志级别
            - file_level: 文件日志级别
            - max_bytes / backup_count: 同时提供时启用日志轮转
            - force_plain: 不使用rich处理器

    Returns:
        logging.Logger: 配置好的日志记录器
    """
    logger = logging.getLogger(name)
    if logger.hasHandlers():
        logger.handlers.clear()
    if isinstance(level, str):
        level = level.upper()
    logger.setLevel(level)

    formatter = logging.Formatter(log_format or LOG_FORMATS['standard'], DATE_FORMAT)

    if sys.stderr.isatty() and not kwargs.get('force_plain', False):
        console_handler: logging.Handler = RichHandler(
            console=Console(stderr=True), show_path=False, rich_tracebacks=True
        )
        console_handler.setFormatter(logging.Formatter('%(message)s'))
    else:
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setFormatter(formatter)
    console_handler.setLevel(kwargs.get('console_level', level))
    logger.addHandler(console_handler)

    if log_file:
        file_path = Path(log_file)
        file_path.parent.mkdir(parents=True, exist_ok=True)
        if 'max_bytes' in kwargs and 'backup_count' in kwargs:
            file_handler: logging.Handler = RotatingFileHandler(
                log_file,
                maxBytes=kwargs['max_bytes'],
                backupCount=kwargs['backup_count'],
                encoding='utf-8',
            )
        else:
            file_handler = logging.FileHandler(log_file, encoding='utf-8')
        file_handler.setFormatter(formatter)
        file_handler.setLevel(kwargs.get('file_level', level))
        logger.addHandler(file_handler)

    return logger


class LoggerContext:
    """
    临时修改日志级别的上下文管理器

    Example:
        >>> with LoggerContext(logging.getLogger('training'), logging.WARNING):
        ...     train(dataset, model_cfg, opt_cfg)
    """

    def __init__(self, logger: logging.Logger, level: Union[int, str]):
        self.logger = logger
        self.new_level = level
        self.original_level = logger.level

    def __enter__(self) -> logging.Logger:
        self.logger.setLevel(self.new_level)
        return self.logger

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.logger.setLevel(self.original_level)
