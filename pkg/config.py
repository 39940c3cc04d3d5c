# Copyright: (c) OpenChiip Organization. https://github.com/OpenChiip/Chiip
# Copyright: (c) <aigc@openchiip.com>

"""
配置管理模块，负责处理程序的配置信息

优先级：默认配置 < JSON配置文件 < 命令行参数；并行度另外读取环境变量 FSTA_THREADS。
"""
import copy
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional

from utils.validation import ConfigError

logger = logging.getLogger(__name__)

THREADS_ENV = "FSTA_THREADS"


class Config:
    """配置管理类"""

    # 默认配置
    DEFAULT_CONFIG = {
        # 基本设置
        'log_level': 'INFO',
        'log_file': None,

        # 模型设置
        'model': {
            'embed_dim': 16,
            'n_heads': 2,
            'ffn_dim': None,
            'dropout_rate': 0.2,
            'pe_base': 10000.0,
            'sparsity_weight': 0.05,
            'layer_norm_eps': 1e-5,
            'filter_noise': 0.01,
            'variant': 'default',
        },

        # 优化器设置
        'optimizer': {
            'learning_rate': 1e-3,
            'beta1': 0.90,
            'beta2': 0.98,
            'eps': 1e-8,
            'epochs': 300,
            'batch_size': 32,
            'seed': 42,
            'log_every': 10,
        },

        # 模拟数据设置
        'generator': {
            'topology': 'sim1',
            'n_subjects': 60,
            'n_points': 500,
            'snr_db': 2.0,
            'edge_weight': 0.4,
            'self_weight': 0.3,
            'spectral_radius_cap': 0.8,
            'burn_in': 200,
            'seed': 42,
            'tr_seconds': 1.2,
            'session_minutes': 10.0,
        },

        # 阈值设置
        'threshold': {
            'eta': 0.5,
        },

        # 基准测试设置
        'bench': {
            'runs': 20,
            'threads': 1,
        },
    }

    def __init__(self, config_file: Optional[str] = None):
        """
        初始化配置管理器

        Args:
            config_file: 配置文件路径，为None时只使用默认配置
        """
        self.config_file = config_file
        self.config = copy.deepcopy(self.DEFAULT_CONFIG)
        if config_file:
            self.load()
        self._apply_environment()

    def load(self) -> bool:
        """
        从配置文件加载配置

        Returns:
            bool: 是否成功加载

        Raises:
            ConfigError: 文件存在但不是合法的JSON对象
        """
        config_path = Path(self.config_file)
        if not config_path.exists():
            raise ConfigError(f"配置文件不存在: {self.config_file}")

        try:
            with open(config_path, 'r', encoding='utf-8') as f:
                user_config = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"配置文件 {self.config_file} 不是合法JSON: {e}") from e
        if not isinstance(user_config, dict):
            raise ConfigError(f"配置文件 {self.config_file} 顶层必须是对象")

        # 更新配置，保留默认值
        self._update_config(self.config, user_config)
        logger.info(f"已从 {self.config_file} 加载配置")
        return True

    def save(self, path: Optional[str] = None) -> None:
        """保存配置到文件"""
        config_path = Path(path or self.config_file)
        config_path.parent.mkdir(parents=True, exist_ok=True)
        with open(config_path, 'w', encoding='utf-8') as f:
            json.dump(self.config, f, indent=2, ensure_ascii=False, sort_keys=True)
            f.write('\n')
        logger.info(f"已保存配置到 {config_path}")

    def get(self, key: str, default: Any = None) -> Any:
        """
        获取配置项

        Args:
            key: 配置项键名，支持点号分隔的嵌套键
            default: 默认值，如果配置项不存在则返回此值

        Returns:
            Any: 配置项的值
        """
        try:
            value = self.config
            for k in key.split('.'):
                value = value[k]
            return value
        except (KeyError, TypeError):
            return default

    def set(self, key: str, value: Any) -> None:
        """
        设置配置项

        Args:
            key: 配置项键名，支持点号分隔的嵌套键
            value: 配置项的值

        Raises:
            ConfigError: 如果键名无效
        """
        if not isinstance(key, str) or not key.strip():
            raise ConfigError(f"无效的配置键: {key}")

        keys = key.split('.')
        config = self.config
        for k in keys[:-1]:
            if k not in config or not isinstance(config[k], dict):
                config[k] = {}
            config = config[k]
        config[keys[-1]] = value

    def override(self, values: Dict[str, Any]) -> None:
        """批量设置配置项，值为None的键被忽略（用于命令行参数覆盖）"""
        for key, value in values.items():
            if value is not None:
                self.set(key, value)

    def section(self, name: str) -> Dict[str, Any]:
        """返回某一节配置的副本"""
        return copy.deepcopy(self.get(name, {}))

    def reset(self) -> None:
        """重置为默认配置"""
        self.config = copy.deepcopy(self.DEFAULT_CONFIG)
        logger.info("配置已重置为默认值")

    def flatten(self) -> Dict[str, Any]:
        """展开为点号键的平铺字典，便于表格展示"""
        rows: Dict[str, Any] = {}

        def walk(node: Dict[str, Any], prefix: str = ""):
            for key, value in node.items():
                full_key = f"{prefix}{key}"
                if isinstance(value, dict):
                    walk(value, f"{full_key}.")
                else:
                    rows[full_key] = value

        walk(self.config)
        return rows

    def _apply_environment(self) -> None:
        raw = os.environ.get(THREADS_ENV)
        if raw is None or not raw.strip():
            return
        try:
            threads = int(raw)
        except ValueError:
            raise ConfigError(f"环境变量 {THREADS_ENV} 必须是正整数，当前为 {raw!r}") from None
        if threads < 1:
            raise ConfigError(f"环境变量 {THREADS_ENV} 必须是正整数，当前为 {raw!r}")
        self.set('bench.threads', threads)

    def _update_config(self, target: Dict[str, Any], source: Dict[str, Any]) -> None:
        """
        递归更新配置字典

        Args:
            target: 目标配置字典
            source: 源配置字典
        """
        for key, value in source.items():
            if key in target and isinstance(target[key], dict) and isinstance(value, dict):
                self._update_config(target[key], value)
            else:
                target[key] = value


def load_config(config_file: Optional[str] = None) -> Config:
    """
    加载配置的便捷函数

    Args:
        config_file: 配置文件路径

    Returns:
        Config: 配置管理器实例
    """
    return Config(config_file)
