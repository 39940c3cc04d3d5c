# Copyright: (c) OpenChiip Organization. https://github.com/OpenChiip/Chiip
# Copyright: (c) <aigc@openchiip.com>

"""
工具函数包
"""
from .logger import LoggerContext, setup_logger
from .text_processing import canonical_json, format_mean_std, format_p_value
from .validation import (ConfigError, DataError, FstaError, NumericalError, ShapeError, check_finite,
                         check_shape, validate_path)

__all__ = [
    'setup_logger',
    'LoggerContext',
    'canonical_json',
    'format_mean_std',
    'format_p_value',
    'FstaError',
    'ConfigError',
    'ShapeError',
    'DataError',
    'NumericalError',
    'check_shape',
    'check_finite',
    'validate_path',
]
