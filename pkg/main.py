#!/usr/bin/env python3
# Copyright: (c) OpenChiip Organization. https://github.com/OpenChiip/Chiip
# Copyright: (c) <aigc@openchiip.com>

"""
FSTA-EC - 由多变量时间序列估计有效连接
主程序入口
"""
import logging
import sys

from cli import main

logger = logging.getLogger(__name__)

if __name__ == '__main__':
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        logger.info("程序被用户中断")
        sys.exit(130)
