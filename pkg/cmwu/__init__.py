"""
Clairvoyant MWU 博弈学习库

在正规形式博弈中运行非耦合的 Clairvoyant MWU 动力学，度量遗憾与粗相关均衡误差。
"""

__version__ = "1.0.0"
