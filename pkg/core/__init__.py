"""
Core module - 共享领域类型、框几何与窗口计算
"""

from .types import BoxPx, FrameRef, TargetObs, Trajectory, SceneDims
from .geometry import iou, iou_matrix, assign_targets_to_gt, window_start
from .errors import MtmcError, ConfigError, DataError, InvariantError, DivergenceError

__all__ = [
    'BoxPx', 'FrameRef', 'TargetObs', 'Trajectory', 'SceneDims',
    'iou', 'iou_matrix', 'assign_targets_to_gt', 'window_start',
    'MtmcError', 'ConfigError', 'DataError', 'InvariantError', 'DivergenceError',
]
