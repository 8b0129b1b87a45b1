"""
在线跟踪 - 滑动窗口关联与记忆库
"""

from .matching import gate_scores, hungarian, membership_matrix, trajectory_scores
from .online import finalize, memory_feature, step
from .state import (
    ActiveTrajectory,
    CachedFrame,
    MemoryBank,
    MemoryEntry,
    StepSummary,
    TrackerConfig,
    TrackerState,
    WindowCache,
    create_initial_state,
)

__all__ = [
    'gate_scores', 'hungarian', 'membership_matrix', 'trajectory_scores',
    'finalize', 'memory_feature', 'step',
    'ActiveTrajectory', 'CachedFrame', 'MemoryBank', 'MemoryEntry', 'StepSummary',
    'TrackerConfig', 'TrackerState', 'WindowCache', 'create_initial_state',
]
