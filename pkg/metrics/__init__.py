"""
跨视角评估指标
"""

from .cross_view import (
    CvScores,
    EvalConfig,
    FrameCounters,
    FrameMatch,
    correspondences,
    cvidf1,
    cvma,
    evaluate,
    match_frame,
)
from .report import format_report, parse_report, render_table

__all__ = [
    'CvScores', 'EvalConfig', 'FrameCounters', 'FrameMatch', 'correspondences',
    'cvidf1', 'cvma', 'evaluate', 'match_frame',
    'format_report', 'parse_report', 'render_table',
]
