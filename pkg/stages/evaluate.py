"""
evaluate 命令 - 读取真值与预测轨迹文件，输出跨视角指标报告
"""

import logging
import os
from typing import Optional, Tuple

from metrics.cross_view import CvScores, EvalConfig, evaluate
from metrics.report import format_report
from utils.trackio import read_tracks, trajectories_from_records


logger = logging.getLogger(__name__)


def cmd_evaluate(gt_path: str, pred_path: str, config: EvalConfig = EvalConfig(),
                 out_path: Optional[str] = None) -> Tuple[str, CvScores]:
    """
    Args:
        gt_path: 真值轨迹文件
        pred_path: 预测轨迹文件
        config: 评估配置
        out_path: 可选，报告另存路径

    Returns:
        Tuple[str, CvScores]: 报告文本与分数
    """
    gt = trajectories_from_records(read_tracks(gt_path))
    preds = trajectories_from_records(read_tracks(pred_path))
    scores = evaluate(gt, preds, config)
    report = format_report(scores)
    if out_path:
        directory = os.path.dirname(out_path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(out_path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(report)
        logger.info(f"Report saved to {out_path}")
    return report, scores
