"""
LangGraph State Definition for the simulate -> train -> track -> evaluate pipeline
"""

from typing import Annotated, Dict, List, Optional, TypedDict
import operator

from utils.config import RunConfig


class PipelineState(TypedDict):
    """
    流水线的完整状态
    """
    # ========== 输入 ==========
    config: RunConfig

    # ========== 各节点产物 ==========
    paths: Dict[str, str]  # gt / det / app / weights / pred / report
    heldout_loss: Dict[str, float]  # 训练前后的留出损失（跳过训练时为空）
    metrics: Dict[str, Optional[float]]  # 评估得分
    report: str  # 评估报告全文

    # ========== 流程控制 ==========
    completed_nodes: Annotated[List[str], operator.add]  # 已完成节点，累积


def create_initial_state(config: RunConfig) -> PipelineState:
    """创建初始状态"""
    return PipelineState(
        config=config,
        paths={},
        heldout_loss={},
        metrics={},
        report="",
        completed_nodes=[],
    )
