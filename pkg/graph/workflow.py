"""
LangGraph工作流 - 串联 simulate -> train -> track -> evaluate 并在每个节点后保存检查点
"""

import logging
import os
from typing import Dict

from langgraph.graph import END, StateGraph

from graph.state import PipelineState, create_initial_state
from stages.evaluate import cmd_evaluate
from stages.simulate import cmd_simulate
from stages.track import cmd_track
from stages.train import cmd_train
from utils.checkpoint import save_checkpoint
from utils.config import RunConfig


logger = logging.getLogger(__name__)

PRED_FILE = 'pred.txt'
REPORT_FILE = 'report.txt'

# 以 operator.add 累积的字段
ACCUMULATED_KEYS = ('completed_nodes',)


def merge_state_update(current_state: Dict, state_update: Dict) -> None:
    """
    合并节点输出：累积字段追加，其余字段替换

    Args:
        current_state: 当前状态（会被修改）
        state_update: 增量更新
    """
    for key, value in state_update.items():
        if key in ACCUMULATED_KEYS:
            current_state.setdefault(key, [])
            if isinstance(value, list):
                current_state[key].extend(value)
            else:
                current_state[key].append(value)
        else:
            current_state[key] = value


def should_train(state: PipelineState) -> str:
    """权重已存在且允许复用时跳过训练"""
    config = state['config']
    if config.train.reuse_weights and os.path.exists(config.paths.weights):
        logger.info(f"Reusing existing weights {config.paths.weights}")
        return "skip"
    return "train"


def create_workflow(progress: bool = False):
    """
    创建流水线工作流

    Args:
        progress: 训练时是否显示进度条

    Returns:
        编译后的工作流图
    """
    workflow = StateGraph(PipelineState)

    # ==================== 定义节点 ====================

    def node_simulate(state: PipelineState) -> Dict:
        """节点：生成真值与检测文件"""
        config = state['config']
        written = cmd_simulate(config, config.paths.output_dir)
        return {'paths': {**state['paths'], **written}, 'completed_nodes': ['simulate']}

    def node_train(state: PipelineState) -> Dict:
        """节点：训练并保存权重"""
        config = state['config']
        outcome = cmd_train(config, progress=progress)
        return {
            'paths': {**state['paths'], 'weights': outcome['weights'], 'loss_curve': outcome['loss_curve']},
            'heldout_loss': {'initial': outcome['heldout_initial'], 'final': outcome['heldout_final']},
            'completed_nodes': ['train'],
        }

    def node_track(state: PipelineState) -> Dict:
        """节点：在线跟踪检测文件"""
        config = state['config']
        pred_path = os.path.join(config.paths.output_dir, PRED_FILE)
        cmd_track(config, state['paths']['det'], pred_path)
        return {'paths': {**state['paths'], 'weights': config.paths.weights, 'pred': pred_path},
                'completed_nodes': ['track']}

    def node_evaluate(state: PipelineState) -> Dict:
        """节点：评估并写出报告"""
        config = state['config']
        report_path = os.path.join(config.paths.output_dir, REPORT_FILE)
        report, scores = cmd_evaluate(state['paths']['gt'], state['paths']['pred'],
                                      config.eval.eval_config(), out_path=report_path)
        return {
            'paths': {**state['paths'], 'report': report_path},
            'metrics': {'cvma': scores.cvma, 'cvidp': scores.cvidp,
                        'cvidr': scores.cvidr, 'cvidf1': scores.cvidf1},
            'report': report,
            'completed_nodes': ['evaluate'],
        }

    # ==================== 添加节点到图 ====================

    workflow.add_node("simulate", node_simulate)
    workflow.add_node("train", node_train)
    workflow.add_node("track", node_track)
    workflow.add_node("evaluate", node_evaluate)

    # ==================== 定义边 ====================

    workflow.set_entry_point("simulate")
    workflow.add_conditional_edges(
        "simulate",
        should_train,
        {
            "train": "train",
            "skip": "track",
        }
    )
    workflow.add_edge("train", "track")
    workflow.add_edge("track", "evaluate")
    workflow.add_edge("evaluate", END)

    # ==================== 编译图 ====================

    return workflow.compile()


def run_workflow(config: RunConfig, progress: bool = False) -> Dict:
    """
    运行完整流水线，每个节点完成后保存检查点

    Args:
        config: 运行配置
        progress: 训练时是否显示进度条

    Returns:
        Dict: 最终状态
    """
    logger.info("Starting pipeline")
    initial_state = create_initial_state(config)
    app = create_workflow(progress=progress)
    checkpoint_dir = config.paths.checkpoint_dir

    current_state = dict(initial_state)
    try:
        for state_update in app.stream(initial_state):
            for node_name, node_output in state_update.items():
                logger.info(f"Completed node: {node_name}")
                if node_output:
                    merge_state_update(current_state, node_output)
                save_checkpoint(current_state, checkpoint_dir, node_name)
    except Exception as e:
        logger.error(f"Pipeline failed after {current_state.get('completed_nodes', [])}: {str(e)}")
        save_checkpoint(current_state, checkpoint_dir, 'failed')
        raise

    logger.info("Pipeline completed successfully")
    return current_state
