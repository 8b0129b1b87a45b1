"""
train 命令 - 在合成场景上训练关联模型并保存权重
"""

import logging
from typing import Dict, List, Optional

from model.params import ModelParams, init_params
from model.training import TrainingBatch, WindowSampler, evaluate_loss, train
from utils.checkpoint import save_loss_curve, save_weights
from utils.config import RunConfig
from .simulate import build_scene


logger = logging.getLogger(__name__)


def build_sampler(config: RunConfig) -> WindowSampler:
    """训练场景使用种子偏移 1..scenarios，与评估场景（偏移 0）互不重叠"""
    scenes = [build_scene(config.scenario, seed_offset=k) for k in range(1, config.train.scenarios + 1)]
    return WindowSampler(scenes, window_frames=config.train.window_frames, max_targets=config.train.max_targets)


def heldout_batches(config: RunConfig) -> List[TrainingBatch]:
    """评估场景上的固定窗口"""
    sampler = WindowSampler([build_scene(config.scenario)], window_frames=config.train.window_frames,
                            max_targets=config.train.max_targets)
    return sampler.fixed_windows(config.train.heldout_windows, seed=config.train.seed)


def train_params(config: RunConfig, progress: bool = True) -> Dict:
    """训练并返回 {'params', 'loss_curve', 'heldout_initial', 'heldout_final'}"""
    cfg = config.train
    initial = init_params(config.model.dims, seed=config.model.seed)
    heldout = heldout_batches(config)
    result = train(build_sampler(config), initial, iterations=cfg.iterations, learning_rate=cfg.learning_rate,
                   seed=cfg.seed, optimizer=cfg.optimizer, momentum=cfg.momentum, grad_clip=cfg.grad_clip,
                   progress=progress)
    before = evaluate_loss(initial, heldout)
    after = evaluate_loss(result.params, heldout)
    logger.info(f"Held-out association loss: {before:.4f} -> {after:.4f}")
    return {
        'params': result.params,
        'loss_curve': result.loss_curve,
        'heldout_initial': before,
        'heldout_final': after,
    }


def cmd_train(config: RunConfig, weights_path: Optional[str] = None, progress: bool = True) -> Dict:
    """
    训练并写出权重文件与损失曲线

    Args:
        config: 运行配置
        weights_path: 权重输出路径，默认 paths.weights
        progress: 是否显示进度条

    Returns:
        Dict: 权重路径、损失曲线路径与留出损失
    """
    weights_path = weights_path or config.paths.weights
    outcome = train_params(config, progress=progress)
    params: ModelParams = outcome['params']
    save_weights(params, weights_path)
    curve_path = save_loss_curve(outcome['loss_curve'], weights_path)
    return {
        'weights': weights_path,
        'loss_curve': curve_path,
        'heldout_initial': outcome['heldout_initial'],
        'heldout_final': outcome['heldout_final'],
    }
