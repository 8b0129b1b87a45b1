"""
ablate 命令 - 对窗口长度、注意力头数或时空特征维度做单变量扫描
"""

import logging
from typing import Dict, List, Sequence

from core.errors import ConfigError
from metrics.cross_view import evaluate
from model.params import appearance_matching_params
from utils.config import RunConfig, config_from_dict
from .simulate import build_scene
from .track import track_detections
from .train import train_params


logger = logging.getLogger(__name__)

# 参数名 -> 配置中的 (段, 键)；模型尺寸类参数需要重新训练
ABLATION_KEYS = {
    'window': ('tracker', 'window'),
    'heads': ('model', 'heads'),
    'd_st': ('model', 'd_st'),
}


def variant_config(config: RunConfig, param: str, value: int) -> RunConfig:
    """
    复制配置并修改一个参数，经 pydantic 重新校验

    Raises:
        ConfigError: 参数未知或取值使配置非法（如模型维度不能被头数整除）
    """
    if param not in ABLATION_KEYS:
        raise ConfigError(f"Unknown ablation parameter {param!r}; choose from {sorted(ABLATION_KEYS)}")
    section, key = ABLATION_KEYS[param]
    data = config.model_dump()
    data[section][key] = value
    return config_from_dict(data)


def format_line(row: Dict) -> str:
    parts = []
    for key, value in row.items():
        if value is None:
            parts.append(f'{key}=undefined')
        elif isinstance(value, float):
            parts.append(f'{key}={value:.6f}')
        else:
            parts.append(f'{key}={value}')
    return ' '.join(parts)


def cmd_ablate(config: RunConfig, param: str, values: Sequence[int],
               matching_params: bool = False, progress: bool = False) -> List[Dict]:
    """
    对每个取值：（模型参数则重新训练）→ 在评估场景上跟踪 → 评估

    Args:
        config: 基础配置
        param: 'window' | 'heads' | 'd_st'
        values: 参数取值
        matching_params: 使用外观匹配参数代替训练
        progress: 训练时是否显示进度条

    Returns:
        List[Dict]: 每个取值一行结果，同时逐行打印 key=value
    """
    if not values:
        raise ConfigError("ablate needs at least one value")
    variants = [variant_config(config, param, v) for v in values]
    scene, rendered = build_scene(config.scenario)

    shared_params = None
    rows = []
    for value, variant in zip(values, variants):
        heldout = None
        if matching_params:
            params = appearance_matching_params(variant.model.dims)
        elif param == 'window' and shared_params is not None:
            params = shared_params
        else:
            logger.info(f"Training model for {param}={value}")
            outcome = train_params(variant, progress=progress)
            params, heldout = outcome['params'], outcome['heldout_final']
            if param == 'window':
                shared_params = params

        trajectories = track_detections(rendered.observations, params, variant.tracker.tracker_config(),
                                        variant.scenario.dims)
        scores = evaluate(scene.trajectories, trajectories, variant.eval.eval_config())
        row = {
            'param': param,
            'value': value,
            'cvma': scores.cvma,
            'cvidf1': scores.cvidf1,
            'trajectories': len(trajectories),
            'heldout_loss': heldout,
        }
        print(format_line(row))
        rows.append(row)
    return rows
