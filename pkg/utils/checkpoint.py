"""
Checkpoint - 模型权重文件、损失曲线与流水线检查点
"""

import base64
import hashlib
import json
import logging
import os
from typing import Dict, List, Optional

import numpy as np

from core.errors import DataError
from model.params import ModelDims, ModelParams


logger = logging.getLogger(__name__)

WEIGHTS_FORMAT = 'mtmc-assoc-weights'
WEIGHTS_VERSION = 1


def _digest(payload: Dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(',', ':'), ensure_ascii=True)
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def _ensure_parent(path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)


# ==================== 权重文件 ====================

def save_weights(params: ModelParams, path: str) -> str:
    """
    保存权重：JSON 头部记录尺寸，每个张量为 (名称, 形状, 行主序 float64 的 base64)

    Args:
        params: 模型参数
        path: 输出路径

    Returns:
        str: 文件的 sha256
    """
    dims = params.dims
    payload = {
        'format': WEIGHTS_FORMAT,
        'format_version': WEIGHTS_VERSION,
        'header': {
            'd_raw': dims.d_raw,
            'd_roi': dims.d_roi,
            'd_st': dims.d_st,
            'd_model': dims.d_model,
            'heads': dims.heads,
            'd_ff': dims.ffn_width,
        },
        'tensors': [
            {
                'name': name,
                'shape': list(tensor.shape),
                'dtype': '<f8',
                'data': base64.b64encode(np.ascontiguousarray(tensor, dtype='<f8').tobytes()).decode('ascii'),
            }
            for name, tensor in params.named_tensors().items()
        ],
    }
    digest = _digest(payload)
    payload['sha256'] = digest
    _ensure_parent(path)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(payload, f, indent=1, sort_keys=True)
        f.write('\n')
    logger.info(f"💾 Weights saved: {path} (sha256 {digest[:12]})")
    return digest


def load_weights(path: str) -> ModelParams:
    """
    读取权重文件并校验摘要

    Raises:
        DataError: 文件缺失、格式错误或摘要不符
    """
    if not os.path.exists(path):
        raise DataError(f"Weights file not found: {path}")
    try:
        with open(path, 'r', encoding='utf-8') as f:
            payload = json.load(f)
    except json.JSONDecodeError as e:
        raise DataError(f"Weights file {path} is not valid JSON: {e}") from e

    if payload.get('format') != WEIGHTS_FORMAT or payload.get('format_version') != WEIGHTS_VERSION:
        raise DataError(f"Weights file {path} has unsupported format "
                        f"{payload.get('format')} v{payload.get('format_version')}")
    stored = payload.pop('sha256', None)
    if stored != _digest(payload):
        raise DataError(f"Weights file {path} failed its sha256 check")

    header = payload['header']
    dims = ModelDims(d_raw=header['d_raw'], d_roi=header['d_roi'], d_st=header['d_st'],
                     heads=header['heads'], d_ff=header['d_ff'])
    tensors = {}
    for entry in payload['tensors']:
        if entry.get('dtype') != '<f8':
            raise DataError(f"Tensor {entry.get('name')} has unsupported dtype {entry.get('dtype')}")
        raw = base64.b64decode(entry['data'])
        tensors[entry['name']] = np.frombuffer(raw, dtype='<f8').reshape(entry['shape']).astype(np.float64)
    try:
        return ModelParams.from_named(dims, tensors)
    except ValueError as e:
        raise DataError(f"Weights file {path}: {e}") from e


def save_loss_curve(curve: List[float], weights_path: str) -> str:
    path = weights_path + '.loss.csv'
    _ensure_parent(path)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write('iteration,loss\n')
        for i, loss in enumerate(curve, start=1):
            f.write(f'{i},{loss:.10f}\n')
    return path


# ==================== 流水线检查点 ====================

def save_checkpoint(state: Dict, checkpoint_dir: str, stage: str) -> Optional[str]:
    """
    保存流水线状态中可序列化的部分

    文件名为 checkpoint_<stage>.json，不带时间戳，重复运行结果逐字节一致。
    """
    try:
        os.makedirs(checkpoint_dir, exist_ok=True)
        checkpoint_file = os.path.join(checkpoint_dir, f"checkpoint_{stage}.json")
        serializable = {
            'checkpoint_version': '3.0',
            'stage': stage,
            'completed_nodes': list(state.get('completed_nodes', [])),
            'paths': dict(state.get('paths', {})),
            'heldout_loss': state.get('heldout_loss', {}),
            'metrics': state.get('metrics', {}),
        }
        with open(checkpoint_file, 'w', encoding='utf-8') as f:
            json.dump(serializable, f, ensure_ascii=False, indent=2, sort_keys=True)
        logger.info(f"💾 Checkpoint saved: {checkpoint_file}")
        return checkpoint_file
    except OSError as e:
        logger.error(f"Failed to save checkpoint: {str(e)}")
        return None


def load_checkpoint(checkpoint_file: str) -> Optional[Dict]:
    """读取检查点，失败时返回 None"""
    try:
        with open(checkpoint_file, 'r', encoding='utf-8') as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        logger.error(f"Failed to load checkpoint: {str(e)}")
        return None
