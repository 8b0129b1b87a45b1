"""
共享测试夹具
"""

import logging

import numpy as np
import pytest
import yaml

from core.types import BoxPx, FrameRef, SceneDims, TargetObs
from model.params import ModelDims
from utils.config import RunConfig, config_from_dict


@pytest.fixture(autouse=True)
def _no_seed_override(monkeypatch):
    monkeypatch.delenv('MTMC_SEED_OVERRIDE', raising=False)


@pytest.fixture(autouse=True)
def _restore_logging():
    """命令行入口会重设根日志器，测试结束后恢复"""
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


@pytest.fixture
def scene_dims() -> SceneDims:
    return SceneDims(width=100.0, height=100.0, horizon=10, cameras=2)


@pytest.fixture
def small_dims() -> ModelDims:
    return ModelDims(d_raw=4, d_roi=6, d_st=2, heads=2, d_ff=16)


@pytest.fixture
def make_obs():
    """按 (框, 时刻, 相机, 外观) 构造检测"""
    def _make(box=(10.0, 10.0, 20.0, 30.0), time=1, camera=1, app=None, score=0.9, d_raw=4):
        vec = np.ones(d_raw) if app is None else np.asarray(app, dtype=np.float64)
        return TargetObs(box=BoxPx(*box), frame=FrameRef(time=time, camera=camera), app=vec, det_score=score)
    return _make


@pytest.fixture
def tiny_config(tmp_path) -> RunConfig:
    """小规模端到端配置：2 相机、3 身份、30 帧，模型与训练都很小"""
    return config_from_dict({
        'scenario': {
            'cameras': 2, 'frames': 30, 'identities': 3, 'seed': 5,
            'embedding': {'dim': 8, 'sigma': 0.02},
        },
        'model': {'d_raw': 8, 'd_roi': 16, 'd_st': 4, 'heads': 2, 'd_ff': 16},
        'tracker': {'window': 10, 'min_traj_len': 3},
        'train': {'iterations': 3, 'window_frames': 4, 'scenarios': 1, 'heldout_windows': 2},
        'paths': {
            'weights': str(tmp_path / 'out' / 'weights.json'),
            'output_dir': str(tmp_path / 'out'),
            'checkpoint_dir': str(tmp_path / 'ckpt'),
        },
    })


@pytest.fixture
def config_file(tiny_config, tmp_path) -> str:
    """tiny_config 写成 YAML，供命令行入口使用"""
    path = tmp_path / 'config.yaml'
    path.write_text(yaml.safe_dump(tiny_config.model_dump(mode='json'), sort_keys=False), encoding='utf-8')
    return str(path)
