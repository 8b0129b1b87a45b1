"""
Stages module - 每个命令行子命令对应的执行函数
"""

from .simulate import build_scene, cmd_simulate, GT_FILE, DET_FILE
from .train import build_sampler, heldout_batches, train_params, cmd_train
from .track import load_model, track_detections, cmd_track
from .evaluate import cmd_evaluate
from .selftest import SuiteResult, cmd_selftest, metric_fixtures, single_camera_fixture
from .ablate import ABLATION_KEYS, variant_config, cmd_ablate

__all__ = [
    'build_scene', 'cmd_simulate', 'GT_FILE', 'DET_FILE',
    'build_sampler', 'heldout_batches', 'train_params', 'cmd_train',
    'load_model', 'track_detections', 'cmd_track',
    'cmd_evaluate',
    'SuiteResult', 'cmd_selftest', 'metric_fixtures', 'single_camera_fixture',
    'ABLATION_KEYS', 'variant_config', 'cmd_ablate',
]
