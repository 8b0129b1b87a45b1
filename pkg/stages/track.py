"""
track 命令 - 按时间顺序把检测流送入在线跟踪器并写出预测轨迹
"""

import logging
from typing import Dict, List, Optional, Sequence

from core.errors import ConfigError, DataError
from core.types import SceneDims, TargetObs, Trajectory
from model.params import ModelDims, ModelParams, appearance_matching_params
from tracker.online import finalize, step
from tracker.state import TrackerConfig, create_initial_state
from utils.checkpoint import load_weights
from utils.config import RunConfig
from utils.trackio import read_detections, records_from_trajectories, write_tracks


logger = logging.getLogger(__name__)


def _same_dims(a: ModelDims, b: ModelDims) -> bool:
    return (a.d_raw, a.d_roi, a.d_st, a.heads, a.ffn_width) == (b.d_raw, b.d_roi, b.d_st, b.heads, b.ffn_width)


def load_model(config: RunConfig, weights_path: Optional[str] = None, matching_params: bool = False) -> ModelParams:
    """
    读取权重（或构造外观匹配参数）并与配置的模型尺寸核对

    Raises:
        ConfigError: 权重头部与配置尺寸不一致
    """
    dims = config.model.dims
    if matching_params:
        logger.info("Using appearance-matching parameters")
        return appearance_matching_params(dims)
    params = load_weights(weights_path or config.paths.weights)
    if not _same_dims(params.dims, dims):
        raise ConfigError(f"Weights dims {params.dims} do not match config model dims {dims}")
    return params


def track_detections(detections: Sequence[TargetObs], params: ModelParams,
                     tracker_config: TrackerConfig, dims: SceneDims) -> List[Trajectory]:
    """
    逐时刻运行跟踪器

    Raises:
        DataError: 输入检测的时间不是非递减的
    """
    frames: Dict[int, List[TargetObs]] = {}
    last = 0
    for k, obs in enumerate(detections):
        if obs.frame.time < last:
            raise DataError(f"Detections are not in time order: record {k + 1} at t={obs.frame.time} after t={last}")
        last = obs.frame.time
        frames.setdefault(obs.frame.time, []).append(obs)

    state = create_initial_state(tracker_config, dims)
    for time in sorted(frames):
        state, _ = step(state, time, frames[time], params)
        summary = state.last_summary
        logger.debug(f"t={time}: matched={summary.window_matches} revived={summary.revived} "
                     f"created={summary.created} retired={summary.retired}")
    return finalize(state)


def cmd_track(config: RunConfig, detections_path: str, out_path: str,
              weights_path: Optional[str] = None, matching_params: bool = False) -> Dict:
    """
    读取检测文件，跟踪并写出预测轨迹文件

    Returns:
        Dict: {'pred': 输出路径, 'trajectories': 轨迹数}
    """
    params = load_model(config, weights_path, matching_params)
    detections = read_detections(detections_path)
    if detections and detections[0].app.shape[0] != params.dims.d_raw:
        raise ConfigError(f"Appearance vectors have length {detections[0].app.shape[0]}, "
                          f"model expects {params.dims.d_raw}")
    trajectories = track_detections(detections, params, config.tracker.tracker_config(), config.scenario.dims)
    write_tracks(out_path, records_from_trajectories(trajectories))
    logger.info(f"Tracked {len(detections)} detections into {len(trajectories)} trajectories")
    return {'pred': out_path, 'trajectories': len(trajectories)}
