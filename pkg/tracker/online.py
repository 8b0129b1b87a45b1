"""
在线推理 - 滑动窗口关联、记忆库复活、新轨迹生成、退役与最终输出
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from core.errors import DataError
from core.geometry import window_start
from core.types import TargetObs, Trajectory, sort_members
from model.association import similarity
from model.attention import decoder_forward, encoder_forward
from model.features import fused_features
from model.params import ModelParams
from .matching import gate_scores, hungarian, membership_matrix, trajectory_scores
from .state import ActiveTrajectory, CachedFrame, MemoryEntry, StepSummary, TrackerState


logger = logging.getLogger(__name__)


def memory_feature(history: Sequence[np.ndarray], n_mem: int) -> np.ndarray:
    """最近 min(n_mem, |history|) 个特征的算术平均"""
    if len(history) == 0:
        raise ValueError("memory_feature needs a non-empty history")
    if n_mem < 1:
        raise ValueError(f"n_mem must be >= 1, got {n_mem}")
    recent = list(history)[-n_mem:]
    return np.mean(np.stack(recent), axis=0)


def _validate(state: TrackerState, time: int, detections: Sequence[TargetObs]) -> None:
    if time < 1:
        raise DataError(f"Frame time must be >= 1, got {time}")
    if state.last_time is not None and time <= state.last_time:
        raise DataError(f"Time regression: step at {time} after {state.last_time}")
    for i, obs in enumerate(detections):
        if obs.frame.time != time:
            raise DataError(f"Detection {i} is stamped {obs.frame.time}, expected {time}")
        if not state.dims.contains_frame(obs.frame) or not state.dims.contains(obs.box):
            raise DataError(f"Detection {i} at {obs.frame} lies outside the scene: {obs.box}")


def _new_trajectory(state: TrackerState, obs: TargetObs, feature: np.ndarray) -> int:
    traj = ActiveTrajectory(id=state.next_id, n_mem=state.config.n_mem)
    traj.add(obs, feature)
    state.active[traj.id] = traj
    state.next_id += 1
    return traj.id


def _memory_pass(
    state: TrackerState,
    rows: List[int],
    feats: np.ndarray,
    exclude: set,
    params: ModelParams,
) -> dict:
    """
    缓冲区目标与记忆库（以及已离开窗口但尚未退役的轨迹）之间的第二轮关联

    记忆特征作为编码器输入，缓冲区特征作为解码器查询；概率大于 θ2 的匹配复活原轨迹。

    Returns:
        dict: 行下标 -> 复活的轨迹 id
    """
    cfg = state.config
    candidates, features = [], []
    for traj_id in sorted(state.active):
        traj = state.active[traj_id]
        if traj_id not in exclude and traj.history:
            candidates.append(traj_id)
            features.append(memory_feature(traj.history, cfg.n_mem))
    if cfg.use_memory:
        for traj_id in state.memory.ids():
            candidates.append(traj_id)
            features.append(state.memory.entries[traj_id].feature)
    if not candidates:
        return {}

    Fe = encoder_forward(np.stack(features), params.assoc)
    Qd = decoder_forward(feats[rows], Fe, params.assoc)
    probs, _ = gate_scores(similarity(Qd, Fe).values)
    revived = {}
    for r, c in hungarian(probs).items():
        if probs[r, c] > cfg.theta2:
            revived[rows[r]] = candidates[c]
    return revived


def step(
    state: TrackerState,
    time: int,
    detections: Sequence[TargetObs],
    params: ModelParams,
) -> Tuple[TrackerState, List[Optional[int]]]:
    """
    处理时刻 T 上所有相机的检测

    模型对 Q = 当前帧检测、F = 窗口缓存 + 当前帧只前向一次；随后按相机升序依次
    做窗口关联（G' = GM 取平均、门控、匈牙利、θ1）、记忆库复活（θ2）与新轨迹生成，
    每个相机之后重建成员矩阵，使后面的相机能看到前面相机刚分配的 id。

    Args:
        state: 跟踪器状态（原地更新）
        time: 当前时刻，必须严格递增
        detections: 该时刻的全部检测
        params: 模型参数

    Returns:
        Tuple[TrackerState, List[Optional[int]]]: 更新后的状态与每个检测的 id
        （低于检测阈值的检测为 None）

    Raises:
        DataError: 时间倒退、时间戳不一致或检测超出场景范围
    """
    _validate(state, time, detections)
    cfg = state.config
    summary = StepSummary(time=time)
    assigned: List[Optional[int]] = [None] * len(detections)

    state.cache.evict_before(window_start(time, cfg.window))

    kept = [i for i, d in enumerate(detections) if d.det_score >= cfg.det_threshold]
    summary.dropped = len(detections) - len(kept)
    obs = [detections[i] for i in kept]
    state.buffer = []

    if obs:
        feats = fused_features(obs, state.dims, params.encoders)
        _, cache_feats, cache_ids = state.cache.flatten(feats.shape[1])
        F = np.concatenate([cache_feats, feats], axis=0)
        Fe = encoder_forward(F, params.assoc)
        Qd = decoder_forward(feats, Fe, params.assoc)
        G = similarity(Qd, Fe).values

        current_ids: List[Optional[int]] = [None] * len(obs)
        for camera in sorted({o.frame.camera for o in obs}):
            rows = [k for k, o in enumerate(obs) if o.frame.camera == camera]
            col_ids = cache_ids + current_ids
            candidates = sorted({i for i in col_ids if i is not None})

            matched = {}
            if candidates:
                M = membership_matrix(col_ids, candidates)
                probs, _ = gate_scores(trajectory_scores(G[rows], M))
                for r, c in hungarian(probs).items():
                    if probs[r, c] > cfg.theta1:
                        matched[rows[r]] = candidates[c]
            for k, traj_id in matched.items():
                state.active[traj_id].add(obs[k], feats[k])
                current_ids[k] = traj_id
            summary.window_matches += len(matched)

            leftovers = [k for k in rows if k not in matched]
            state.buffer.extend(obs[k] for k in leftovers)
            revived = {}
            if leftovers:
                revived = _memory_pass(state, leftovers, feats, set(candidates), params)
            for k, traj_id in revived.items():
                if traj_id in state.memory:
                    state.active[traj_id] = state.memory.pop(traj_id).trajectory
                    logger.debug(f"t={time}: trajectory {traj_id} revived from memory")
                state.active[traj_id].add(obs[k], feats[k])
                current_ids[k] = traj_id
                summary.revived += 1

            for k in leftovers:
                if k not in revived:
                    current_ids[k] = _new_trajectory(state, obs[k], feats[k])
                    summary.created += 1

        state.cache.append(CachedFrame(time=time, observations=obs, features=feats, ids=current_ids))
        for i, traj_id in zip(kept, current_ids):
            assigned[i] = traj_id

    # 超过 W 帧未出现的轨迹退役到记忆库
    for traj_id in sorted(state.active):
        traj = state.active[traj_id]
        if traj.last_seen < time - cfg.window:
            del state.active[traj_id]
            entry = MemoryEntry(id=traj_id, feature=memory_feature(traj.history, cfg.n_mem),
                                last_seen=traj.last_seen, trajectory=traj)
            for old in state.memory.add(entry):
                state.evicted.append(old.trajectory)
            summary.retired += 1

    state.last_time = time
    state.last_summary = summary
    logger.debug(f"t={time}: {summary}")
    return state, assigned


def finalize(state: TrackerState) -> List[Trajectory]:
    """
    输出全部轨迹（活跃 + 记忆库 + 被淘汰），丢弃成员数少于 min_traj_len 的轨迹

    Returns:
        List[Trajectory]: 按 id 排序，成员按 (time, camera) 排序
    """
    pool = list(state.active.values())
    pool += [entry.trajectory for entry in state.memory.entries.values()]
    pool += state.evicted
    out = []
    for traj in sorted(pool, key=lambda t: t.id):
        if len(traj.members) < state.config.min_traj_len:
            continue
        members, scores = sort_members(traj.members, traj.scores)
        out.append(Trajectory(id=traj.id, members=members, scores=scores))
    logger.info(f"Finalized {len(out)} of {len(pool)} trajectories (min length {state.config.min_traj_len})")
    return out
