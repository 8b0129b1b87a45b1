"""
匹配工具 - 成员矩阵、轨迹得分聚合、带空目标的门控概率、匈牙利匹配
"""

from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from core.errors import InvariantError
from model.layers import softmax_rows


# 判定两个匹配总分相等的相对容差
TIE_TOLERANCE = 1e-9


def membership_matrix(target_ids: Sequence[Optional[int]], trajectory_ids: Sequence[int]) -> np.ndarray:
    """
    成员矩阵 M：M_ij = 1 当且仅当目标 i 属于轨迹 j

    Args:
        target_ids: 窗口内每个目标的轨迹 id，未分配为 None
        trajectory_ids: 候选轨迹 id（列顺序）

    Returns:
        np.ndarray: N x N_R 的 0/1 矩阵

    Raises:
        InvariantError: 目标引用了不在候选中的轨迹
    """
    column = {traj_id: j for j, traj_id in enumerate(trajectory_ids)}
    M = np.zeros((len(target_ids), len(trajectory_ids)))
    for i, traj_id in enumerate(target_ids):
        if traj_id is None:
            continue
        if traj_id not in column:
            raise InvariantError(f"Window target {i} references unknown trajectory {traj_id}")
        M[i, column[traj_id]] = 1.0
    return M


def trajectory_scores(G: np.ndarray, M: np.ndarray) -> np.ndarray:
    """G' = G M，再按每条轨迹的窗口成员数取平均"""
    if G.ndim != 2 or M.ndim != 2 or G.shape[1] != M.shape[0]:
        raise ValueError(f"Cannot aggregate similarity {G.shape} with membership {M.shape}")
    counts = M.sum(axis=0)
    if np.any(counts == 0):
        raise ValueError("Every trajectory column needs at least one window member")
    return (G @ M) / counts


def gate_scores(scores: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    轨迹得分加上恒为 0 的空目标得分后做 softmax

    Args:
        scores: 单个查询的得分向量，或按行排列的多个查询

    Returns:
        Tuple[np.ndarray, np.ndarray]: (轨迹概率, 空目标概率)
    """
    scores = np.asarray(scores, dtype=np.float64)
    single = scores.ndim == 1
    rows = np.atleast_2d(scores)
    full = softmax_rows(np.concatenate([np.zeros((rows.shape[0], 1)), rows], axis=1))
    probs, null = full[:, 1:], full[:, 0]
    if single:
        return probs[0], null[0]
    return probs, null


def _solve(cost: np.ndarray) -> Optional[Tuple[Dict[int, int], float]]:
    """最小化代价的一对一匹配；inf 表示禁止，无可行解时返回 None"""
    try:
        rows, cols = linear_sum_assignment(cost)
    except ValueError:
        return None
    total = float(cost[rows, cols].sum())
    if not np.isfinite(total):
        return None
    return {int(r): int(c) for r, c in zip(rows, cols)}, total


def _force(cost: np.ndarray, row: int, col: int) -> np.ndarray:
    """只允许 row 与 col 互相匹配"""
    forced = cost.copy()
    forced[row, :] = np.inf
    forced[:, col] = np.inf
    forced[row, col] = cost[row, col]
    return forced


def hungarian(scores: np.ndarray, maximize: bool = True) -> Dict[int, int]:
    """
    矩形得分矩阵上的一对一最优匹配

    最优解不唯一时取字典序最小的一个：按行下标依次为每行选可保持最优总分的最小列下标。

    Args:
        scores: 得分矩阵（行为查询，列为轨迹）
        maximize: True 时最大化总分，否则最小化

    Returns:
        Dict[int, int]: 行下标 -> 列下标
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2:
        raise ValueError(f"hungarian expects a 2-D matrix, got shape {scores.shape}")
    if scores.size == 0:
        return {}
    if not np.all(np.isfinite(scores)):
        raise ValueError("hungarian expects finite scores")

    cost = -scores if maximize else scores.copy()
    assignment, best = _solve(cost)
    tol = TIE_TOLERANCE * max(1.0, abs(best))
    for row in range(cost.shape[0]):
        current = assignment.get(row)
        limit = cost.shape[1] if current is None else current
        for col in range(limit):
            trial = _force(cost, row, col)
            result = _solve(trial)
            if result is not None and result[1] <= best + tol:
                assignment, cost = result[0], trial
                break
        else:
            if current is not None:
                cost = _force(cost, row, current)
    return assignment
