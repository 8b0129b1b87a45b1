"""
selftest 命令 - 运行各组独立 oracle 检查并汇总结果
"""

import itertools
import logging
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from core.types import BoxPx, FrameRef, SceneDims, TargetObs, Trajectory
from metrics.cross_view import cvidf1, cvma
from model.association import SimilarityMatrix, per_frame_softmax
from model.gradcheck import check_gradients
from model.params import ModelDims, init_params
from model.training import TrainingBatch, loss_gradients
from tracker.matching import hungarian


logger = logging.getLogger(__name__)

# 故障注入时被放大的梯度张量
FAULT_TENSOR = 'dec.ffn.w2'


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float


# ==================== 匈牙利匹配 ====================

def brute_force_assignment(scores: np.ndarray) -> float:
    """遍历所有一对一匹配的最大总分"""
    n, m = scores.shape
    if n > m:
        return brute_force_assignment(scores.T)
    perms = np.array(list(itertools.permutations(range(m), n)))
    totals = scores[np.arange(n)[None, :], perms].sum(axis=1)
    return float(totals.max())


def suite_hungarian(trials: int = 1000, max_size: int = 7, seed: int = 0) -> Tuple[bool, str]:
    rng = np.random.default_rng(seed)
    for trial in range(trials):
        n, m = (int(v) for v in rng.integers(1, max_size + 1, size=2))
        scores = rng.uniform(-1.0, 1.0, size=(n, m))
        assignment = hungarian(scores)
        total = sum(scores[r, c] for r, c in assignment.items())
        if len(assignment) != min(n, m) or abs(total - brute_force_assignment(scores)) > 1e-9:
            return False, f"trial {trial}: {n}x{m} assignment total {total} differs from brute force"
    return True, f"{trials} random matrices up to {max_size}x{max_size}"


# ==================== 按帧 softmax ====================

def suite_softmax(trials: int = 1000, seed: int = 0) -> Tuple[bool, str]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        n_q, n = (int(v) for v in rng.integers(1, 9, size=2))
        frames = [FrameRef(time=int(rng.integers(1, 4)), camera=int(rng.integers(1, 3))) for _ in range(n)]
        values = rng.normal(scale=float(rng.uniform(0.1, 50.0)), size=(n_q, n))
        probs = per_frame_softmax(SimilarityMatrix(values=values, col_frames=frames))
        for g, cols in enumerate(probs.groups.columns):
            sums = probs.probs[:, cols].sum(axis=1) + probs.null_probs[:, g]
            worst = max(worst, float(np.abs(sums - 1.0).max()))
    return worst < 1e-9, f"{trials} instances, max |sum - 1| = {worst:.2e}"


# ==================== 梯度 ====================

GRADCHECK_DIMS = ModelDims(d_raw=4, d_roi=6, d_st=2, heads=2, d_ff=16)


def random_batch(rng: np.random.Generator, targets: int, d_raw: int,
                 identities: int = 3, times: int = 3, cameras: int = 2) -> TrainingBatch:
    """小规模随机训练窗口，同一帧内标签不重复"""
    dims = SceneDims(width=100.0, height=100.0, horizon=times, cameras=cameras)
    observations, labels = [], []
    used = set()
    for _ in range(targets):
        frame = FrameRef(time=int(rng.integers(1, times + 1)), camera=int(rng.integers(1, cameras + 1)))
        x, y = rng.uniform(0, 80, size=2)
        w, h = rng.uniform(5, 20, size=2)
        box = BoxPx(float(x), float(y), float(x + w), float(y + h))
        label: Optional[int] = int(rng.integers(1, identities + 1))
        if (label, frame) in used or rng.uniform() < 0.15:
            label = None
        else:
            used.add((label, frame))
        observations.append(TargetObs(box=box, frame=frame, app=rng.normal(size=d_raw)))
        labels.append(label)
    return TrainingBatch(observations=observations, labels=labels, dims=dims)


def faulty_gradients(batch, params):
    loss, grads = loss_gradients(batch, params)
    grads[FAULT_TENSOR] = grads[FAULT_TENSOR] * 1.5 + 1e-3
    return loss, grads


def suite_gradients(instances: int = 20, seed: int = 0, inject_fault: bool = False,
                    coords_per_tensor: int = 6) -> Tuple[bool, str]:
    rng = np.random.default_rng(seed)
    grad_fn = faulty_gradients if inject_fault else loss_gradients
    worst = 0.0
    worst_at = ''
    for k in range(instances):
        params = init_params(GRADCHECK_DIMS, seed=seed + k)
        batch = random_batch(rng, targets=int(rng.integers(2, 13)), d_raw=GRADCHECK_DIMS.d_raw)
        result = check_gradients(batch, params, max_coords_per_tensor=coords_per_tensor,
                                 seed=seed + k, grad_fn=grad_fn)
        if result.max_rel_error > worst:
            worst, worst_at = result.max_rel_error, result.worst
    return worst < 1e-4, f"{instances} instances, max rel err {worst:.2e} at {worst_at or '-'}"


# ==================== 指标 ====================

_BOX_A = BoxPx(0.0, 0.0, 10.0, 10.0)
_BOX_B = BoxPx(50.0, 50.0, 60.0, 60.0)
_BOX_FAR = BoxPx(200.0, 200.0, 210.0, 210.0)


def _traj(traj_id: int, cells: List[Tuple[int, int, BoxPx]]) -> Trajectory:
    members = sorted(((FrameRef(time=t, camera=c), box) for t, c, box in cells), key=lambda m: m[0])
    return Trajectory(id=traj_id, members=members)


def metric_fixtures() -> Dict[str, Tuple[List[Trajectory], List[Trajectory], Dict]]:
    """
    手工枚举的指标样例：名称 -> (真值, 预测, 期望值)

    两相机三帧；A、B 两个身份在所有帧、所有相机可见（merge 样例除外）。
    """
    both = [(t, c) for t in (1, 2, 3) for c in (1, 2)]
    gt = [_traj(1, [(t, c, _BOX_A) for t, c in both]), _traj(2, [(t, c, _BOX_B) for t, c in both])]

    perfect = [_traj(7, [(t, c, _BOX_A) for t, c in both]), _traj(8, [(t, c, _BOX_B) for t, c in both])]

    # A 在相机 1 为 7、相机 2 为 9：按 (time, camera) 顺序每次切换都是误配，共 5 次
    split = [
        _traj(7, [(t, 1, _BOX_A) for t in (1, 2, 3)]),
        _traj(9, [(t, 2, _BOX_A) for t in (1, 2, 3)]),
        _traj(8, [(t, c, _BOX_B) for t, c in both]),
    ]

    # A 在 t=1,2 出现，B 只在 t=3 出现，预测把两者并成一个 id
    merge_gt = [_traj(1, [(t, c, _BOX_A) for t in (1, 2) for c in (1, 2)]),
                _traj(2, [(3, c, _BOX_B) for c in (1, 2)])]
    merge = [_traj(7, [(t, c, _BOX_A) for t in (1, 2) for c in (1, 2)] + [(3, c, _BOX_B) for c in (1, 2)])]

    return {
        'perfect': (gt, perfect, {'cvma': 1.0, 'mismatches': 0, 'misses': 0, 'false_positives': 0,
                                  'idtp': 12, 'idfp': 0, 'idfn': 0, 'cvidf1': 1.0}),
        'split': (gt, split, {'cvma': 1.0 - 10.0 / 12.0, 'mismatches': 5, 'misses': 0, 'false_positives': 0,
                              'idtp': 9, 'idfp': 3, 'idfn': 3, 'cvidf1': 0.75}),
        'merge': (merge_gt, merge, {'cvma': 1.0, 'mismatches': 0, 'misses': 0, 'false_positives': 0,
                                    'idtp': 4, 'idfp': 2, 'idfn': 2, 'cvidf1': 2.0 / 3.0}),
    }


def single_camera_fixture() -> Tuple[List[Trajectory], List[Trajectory], Dict]:
    """
    单相机三帧：t=2 漏检 B 且出现一个误检，t=3 B 换成新 id（一次误配）

    期望计数 g=6, m=1, fp=1, mme=1，CVMA = 1 - (1 + 1 + 2) / 6。
    """
    gt = [_traj(1, [(t, 1, _BOX_A) for t in (1, 2, 3)]), _traj(2, [(t, 1, _BOX_B) for t in (1, 2, 3)])]
    preds = [
        _traj(1, [(t, 1, _BOX_A) for t in (1, 2, 3)]),
        _traj(2, [(1, 1, _BOX_B)]),
        _traj(3, [(2, 1, _BOX_FAR)]),
        _traj(4, [(3, 1, _BOX_B)]),
    ]
    return gt, preds, {'gt_count': 6, 'misses': 1, 'false_positives': 1, 'mismatches': 1, 'cvma': 1.0 - 4.0 / 6.0}


def suite_metrics() -> Tuple[bool, str]:
    failures = []
    for name, (gt, preds, expected) in metric_fixtures().items():
        score, counters = cvma(gt, preds)
        ids = cvidf1(gt, preds)
        observed = {
            'cvma': score, 'mismatches': sum(c.mismatches for c in counters),
            'misses': sum(c.misses for c in counters), 'false_positives': sum(c.false_positives for c in counters),
            'idtp': ids.idtp, 'idfp': ids.idfp, 'idfn': ids.idfn, 'cvidf1': ids.cvidf1,
        }
        for key, value in expected.items():
            if observed[key] is None or abs(observed[key] - value) > 1e-12:
                failures.append(f"{name}.{key}={observed[key]} (expected {value})")

    gt, preds, expected = single_camera_fixture()
    score, counters = cvma(gt, preds)
    observed = {
        'gt_count': sum(c.gt_count for c in counters), 'misses': sum(c.misses for c in counters),
        'false_positives': sum(c.false_positives for c in counters),
        'mismatches': sum(c.mismatches for c in counters), 'cvma': score,
    }
    for key, value in expected.items():
        if observed[key] is None or abs(observed[key] - value) > 1e-12:
            failures.append(f"single_camera.{key}={observed[key]} (expected {value})")
    if failures:
        return False, '; '.join(failures)
    return True, f"{len(metric_fixtures())} cross-view fixtures + single-camera fixture"


# ==================== 汇总 ====================

def cmd_selftest(inject_gradient_fault: bool = False, quick: bool = False) -> List[SuiteResult]:
    """
    运行全部 oracle 检查

    Args:
        inject_gradient_fault: 在梯度检查中使用故意出错的梯度，用于验证故障隔离
        quick: 缩小各组的实例数

    Returns:
        List[SuiteResult]: 每组的结果
    """
    scale = 10 if quick else 1
    suites: List[Tuple[str, Callable[[], Tuple[bool, str]]]] = [
        ('hungarian', lambda: suite_hungarian(trials=1000 // scale)),
        ('gradient', lambda: suite_gradients(instances=max(2, 20 // scale), inject_fault=inject_gradient_fault)),
        ('softmax', lambda: suite_softmax(trials=1000 // scale)),
        ('metrics', suite_metrics),
    ]
    results = []
    for name, run in suites:
        start = time.perf_counter()
        try:
            passed, detail = run()
        except Exception as e:
            logger.exception(f"Suite {name} raised")
            passed, detail = False, f"{type(e).__name__}: {e}"
        elapsed = time.perf_counter() - start
        logger.info(f"Suite {name}: {'PASS' if passed else 'FAIL'} ({elapsed:.1f}s) {detail}")
        results.append(SuiteResult(name=name, passed=passed, detail=detail, seconds=elapsed))
    return results
