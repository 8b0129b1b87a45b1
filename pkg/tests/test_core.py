import math

import numpy as np
import pytest

from core.geometry import assign_targets_to_gt, iou, iou_matrix, window_start
from core.types import BoxPx, FrameRef, SceneDims, Trajectory


# ==================== IoU ====================

def test_iou_identical_boxes():
    assert iou(BoxPx(0, 0, 10, 10), BoxPx(0, 0, 10, 10)) == 1.0


def test_iou_disjoint_boxes():
    assert iou(BoxPx(0, 0, 1, 1), BoxPx(2, 2, 3, 3)) == 0.0


def test_iou_half_overlap():
    assert math.isclose(iou(BoxPx(0, 0, 10, 10), BoxPx(5, 0, 15, 10)), 1.0 / 3.0)


def test_iou_zero_area_boxes():
    assert iou(BoxPx(0, 0, 0, 0), BoxPx(0, 0, 0, 0)) == 0.0


def test_iou_matrix_matches_scalar():
    a = [BoxPx(0, 0, 10, 10), BoxPx(3, 3, 8, 9)]
    b = [BoxPx(5, 0, 15, 10), BoxPx(0, 0, 10, 10), BoxPx(50, 50, 60, 60)]
    m = iou_matrix(a, b)
    assert m.shape == (2, 3)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            assert math.isclose(m[i, j], iou(x, y), abs_tol=1e-12)


def test_iou_matrix_empty():
    assert iou_matrix([], [BoxPx(0, 0, 1, 1)]).shape == (0, 1)


def test_box_rejects_bad_corners():
    with pytest.raises(ValueError):
        BoxPx(10, 0, 5, 10)
    with pytest.raises(ValueError):
        BoxPx(0, 0, float('nan'), 1)


# ==================== 类型 ====================

def test_frame_ref_orders_by_time_then_camera():
    frames = [FrameRef(time=2, camera=1), FrameRef(time=1, camera=2), FrameRef(time=1, camera=1)]
    assert sorted(frames) == [FrameRef(1, 1), FrameRef(1, 2), FrameRef(2, 1)]


def test_frame_ref_is_one_based():
    with pytest.raises(ValueError):
        FrameRef(time=0, camera=1)


def test_trajectory_rejects_duplicate_frame():
    box = BoxPx(0, 0, 1, 1)
    with pytest.raises(ValueError):
        Trajectory(id=1, members=[(FrameRef(1, 1), box), (FrameRef(1, 1), box)])


def test_trajectory_rejects_unsorted_members():
    box = BoxPx(0, 0, 1, 1)
    with pytest.raises(ValueError):
        Trajectory(id=1, members=[(FrameRef(2, 1), box), (FrameRef(1, 1), box)])


def test_scene_dims_contains():
    dims = SceneDims(width=100, height=50, horizon=10, cameras=2)
    assert dims.contains(BoxPx(0, 0, 100, 50))
    assert not dims.contains(BoxPx(0, 0, 101, 50))
    assert dims.contains_frame(FrameRef(10, 2))
    assert not dims.contains_frame(FrameRef(11, 1))


# ==================== 检测到真值的分配 ====================

def test_assign_exact_match(make_obs):
    det = make_obs(box=(0, 0, 10, 10))
    assert assign_targets_to_gt([det], [(4, BoxPx(0, 0, 10, 10))]) == [4]


def test_assign_picks_highest_iou(make_obs):
    gt = BoxPx(0, 0, 100, 10)
    high = make_obs(box=(0, 0, 70, 10))     # IoU 0.7
    low = make_obs(box=(0, 0, 65, 10))      # IoU 0.65
    assert assign_targets_to_gt([low, high], [(1, gt)]) == [None, 1]


def test_assign_below_threshold_is_unlabeled(make_obs):
    det = make_obs(box=(0, 0, 55, 10))      # IoU 0.55
    assert assign_targets_to_gt([det], [(1, BoxPx(0, 0, 100, 10))]) == [None]


def test_assign_two_gt_on_one_detection_keeps_higher(make_obs):
    det = make_obs(box=(0, 0, 100, 10))
    gt = [(1, BoxPx(0, 0, 70, 10)), (2, BoxPx(0, 0, 90, 10))]
    assert assign_targets_to_gt([det], gt) == [2]


def test_assign_empty_inputs(make_obs):
    assert assign_targets_to_gt([], [(1, BoxPx(0, 0, 1, 1))]) == []
    assert assign_targets_to_gt([make_obs()], []) == [None]


def test_assign_iou_exactly_at_threshold_is_unlabeled(make_obs):
    det = make_obs(box=(0, 0, 6, 10))       # IoU 恰为 0.6
    assert assign_targets_to_gt([det], [(1, BoxPx(0, 0, 10, 10))]) == [None]


def test_assign_equal_iou_prefers_first_detection(make_obs):
    left = make_obs(box=(0, 0, 8, 10))
    right = make_obs(box=(2, 0, 10, 10))
    assert assign_targets_to_gt([left, right], [(1, BoxPx(0, 0, 10, 10))]) == [1, None]


def _assign_by_enumeration(dets, gts):
    """逐个真值框取 IoU 最大的检测（并列取最小下标），超过 0.6 才生效；冲突时 IoU 高者胜，并列取先出现的真值"""
    labels = [None] * len(dets)
    if not dets:
        return labels
    won = [None] * len(dets)
    for traj_id, gt_box in gts:
        values = [iou(d.box, gt_box) for d in dets]
        n = values.index(max(values))
        if values[n] > 0.6 and (won[n] is None or values[n] > won[n]):
            labels[n], won[n] = traj_id, values[n]
    return labels


def test_assign_agrees_with_enumeration(make_obs):
    rng = np.random.default_rng(2024)

    def grid_box():
        x, y = (int(v) for v in rng.integers(0, 8, size=2))
        w, h = (int(v) for v in rng.integers(2, 7, size=2))
        return x, y, x + w, y + h

    def jittered(box):
        # 整数坐标让并列与恰好等于阈值的情况经常出现
        x1, y1, x2, y2 = (c + int(rng.integers(-1, 2)) for c in box)
        return min(x1, x2 - 1), min(y1, y2 - 1), x2, y2

    for _ in range(1000):
        gt_boxes = [grid_box() for _ in range(int(rng.integers(0, 4)))]
        boxes = [jittered(b) for b in gt_boxes for _ in range(int(rng.integers(0, 3)))]
        boxes += [grid_box() for _ in range(int(rng.integers(0, 3)))]
        order = rng.permutation(len(boxes))
        dets = [make_obs(box=boxes[k]) for k in order]
        gts = [(k + 1, BoxPx(*b)) for k, b in enumerate(gt_boxes)]
        assert assign_targets_to_gt(dets, gts) == _assign_by_enumeration(dets, gts)


# ==================== 窗口 ====================

@pytest.mark.parametrize('t, w, expected', [(1, 60, 1), (100, 60, 41), (60, 60, 1), (61, 60, 2)])
def test_window_start(t, w, expected):
    assert window_start(t, w) == expected


def test_window_start_rejects_zero_window():
    with pytest.raises(ValueError):
        window_start(5, 0)
