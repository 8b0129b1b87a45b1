import json

import numpy as np
import pytest

from core.errors import DataError
from core.types import BoxPx, FrameRef, TargetObs, Trajectory
from model.params import ModelDims, init_params
from utils.checkpoint import load_checkpoint, load_weights, save_checkpoint, save_loss_curve, save_weights
from utils.trackio import (
    TRACK_HEADER,
    TrackRecord,
    appearance_path,
    read_detections,
    read_tracks,
    records_from_detections,
    records_from_trajectories,
    trajectories_from_records,
    write_appearance,
    write_tracks,
)


# ==================== 轨迹文件 ====================

def test_track_file_round_trip(tmp_path):
    traj = Trajectory(id=3, members=[(FrameRef(1, 1), BoxPx(1.5, 2.0, 10.0, 20.25)),
                                     (FrameRef(1, 2), BoxPx(0.0, 0.0, 4.0, 4.0)),
                                     (FrameRef(2, 1), BoxPx(2.0, 2.0, 11.0, 21.0))],
                      scores=[0.9, 0.8, 0.7])
    path = str(tmp_path / 'pred.txt')
    assert write_tracks(path, records_from_trajectories([traj])) == 3
    loaded = trajectories_from_records(read_tracks(path))
    assert len(loaded) == 1
    assert loaded[0].id == 3
    assert loaded[0].members == traj.members
    assert loaded[0].scores == pytest.approx(traj.scores)


def test_records_are_sorted_by_frame_camera_id(tmp_path):
    a = Trajectory(id=2, members=[(FrameRef(2, 1), BoxPx(0, 0, 1, 1))])
    b = Trajectory(id=1, members=[(FrameRef(1, 2), BoxPx(0, 0, 1, 1)), (FrameRef(2, 1), BoxPx(0, 0, 2, 2))])
    order = [(r.frame, r.camera, r.id) for r in records_from_trajectories([a, b])]
    assert order == [(1, 2, 1), (2, 1, 1), (2, 1, 2)]


def test_file_starts_with_header(tmp_path):
    path = tmp_path / 'empty.txt'
    write_tracks(str(path), [])
    assert path.read_text(encoding='utf-8') == TRACK_HEADER + '\n'
    assert read_tracks(str(path)) == []


def test_missing_track_file(tmp_path):
    with pytest.raises(DataError, match='not found'):
        read_tracks(str(tmp_path / 'nope.txt'))


def test_bad_header(tmp_path):
    path = tmp_path / 'bad.txt'
    path.write_text('frame,camera\n', encoding='utf-8')
    with pytest.raises(DataError, match=':1:'):
        read_tracks(str(path))


@pytest.mark.parametrize('line', [
    '1,1,1,0,0,10\n',
    '1,1,x,0,0,10,10,1.0\n',
    '0,1,1,0,0,10,10,1.0\n',
    '1,1,1,10,0,5,10,1.0\n',
])
def test_malformed_line_reports_line_number(tmp_path, line):
    path = tmp_path / 'bad.txt'
    path.write_text(TRACK_HEADER + '\n1,1,1,0,0,10,10,1.0\n' + line, encoding='utf-8')
    with pytest.raises(DataError, match=r'bad\.txt:3:'):
        read_tracks(str(path))


def test_negative_id_is_unassigned(tmp_path):
    path = tmp_path / 'det.txt'
    path.write_text(TRACK_HEADER + '\n2,5,-1,0,0,10,10,0.5\n', encoding='utf-8')
    (record,) = read_tracks(str(path))
    assert record.id is None
    assert trajectories_from_records([record]) == []


def test_duplicate_frame_in_track_is_rejected():
    records = [TrackRecord(camera=1, frame=1, id=4, box=BoxPx(0, 0, 1, 1)),
               TrackRecord(camera=1, frame=1, id=4, box=BoxPx(0, 0, 2, 2))]
    with pytest.raises(DataError):
        trajectories_from_records(records)


# ==================== 检测与外观旁路 ====================

def _detections(d_raw=3):
    rng = np.random.default_rng(0)
    return [TargetObs(box=BoxPx(0, 0, 5, 5), frame=FrameRef(t, c), app=rng.normal(size=d_raw), det_score=0.75)
            for t in (1, 2) for c in (1, 2)]


def test_detection_round_trip_keeps_appearance(tmp_path):
    obs = _detections()
    path = str(tmp_path / 'det.txt')
    write_tracks(path, records_from_detections(obs))
    write_appearance(path, obs, d_raw=3)
    loaded = read_detections(path)
    assert [o.frame for o in loaded] == [o.frame for o in obs]
    for a, b in zip(loaded, obs):
        np.testing.assert_array_equal(a.app, b.app)
        assert a.det_score == pytest.approx(0.75)


def test_missing_appearance_sidecar(tmp_path):
    path = str(tmp_path / 'det.txt')
    write_tracks(path, records_from_detections(_detections()))
    with pytest.raises(DataError, match='sidecar'):
        read_detections(path)


def test_sidecar_row_count_must_match(tmp_path):
    obs = _detections()
    path = str(tmp_path / 'det.txt')
    write_tracks(path, records_from_detections(obs))
    write_appearance(path, obs[:2], d_raw=3)
    with pytest.raises(DataError, match='rows'):
        read_detections(path)


def test_appearance_path_suffix():
    assert appearance_path('out/det.txt') == 'out/det.txt.app.npy'


# ==================== 权重 ====================

def test_weights_round_trip_is_exact(tmp_path):
    params = init_params(ModelDims(d_raw=3, d_roi=4, d_st=2, heads=2, d_ff=5), seed=8)
    path = str(tmp_path / 'w' / 'weights.json')
    digest = save_weights(params, path)
    assert len(digest) == 64
    loaded = load_weights(path)
    assert loaded.dims == params.dims
    for name, tensor in params.named_tensors().items():
        np.testing.assert_array_equal(loaded.named_tensors()[name], tensor)


def test_tampered_weights_fail_digest(tmp_path):
    path = tmp_path / 'weights.json'
    save_weights(init_params(ModelDims(d_raw=2, d_roi=2, d_st=2, heads=2), seed=0), str(path))
    payload = json.loads(path.read_text(encoding='utf-8'))
    payload['header']['heads'] = 4
    path.write_text(json.dumps(payload), encoding='utf-8')
    with pytest.raises(DataError, match='sha256'):
        load_weights(str(path))


def test_weights_file_errors(tmp_path):
    with pytest.raises(DataError):
        load_weights(str(tmp_path / 'missing.json'))
    bad = tmp_path / 'bad.json'
    bad.write_text('{not json', encoding='utf-8')
    with pytest.raises(DataError):
        load_weights(str(bad))
    other = tmp_path / 'other.json'
    other.write_text(json.dumps({'format': 'something-else'}), encoding='utf-8')
    with pytest.raises(DataError, match='format'):
        load_weights(str(other))


def test_loss_curve_file(tmp_path):
    path = save_loss_curve([1.5, 0.25], str(tmp_path / 'weights.json'))
    lines = open(path, encoding='utf-8').read().splitlines()
    assert lines[0] == 'iteration,loss'
    assert lines[1].startswith('1,1.5')
    assert len(lines) == 3


# ==================== 检查点 ====================

def test_checkpoint_round_trip(tmp_path):
    state = {'completed_nodes': ['simulate', 'train'], 'paths': {'gt': 'out/gt.txt'},
             'heldout_loss': {'initial': 2.0, 'final': 1.0}, 'metrics': {}, 'config': object()}
    path = save_checkpoint(state, str(tmp_path / 'ckpt'), 'train')
    assert path.endswith('checkpoint_train.json')
    loaded = load_checkpoint(path)
    assert loaded['stage'] == 'train'
    assert loaded['completed_nodes'] == ['simulate', 'train']
    assert loaded['paths'] == {'gt': 'out/gt.txt'}
    assert 'config' not in loaded


def test_missing_checkpoint_returns_none(tmp_path):
    assert load_checkpoint(str(tmp_path / 'none.json')) is None
