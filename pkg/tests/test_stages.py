import os

import numpy as np
import pytest

from core.errors import ConfigError, DataError
from core.types import BoxPx, FrameRef, TargetObs
from stages.ablate import cmd_ablate, variant_config
from stages.evaluate import cmd_evaluate
from stages.selftest import brute_force_assignment, cmd_selftest, suite_hungarian, suite_softmax
from stages.simulate import cmd_simulate
from stages.track import cmd_track, load_model, track_detections
from stages.train import cmd_train, train_params
from utils.checkpoint import load_weights
from utils.config import config_from_dict
from utils.trackio import TRACK_HEADER, read_tracks, records_from_detections, write_appearance, write_tracks


def _read_bytes(path):
    with open(path, 'rb') as f:
        return f.read()


# ==================== simulate ====================

def test_simulate_writes_three_files(tiny_config, tmp_path):
    written = cmd_simulate(tiny_config, str(tmp_path / 'sim'))
    for key in ('gt', 'det', 'app'):
        assert os.path.exists(written[key])
    gt = read_tracks(written['gt'])
    # 3 个身份始终在 2 个相机中可见
    assert len(gt) == 3 * 2 * 30
    assert {r.id for r in gt} == {1, 2, 3}


def test_simulate_is_byte_identical(tiny_config, tmp_path):
    a = cmd_simulate(tiny_config, str(tmp_path / 'a'))
    b = cmd_simulate(tiny_config, str(tmp_path / 'b'))
    for key in ('gt', 'det', 'app'):
        assert _read_bytes(a[key]) == _read_bytes(b[key])


# ==================== train ====================

def test_train_writes_weights_and_curve(tiny_config):
    outcome = cmd_train(tiny_config, progress=False)
    params = load_weights(outcome['weights'])
    assert params.dims == tiny_config.model.dims
    with open(outcome['loss_curve'], encoding='utf-8') as f:
        assert len(f.read().splitlines()) == 1 + tiny_config.train.iterations
    assert np.isfinite(outcome['heldout_initial'])
    assert np.isfinite(outcome['heldout_final'])


# ==================== track ====================

def test_track_with_matching_params(tiny_config, tmp_path):
    written = cmd_simulate(tiny_config, str(tmp_path / 'sim'))
    pred = str(tmp_path / 'pred.txt')
    outcome = cmd_track(tiny_config, written['det'], pred, matching_params=True)
    assert outcome['trajectories'] >= 1
    records = read_tracks(pred)
    assert all(r.id is not None for r in records)


def test_track_empty_detection_file(tiny_config, tmp_path):
    det = str(tmp_path / 'det.txt')
    write_tracks(det, [])
    write_appearance(det, [], d_raw=tiny_config.model.d_raw)
    pred = tmp_path / 'pred.txt'
    outcome = cmd_track(tiny_config, det, str(pred), matching_params=True)
    assert outcome['trajectories'] == 0
    assert pred.read_text(encoding='utf-8') == TRACK_HEADER + '\n'


def test_track_rejects_appearance_width_mismatch(tiny_config, tmp_path):
    obs = [TargetObs(box=BoxPx(0, 0, 10, 10), frame=FrameRef(1, 1), app=np.ones(3))]
    det = str(tmp_path / 'det.txt')
    write_tracks(det, records_from_detections(obs))
    write_appearance(det, obs, d_raw=3)
    with pytest.raises(ConfigError):
        cmd_track(tiny_config, det, str(tmp_path / 'pred.txt'), matching_params=True)


def test_track_requires_time_order(tiny_config):
    obs = [TargetObs(box=BoxPx(0, 0, 10, 10), frame=FrameRef(t, 1), app=np.ones(8)) for t in (2, 1)]
    params = load_model(tiny_config, matching_params=True)
    with pytest.raises(DataError, match='time order'):
        track_detections(obs, params, tiny_config.tracker.tracker_config(), tiny_config.scenario.dims)


def test_track_missing_weights(tiny_config, tmp_path):
    with pytest.raises(DataError):
        load_model(tiny_config, weights_path=str(tmp_path / 'none.json'))


def test_weights_must_match_config_dims(tiny_config, tmp_path):
    cmd_train(tiny_config, progress=False)
    other = variant_config(tiny_config, 'heads', 4)
    with pytest.raises(ConfigError):
        load_model(other)


# ==================== evaluate ====================

def test_evaluate_gt_against_itself(tiny_config, tmp_path):
    written = cmd_simulate(tiny_config, str(tmp_path / 'sim'))
    report_path = tmp_path / 'report' / 'report.txt'
    report, scores = cmd_evaluate(written['gt'], written['gt'], out_path=str(report_path))
    assert scores.cvma == pytest.approx(1.0)
    assert scores.cvidf1 == pytest.approx(1.0)
    assert report_path.read_text(encoding='utf-8') == report
    assert report.startswith('cvma=1.000000\n')


def test_evaluate_missing_file(tmp_path):
    with pytest.raises(DataError):
        cmd_evaluate(str(tmp_path / 'gt.txt'), str(tmp_path / 'pred.txt'))


# ==================== selftest ====================

def test_brute_force_assignment():
    assert brute_force_assignment(np.array([[0.9, 0.1], [0.2, 0.8]])) == pytest.approx(1.7)
    assert brute_force_assignment(np.array([[1.0], [3.0]])) == pytest.approx(3.0)


def test_small_suites_pass():
    assert suite_hungarian(trials=30, max_size=5)[0]
    assert suite_softmax(trials=30)[0]


def test_quick_selftest_passes():
    results = cmd_selftest(quick=True)
    assert [r.name for r in results] == ['hungarian', 'gradient', 'softmax', 'metrics']
    assert all(r.passed for r in results), [r.detail for r in results if not r.passed]


def test_injected_gradient_fault_fails_only_gradient_suite():
    results = {r.name: r for r in cmd_selftest(inject_gradient_fault=True, quick=True)}
    assert not results['gradient'].passed
    assert 'dec.ffn.w2' in results['gradient'].detail
    assert all(r.passed for name, r in results.items() if name != 'gradient')


# ==================== ablate ====================

def test_ablate_window_with_matching_params(tiny_config, capsys):
    rows = cmd_ablate(tiny_config, 'window', [5, 10], matching_params=True)
    assert [row['value'] for row in rows] == [5, 10]
    assert all(row['heldout_loss'] is None for row in rows)
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith('param=window value=5 cvma=')
    assert 'heldout_loss=undefined' in out[0]


def test_ablate_heads_with_matching_params(tiny_config):
    rows = cmd_ablate(tiny_config, 'heads', [1, 2, 4], matching_params=True)
    assert len(rows) == 3


def test_ablate_rejects_bad_input(tiny_config):
    with pytest.raises(ConfigError):
        cmd_ablate(tiny_config, 'window', [])
    with pytest.raises(ConfigError):
        variant_config(tiny_config, 'theta1', 1)
    with pytest.raises(ConfigError):
        variant_config(tiny_config, 'heads', 3)


def test_variant_config_leaves_base_untouched(tiny_config):
    variant = variant_config(tiny_config, 'd_st', 0)
    assert variant.model.d_st == 0
    assert tiny_config.model.d_st == 4


# ==================== 默认配置上的端到端 ====================

def _default_config(tmp_path, **sections):
    """默认配置，只把输出路径换到临时目录"""
    return config_from_dict({
        **sections,
        'paths': {'output_dir': str(tmp_path / 'out'), 'weights': str(tmp_path / 'w.json'),
                  'checkpoint_dir': str(tmp_path / 'ckpt')},
    })


@pytest.mark.slow
def test_matching_params_track_easy_scene_well(tmp_path):
    config = _default_config(tmp_path)
    written = cmd_simulate(config, config.paths.output_dir)
    pred = str(tmp_path / 'pred.txt')
    cmd_track(config, written['det'], pred, matching_params=True)
    _, scores = cmd_evaluate(written['gt'], pred)
    assert scores.cvma >= 0.95


@pytest.mark.slow
def test_trained_weights_track_easy_scene_well(tmp_path):
    config = _default_config(tmp_path)
    written = cmd_simulate(config, config.paths.output_dir)
    cmd_train(config, progress=False)
    pred = str(tmp_path / 'pred.txt')
    cmd_track(config, written['det'], pred)
    _, scores = cmd_evaluate(written['gt'], pred)
    assert scores.cvma >= 0.95
    assert scores.cvidf1 >= 0.95


@pytest.mark.slow
def test_training_halves_loss_within_200_iterations(tmp_path):
    config = _default_config(tmp_path, train={'iterations': 200})
    curve = train_params(config, progress=False)['loss_curve']
    assert len(curve) == 200
    assert np.mean(curve[-10:]) <= 0.5 * np.mean(curve[:10])
