from pathlib import Path

import pytest

from core.errors import ConfigError
from utils.config import SEED_OVERRIDE_ENV, RunConfig, config_from_dict, load_config


EXAMPLE_CONFIG = Path(__file__).resolve().parent.parent / 'config.example.yaml'


def test_defaults_are_valid():
    config = config_from_dict({})
    assert config.tracker.window == 60
    assert config.tracker.theta1 == pytest.approx(0.1)
    assert config.tracker.theta2 == pytest.approx(0.2)
    assert config.tracker.n_mem == 10
    assert config.model.dims.d_model == 72


def test_example_config_loads():
    config = load_config(str(EXAMPLE_CONFIG))
    assert config.scenario.embedding.dim == config.model.d_raw
    assert config.tracker.tracker_config().window == config.tracker.window


def test_unknown_key_names_dotted_path():
    with pytest.raises(ConfigError, match=r'tracker\.thetaX'):
        config_from_dict({'tracker': {'thetaX': 0.3}})


def test_unknown_top_level_section():
    with pytest.raises(ConfigError, match='agents'):
        config_from_dict({'agents': {}})


def test_out_of_range_value():
    with pytest.raises(ConfigError, match=r'tracker\.theta1'):
        config_from_dict({'tracker': {'theta1': 1.5}})


def test_heads_must_divide_model_dim():
    with pytest.raises(ConfigError, match='divisible'):
        config_from_dict({'model': {'d_roi': 10, 'd_st': 1, 'heads': 2}})


def test_window_step_is_fixed():
    with pytest.raises(ConfigError):
        config_from_dict({'tracker': {'step': 2}})


def test_occlusion_outside_scene_is_rejected():
    with pytest.raises(ConfigError):
        config_from_dict({'scenario': {'frames': 10, 'noise': {
            'occlusions': [{'identity': 1, 'camera': 1, 'start': 5, 'end': 20}]}}})


def test_affine_count_must_match_cameras():
    with pytest.raises(ConfigError):
        config_from_dict({'scenario': {'cameras': 2, 'affines': [[1, 0, 0, 0, 1, 0]]}})


def test_seed_override_replaces_every_seed(monkeypatch):
    monkeypatch.setenv(SEED_OVERRIDE_ENV, '42')
    config = config_from_dict({'scenario': {'seed': 1}, 'train': {'seed': 2}})
    assert config.scenario.seed == 42
    assert config.scenario.noise.seed == 42
    assert config.scenario.embedding.seed == 42
    assert config.model.seed == 42
    assert config.train.seed == 42


def test_bad_seed_override(monkeypatch):
    monkeypatch.setenv(SEED_OVERRIDE_ENV, 'abc')
    with pytest.raises(ConfigError, match=SEED_OVERRIDE_ENV):
        config_from_dict({})


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match='not found'):
        load_config(str(tmp_path / 'missing.yaml'))


def test_malformed_yaml(tmp_path):
    path = tmp_path / 'bad.yaml'
    path.write_text('tracker: [window: 3\n', encoding='utf-8')
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_non_mapping_root(tmp_path):
    path = tmp_path / 'list.yaml'
    path.write_text('- 1\n- 2\n', encoding='utf-8')
    with pytest.raises(ConfigError, match='mapping'):
        load_config(str(path))


def test_empty_file_uses_defaults(tmp_path):
    path = tmp_path / 'empty.yaml'
    path.write_text('', encoding='utf-8')
    assert load_config(str(path)) == RunConfig()


def test_sections_convert_to_runtime_configs(tiny_config):
    assert tiny_config.scenario.dims.horizon == 30
    assert tiny_config.scenario.world_config(seed_offset=2).seed == 7
    assert tiny_config.model.dims.d_model == 20
    assert tiny_config.eval.eval_config().iou_threshold == pytest.approx(0.5)
    assert tiny_config.tracker.tracker_config().min_traj_len == 3
