import os

import pytest

from graph.state import create_initial_state
from graph.workflow import PRED_FILE, REPORT_FILE, merge_state_update, run_workflow, should_train
from utils.checkpoint import load_checkpoint
from utils.config import config_from_dict


def _relocated(config, root):
    data = config.model_dump()
    data['paths'] = {
        'weights': str(root / 'weights.json'),
        'output_dir': str(root / 'out'),
        'checkpoint_dir': str(root / 'ckpt'),
    }
    return config_from_dict(data)


def test_merge_state_update_accumulates_nodes():
    state = {'completed_nodes': ['simulate'], 'report': ''}
    merge_state_update(state, {'completed_nodes': ['train'], 'report': 'x'})
    merge_state_update(state, {'completed_nodes': 'track'})
    assert state == {'completed_nodes': ['simulate', 'train', 'track'], 'report': 'x'}


def test_should_train_without_weights(tiny_config):
    tiny_config.train.reuse_weights = True
    assert should_train(create_initial_state(tiny_config)) == 'train'


def test_pipeline_runs_every_node(tiny_config):
    final = run_workflow(tiny_config)
    assert final['completed_nodes'] == ['simulate', 'train', 'track', 'evaluate']
    out_dir = tiny_config.paths.output_dir
    for name in ('gt.txt', 'det.txt', PRED_FILE, REPORT_FILE):
        assert os.path.exists(os.path.join(out_dir, name))
    assert set(final['metrics']) == {'cvma', 'cvidp', 'cvidr', 'cvidf1'}
    assert final['report'].startswith('cvma=')
    assert set(final['heldout_loss']) == {'initial', 'final'}

    for node in final['completed_nodes']:
        checkpoint = load_checkpoint(os.path.join(tiny_config.paths.checkpoint_dir, f'checkpoint_{node}.json'))
        assert checkpoint['stage'] == node
    last = load_checkpoint(os.path.join(tiny_config.paths.checkpoint_dir, 'checkpoint_evaluate.json'))
    assert last['completed_nodes'] == final['completed_nodes']


def test_pipeline_reuses_existing_weights(tiny_config):
    run_workflow(tiny_config)
    tiny_config.train.reuse_weights = True
    final = run_workflow(tiny_config)
    assert final['completed_nodes'] == ['simulate', 'track', 'evaluate']
    assert final['heldout_loss'] == {}


def test_pipeline_is_reproducible(tiny_config, tmp_path):
    a = _relocated(tiny_config, tmp_path / 'a')
    b = _relocated(tiny_config, tmp_path / 'b')
    run_workflow(a)
    run_workflow(b)
    for name in (PRED_FILE, REPORT_FILE):
        with open(os.path.join(a.paths.output_dir, name), 'rb') as fa, \
                open(os.path.join(b.paths.output_dir, name), 'rb') as fb:
            assert fa.read() == fb.read()


def test_failed_pipeline_leaves_checkpoint(tiny_config):
    tiny_config.scenario.embedding.dim = 5
    with pytest.raises(Exception):
        run_workflow(tiny_config)
    failed = load_checkpoint(os.path.join(tiny_config.paths.checkpoint_dir, 'checkpoint_failed.json'))
    assert failed['completed_nodes'] == ['simulate']
