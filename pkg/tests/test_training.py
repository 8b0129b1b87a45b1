import numpy as np
import pytest

from core.errors import DataError
from model.gradcheck import check_gradients
from model.optim import SGD, Adam, clip_by_global_norm, make_optimizer
from model.params import ModelDims, init_params
from model.training import TrainingBatch, WindowSampler, evaluate_loss, forward_loss, loss_gradients, train
from simworld.render import RenderedDetections, render_detections
from simworld.world import NoiseModel, WorldConfig, generate_scene, make_embedding_model
from stages.selftest import GRADCHECK_DIMS, faulty_gradients, random_batch


@pytest.fixture
def sampler():
    scene = generate_scene(WorldConfig(cameras=2, frames=12, identities=2, seed=1))
    emb = make_embedding_model([1, 2], cameras=2, dim=4, sigma=0.05, seed=1)
    rendered = render_detections(scene, NoiseModel(), emb, seed=1)
    return WindowSampler([(scene, rendered)], window_frames=3, max_targets=50)


# ==================== 梯度检查 ====================

@pytest.mark.parametrize('seed', [0, 1, 2])
def test_analytic_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    batch = random_batch(rng, targets=8, d_raw=GRADCHECK_DIMS.d_raw)
    params = init_params(GRADCHECK_DIMS, seed=seed)
    result = check_gradients(batch, params, max_coords_per_tensor=4, seed=seed)
    assert result.checked > 0
    assert result.passed(), f"max rel err {result.max_rel_error} at {result.worst}"


def test_gradient_check_detects_wrong_gradient():
    rng = np.random.default_rng(0)
    batch = random_batch(rng, targets=8, d_raw=GRADCHECK_DIMS.d_raw)
    params = init_params(GRADCHECK_DIMS, seed=0)
    result = check_gradients(batch, params, max_coords_per_tensor=4, grad_fn=faulty_gradients)
    assert not result.passed()
    assert result.worst.startswith('dec.ffn.w2')


def test_gradient_check_restores_parameters():
    rng = np.random.default_rng(0)
    batch = random_batch(rng, targets=5, d_raw=GRADCHECK_DIMS.d_raw)
    params = init_params(GRADCHECK_DIMS, seed=0)
    before = params.copy()
    check_gradients(batch, params, max_coords_per_tensor=2)
    for name, tensor in before.named_tensors().items():
        np.testing.assert_array_equal(params.named_tensors()[name], tensor)


def test_gradients_cover_every_tensor(small_dims):
    batch = random_batch(np.random.default_rng(1), targets=6, d_raw=small_dims.d_raw)
    params = init_params(small_dims, seed=1)
    _, grads = loss_gradients(batch, params)
    for name, tensor in params.named_tensors().items():
        assert grads[name].shape == tensor.shape


def test_zero_output_layer_blocks_gradient_to_first_layer(small_dims):
    batch = random_batch(np.random.default_rng(2), targets=6, d_raw=small_dims.d_raw)
    params = init_params(small_dims, seed=2)
    params.encoders.tensors['app.w2'][:] = 0.0
    _, grads = loss_gradients(batch, params)
    np.testing.assert_array_equal(grads['app.w1'], 0.0)
    np.testing.assert_array_equal(grads['app.b1'], 0.0)


def test_unlabeled_batch_has_zero_loss_and_gradient(small_dims, scene_dims, make_obs):
    batch = TrainingBatch(observations=[make_obs(), make_obs(camera=2)], labels=[None, None], dims=scene_dims)
    loss, grads = loss_gradients(batch, init_params(small_dims))
    assert loss == 0.0
    assert all(not np.any(g) for g in grads.values())


def test_empty_batch_is_rejected(small_dims, scene_dims):
    with pytest.raises(ValueError):
        forward_loss(TrainingBatch(observations=[], labels=[], dims=scene_dims), init_params(small_dims))


# ==================== 优化器 ====================

def test_sgd_without_momentum_is_gradient_descent():
    params = {'w': np.array([1.0, 2.0])}
    SGD(learning_rate=0.5).step(params, {'w': np.array([2.0, -2.0])})
    np.testing.assert_allclose(params['w'], [0.0, 3.0])


def test_sgd_momentum_accumulates_velocity():
    params = {'w': np.array([0.0])}
    opt = SGD(learning_rate=1.0, momentum=0.5)
    opt.step(params, {'w': np.array([1.0])})
    opt.step(params, {'w': np.array([1.0])})
    np.testing.assert_allclose(params['w'], [-2.5])


def test_adam_first_step_moves_by_learning_rate():
    params = {'w': np.array([1.0, -1.0])}
    Adam(learning_rate=0.1).step(params, {'w': np.array([3.0, -0.01])})
    np.testing.assert_allclose(params['w'], [0.9, -0.9], atol=1e-6)


def test_clip_by_global_norm():
    grads = {'a': np.array([3.0]), 'b': np.array([4.0])}
    assert clip_by_global_norm(grads, 1.0) == pytest.approx(5.0)
    np.testing.assert_allclose([grads['a'][0], grads['b'][0]], [0.6, 0.8])

    grads = {'a': np.array([3.0])}
    clip_by_global_norm(grads, 0.0)
    np.testing.assert_allclose(grads['a'], [3.0])


def test_unknown_optimizer_is_rejected():
    with pytest.raises(ValueError):
        make_optimizer('rmsprop', 0.1)


# ==================== 训练循环 ====================

def test_zero_iterations_returns_unchanged_copy(sampler, small_dims):
    params = init_params(small_dims, seed=3)
    result = train(sampler, params, iterations=0, learning_rate=0.01, progress=False)
    assert result.loss_curve == []
    assert result.params is not params
    for name, tensor in params.named_tensors().items():
        np.testing.assert_array_equal(result.params.named_tensors()[name], tensor)


def test_training_is_deterministic(sampler, small_dims):
    params = init_params(small_dims, seed=3)
    a = train(sampler, params, iterations=4, learning_rate=0.01, seed=9, progress=False)
    b = train(sampler, params, iterations=4, learning_rate=0.01, seed=9, progress=False)
    assert a.loss_curve == b.loss_curve
    assert len(a.loss_curve) == 4


def test_training_does_not_modify_initial_params(sampler, small_dims):
    params = init_params(small_dims, seed=3)
    before = params.copy()
    train(sampler, params, iterations=2, learning_rate=0.1, progress=False)
    for name, tensor in before.named_tensors().items():
        np.testing.assert_array_equal(params.named_tensors()[name], tensor)


def test_negative_iterations_are_rejected(sampler, small_dims):
    with pytest.raises(ValueError):
        train(sampler, init_params(small_dims), iterations=-1, learning_rate=0.01, progress=False)


@pytest.mark.slow
def test_training_lowers_heldout_loss(sampler):
    dims = ModelDims(d_raw=4, d_roi=8, d_st=4, heads=2, d_ff=16)
    params = init_params(dims, seed=0)
    heldout = sampler.fixed_windows(4, seed=5)
    result = train(sampler, params, iterations=150, learning_rate=0.003, seed=0, grad_clip=5.0, progress=False)
    assert evaluate_loss(result.params, heldout) < evaluate_loss(params, heldout)


# ==================== 窗口采样 ====================

def test_sampler_without_detections_raises():
    scene = generate_scene(WorldConfig(cameras=1, frames=5, identities=1, seed=0))
    with pytest.raises(DataError):
        WindowSampler([(scene, RenderedDetections())], window_frames=2)


def test_sampler_windows_span_consecutive_times(sampler):
    batch = sampler.window(0, 4)
    times = {obs.frame.time for obs in batch.observations}
    assert times <= {4, 5, 6}
    # 2 个身份 x 2 相机 x 3 帧，没有噪声
    assert len(batch) == 12
    assert all(label in (1, 2) for label in batch.labels)


def test_sampler_respects_target_cap():
    scene = generate_scene(WorldConfig(cameras=2, frames=12, identities=2, seed=1))
    emb = make_embedding_model([1, 2], cameras=2, dim=4, seed=1)
    rendered = render_detections(scene, NoiseModel(), emb, seed=1)
    capped = WindowSampler([(scene, rendered)], window_frames=3, max_targets=5)
    assert len(capped.window(0, 1)) <= 5


def test_fixed_windows_are_reproducible(sampler):
    a = sampler.fixed_windows(3, seed=2)
    b = sampler.fixed_windows(3, seed=2)
    assert [len(x) for x in a] == [len(x) for x in b]
    assert [x.frames for x in a] == [x.frames for x in b]


def test_evaluate_loss_requires_batches(small_dims):
    with pytest.raises(ValueError):
        evaluate_loss(init_params(small_dims), [])
