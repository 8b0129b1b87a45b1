"""
关联模型 - 特征编码器、全局关联 Transformer、损失与训练
"""

from .association import (
    AssocProbs,
    FrameGroups,
    GtAssoc,
    SimilarityMatrix,
    association_loss,
    association_loss_grad,
    build_gt_association,
    forward_training,
    per_frame_softmax,
    similarity,
)
from .attention import decoder_forward, encoder_forward
from .features import encode_app, encode_st, fuse, fused_features, spatiotemporal_feature
from .gradcheck import GradCheckResult, check_gradients
from .params import (
    AssocModelParams,
    EncoderParams,
    ModelDims,
    ModelParams,
    appearance_matching_params,
    init_params,
)
from .training import (
    TrainingBatch,
    TrainResult,
    WindowSampler,
    evaluate_loss,
    forward_loss,
    label_detections,
    loss_gradients,
    train,
)

__all__ = [
    'AssocProbs', 'FrameGroups', 'GtAssoc', 'SimilarityMatrix',
    'association_loss', 'association_loss_grad', 'build_gt_association',
    'forward_training', 'per_frame_softmax', 'similarity',
    'decoder_forward', 'encoder_forward',
    'encode_app', 'encode_st', 'fuse', 'fused_features', 'spatiotemporal_feature',
    'GradCheckResult', 'check_gradients',
    'AssocModelParams', 'EncoderParams', 'ModelDims', 'ModelParams',
    'appearance_matching_params', 'init_params',
    'TrainingBatch', 'TrainResult', 'WindowSampler', 'evaluate_loss', 'forward_loss',
    'label_detections', 'loss_gradients', 'train',
]
