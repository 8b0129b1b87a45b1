"""
模型参数 - 两个特征编码器与单层编码器/解码器关联模型的全部可学习张量
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np


ST_DIM = 6

ATTENTION_BLOCKS = ('enc.self_attn', 'dec.self_attn', 'dec.cross_attn')
FFN_BLOCKS = ('enc.ffn', 'dec.ffn')
NORM_BLOCKS = ('enc.norm1', 'enc.norm2', 'dec.norm1', 'dec.norm2', 'dec.norm3')


@dataclass(frozen=True)
class ModelDims:
    """模型尺寸：原始外观维度、两个编码器输出维度、注意力头数、前馈宽度"""
    d_raw: int = 32
    d_roi: int = 64
    d_st: int = 8
    heads: int = 8
    d_ff: Optional[int] = None

    def __post_init__(self):
        if self.d_raw < 1 or self.d_roi < 1 or self.d_st < 0 or self.heads < 1:
            raise ValueError(f"Invalid model dims: {self}")
        if self.d_model % self.heads != 0:
            raise ValueError(f"Model dim {self.d_model} is not divisible by {self.heads} heads")

    @property
    def d_model(self) -> int:
        return self.d_roi + self.d_st

    @property
    def ffn_width(self) -> int:
        return self.d_ff if self.d_ff is not None else 4 * self.d_model


# 全尺寸配置，仅用于形状检查
FULL_SCALE_DIMS = ModelDims(d_raw=32, d_roi=1024, d_st=128, heads=8)


def tensor_shapes(dims: ModelDims) -> List[Tuple[str, Tuple[int, ...]]]:
    """所有张量的 (名称, 形状)，顺序即序列化顺序"""
    d, f = dims.d_model, dims.ffn_width
    shapes = [
        ('app.w1', (dims.d_raw, dims.d_roi)), ('app.b1', (dims.d_roi,)),
        ('app.w2', (dims.d_roi, dims.d_roi)), ('app.b2', (dims.d_roi,)),
        ('st.w1', (ST_DIM, dims.d_st)), ('st.b1', (dims.d_st,)),
        ('st.w2', (dims.d_st, dims.d_st)), ('st.b2', (dims.d_st,)),
    ]
    for block in ATTENTION_BLOCKS:
        for proj in ('q', 'k', 'v', 'o'):
            shapes.append((f'{block}.w{proj}', (d, d)))
            shapes.append((f'{block}.b{proj}', (d,)))
    for block in FFN_BLOCKS:
        shapes += [(f'{block}.w1', (d, f)), (f'{block}.b1', (f,)),
                   (f'{block}.w2', (f, d)), (f'{block}.b2', (d,))]
    for block in NORM_BLOCKS:
        shapes += [(f'{block}.gain', (d,)), (f'{block}.offset', (d,))]
    return shapes


# ==================== 参数容器 ====================

@dataclass
class EncoderParams:
    """外观编码器 H_roi（app.*）与时空编码器 H_st（st.*）"""
    tensors: Dict[str, np.ndarray] = field(default_factory=dict)

    def layer(self, branch: str) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        t = self.tensors
        return t[f'{branch}.w1'], t[f'{branch}.b1'], t[f'{branch}.w2'], t[f'{branch}.b2']


@dataclass
class AssocModelParams:
    """编码器层与解码器层的注意力、前馈与层归一化参数"""
    heads: int
    tensors: Dict[str, np.ndarray] = field(default_factory=dict)


@dataclass
class ModelParams:
    dims: ModelDims
    encoders: EncoderParams
    assoc: AssocModelParams

    def named_tensors(self) -> Dict[str, np.ndarray]:
        """按序列化顺序返回名称到张量（同一对象，非拷贝）的映射"""
        merged = {**self.encoders.tensors, **self.assoc.tensors}
        return {name: merged[name] for name, _ in tensor_shapes(self.dims)}

    def copy(self) -> 'ModelParams':
        return ModelParams.from_named(self.dims, {k: v.copy() for k, v in self.named_tensors().items()})

    @classmethod
    def from_named(cls, dims: ModelDims, tensors: Dict[str, np.ndarray]) -> 'ModelParams':
        expected = tensor_shapes(dims)
        missing = [name for name, _ in expected if name not in tensors]
        if missing:
            raise ValueError(f"Missing tensors: {missing}")
        extra = set(tensors) - {name for name, _ in expected}
        if extra:
            raise ValueError(f"Unexpected tensors: {sorted(extra)}")
        for name, shape in expected:
            if tuple(tensors[name].shape) != shape:
                raise ValueError(f"Tensor {name} has shape {tensors[name].shape}, expected {shape}")
        enc = {k: np.asarray(v, dtype=np.float64) for k, v in tensors.items() if k.startswith(('app.', 'st.'))}
        assoc = {k: np.asarray(v, dtype=np.float64) for k, v in tensors.items() if k.startswith(('enc.', 'dec.'))}
        return cls(dims=dims, encoders=EncoderParams(enc), assoc=AssocModelParams(dims.heads, assoc))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(t)) for t in self.named_tensors().values())


# ==================== 初始化 ====================

def init_params(dims: ModelDims, seed: int = 0) -> ModelParams:
    """
    随机初始化

    权重矩阵服从 U(-1/sqrt(fan_in), 1/sqrt(fan_in))，偏置与层归一化偏移为 0，
    层归一化增益为 1。

    Args:
        dims: 模型尺寸
        seed: 随机种子

    Returns:
        ModelParams: 新参数
    """
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in tensor_shapes(dims):
        if name.endswith('.gain'):
            tensors[name] = np.ones(shape)
        elif len(shape) == 2 and shape[0] > 0:
            bound = 1.0 / math.sqrt(shape[0])
            tensors[name] = rng.uniform(-bound, bound, size=shape)
        else:
            tensors[name] = np.zeros(shape)
    return ModelParams.from_named(dims, tensors)


def appearance_matching_params(dims: ModelDims, scale: float = 12.0, shift: float = 6.0) -> ModelParams:
    """
    外观匹配参数：相似度退化为融合特征的相关系数经缩放平移

    外观编码器输出 relu(x) ⊕ relu(-x)，时空编码器输出 0；所有注意力值路径
    与前馈层置零，编码器/解码器输出都是层归一化后的输入。最后一层归一化的
    增益取 sqrt(scale/D)、偏移取 ±sqrt(shift/D)（常数向量与归一化结果正交），
    于是 G_ij = scale * corr(q_i, f_j) - shift。

    Args:
        dims: 模型尺寸
        scale: 相关系数的缩放
        shift: 相似度整体下移量

    Returns:
        ModelParams: 确定性参数
    """
    d = dims.d_model
    tensors = {name: np.zeros(shape) for name, shape in tensor_shapes(dims)}

    w1 = tensors['app.w1']
    for i in range(dims.d_raw):
        if i < dims.d_roi:
            w1[i, i] = 1.0
        if dims.d_raw + i < dims.d_roi:
            w1[i, dims.d_raw + i] = -1.0
    tensors['app.w2'] = np.eye(dims.d_roi)

    for block in NORM_BLOCKS:
        tensors[f'{block}.gain'] = np.ones(d)
    gain = math.sqrt(scale / d)
    offset = math.sqrt(shift / d)
    tensors['enc.norm2.gain'] = np.full(d, gain)
    tensors['enc.norm2.offset'] = np.full(d, offset)
    tensors['dec.norm3.gain'] = np.full(d, gain)
    tensors['dec.norm3.offset'] = np.full(d, -offset)
    return ModelParams.from_named(dims, tensors)
