"""
运行配置 - YAML 读取、pydantic 校验、种子覆盖
"""

import logging
import os
from typing import List, Literal, Optional, Tuple

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from core.errors import ConfigError
from core.types import SceneDims
from metrics.cross_view import EvalConfig
from model.params import ModelDims
from simworld.world import EmbeddingModel, NoiseModel, Occlusion, WorldConfig, make_embedding_model
from tracker.state import TrackerConfig


logger = logging.getLogger(__name__)

SEED_OVERRIDE_ENV = 'MTMC_SEED_OVERRIDE'


class _Section(BaseModel):
    model_config = ConfigDict(extra='forbid')


# ==================== 场景 ====================

class OcclusionConfig(_Section):
    identity: int = Field(ge=1)
    camera: int = Field(ge=1)
    start: int = Field(ge=1)
    end: int = Field(ge=1)


class NoiseConfig(_Section):
    jitter: float = Field(0.0, ge=0.0)
    miss_prob: float = Field(0.0, ge=0.0, le=1.0)
    fp_rate: float = Field(0.0, ge=0.0)
    occlusions: List[OcclusionConfig] = Field(default_factory=list)
    seed: int = 0


class EmbeddingConfig(_Section):
    dim: int = Field(32, ge=2)
    sigma: float = Field(0.05, ge=0.0)
    camera_bias: float = Field(0.0, ge=0.0)
    seed: int = 0


class ScenarioConfig(_Section):
    cameras: int = Field(2, ge=1)
    frames: int = Field(100, ge=1)
    identities: int = Field(5, ge=1)
    width: float = Field(1920.0, gt=0)
    height: float = Field(1080.0, gt=0)
    seed: int = 7
    affines: Optional[List[Tuple[float, float, float, float, float, float]]] = None
    ground_size: float = Field(100.0, gt=0)
    speed_range: Tuple[float, float] = (0.3, 1.2)
    box_size_range: Tuple[float, float] = (80.0, 160.0)
    entry_spread: int = Field(0, ge=0)
    exit_spread: int = Field(0, ge=0)
    noise: NoiseConfig = Field(default_factory=NoiseConfig)
    embedding: EmbeddingConfig = Field(default_factory=EmbeddingConfig)

    @model_validator(mode='after')
    def _check(self):
        if self.affines is not None and len(self.affines) != self.cameras:
            raise ValueError(f"affines: expected {self.cameras} transforms, got {len(self.affines)}")
        for occ in self.noise.occlusions:
            if occ.start > occ.end or occ.end > self.frames or occ.camera > self.cameras:
                raise ValueError(f"noise.occlusions: interval {occ} outside 1..{self.frames} or camera range")
        return self

    @property
    def dims(self) -> SceneDims:
        return SceneDims(width=self.width, height=self.height, horizon=self.frames, cameras=self.cameras)

    def world_config(self, seed_offset: int = 0) -> WorldConfig:
        return WorldConfig(
            cameras=self.cameras, frames=self.frames, identities=self.identities,
            width=self.width, height=self.height,
            affines=tuple(tuple(a) for a in self.affines) if self.affines else (),
            ground_size=self.ground_size, speed_range=tuple(self.speed_range),
            box_size_range=tuple(self.box_size_range),
            entry_spread=self.entry_spread, exit_spread=self.exit_spread,
            seed=self.seed + seed_offset,
        )

    def noise_model(self) -> NoiseModel:
        return NoiseModel(
            jitter=self.noise.jitter, miss_prob=self.noise.miss_prob, fp_rate=self.noise.fp_rate,
            occlusions=tuple(Occlusion(o.identity, o.camera, o.start, o.end) for o in self.noise.occlusions),
        )

    def embedding_model(self, seed_offset: int = 0) -> EmbeddingModel:
        emb = self.embedding
        return make_embedding_model(range(1, self.identities + 1), self.cameras, dim=emb.dim,
                                    sigma=emb.sigma, camera_bias_std=emb.camera_bias,
                                    seed=emb.seed + seed_offset)


# ==================== 模型 / 跟踪 / 训练 ====================

class ModelConfig(_Section):
    d_raw: int = Field(32, ge=1)
    d_roi: int = Field(64, ge=1)
    d_st: int = Field(8, ge=0)
    heads: int = Field(8, ge=1)
    d_ff: Optional[int] = Field(None, ge=1)
    seed: int = 0

    @model_validator(mode='after')
    def _check(self):
        if (self.d_roi + self.d_st) % self.heads != 0:
            raise ValueError(f"heads: model dim {self.d_roi + self.d_st} is not divisible by {self.heads}")
        return self

    @property
    def dims(self) -> ModelDims:
        return ModelDims(d_raw=self.d_raw, d_roi=self.d_roi, d_st=self.d_st, heads=self.heads, d_ff=self.d_ff)


class TrackerSection(_Section):
    window: int = Field(60, ge=1)
    step: Literal[1] = 1
    theta1: float = Field(0.1, ge=0.0, le=1.0)
    theta2: float = Field(0.2, ge=0.0, le=1.0)
    n_mem: int = Field(10, ge=1)
    min_traj_len: int = Field(10, ge=1)
    memory_capacity: Optional[int] = Field(None, ge=1)
    use_memory: bool = True
    det_threshold: float = Field(0.52, ge=0.0, le=1.0)

    def tracker_config(self) -> TrackerConfig:
        return TrackerConfig(**self.model_dump())


class TrainConfig(_Section):
    learning_rate: float = Field(0.003, gt=0.0)
    iterations: int = Field(300, ge=0)
    seed: int = 0
    optimizer: Literal['adam', 'sgd'] = 'adam'
    momentum: float = Field(0.9, ge=0.0, lt=1.0)
    window_frames: int = Field(12, ge=1)
    max_targets: int = Field(200, ge=1)
    scenarios: int = Field(3, ge=1)
    grad_clip: float = Field(5.0, ge=0.0)
    heldout_windows: int = Field(8, ge=1)
    reuse_weights: bool = False


class EvalSection(_Section):
    iou_threshold: float = Field(0.5, gt=0.0, le=1.0)

    def eval_config(self) -> EvalConfig:
        return EvalConfig(iou_threshold=self.iou_threshold)


class PathsConfig(_Section):
    weights: str = 'output/weights.json'
    output_dir: str = 'output'
    checkpoint_dir: str = 'checkpoints'


class LoggingConfig(_Section):
    level: Literal['DEBUG', 'INFO', 'WARNING', 'ERROR'] = 'INFO'
    file: Optional[str] = None


class RunConfig(_Section):
    scenario: ScenarioConfig = Field(default_factory=ScenarioConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    tracker: TrackerSection = Field(default_factory=TrackerSection)
    train: TrainConfig = Field(default_factory=TrainConfig)
    eval: EvalSection = Field(default_factory=EvalSection)
    paths: PathsConfig = Field(default_factory=PathsConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)


# ==================== 读取 ====================

def _dotted(loc) -> str:
    return '.'.join(str(part) for part in loc if not isinstance(part, int)) or '<root>'


def config_from_dict(data: Optional[dict]) -> RunConfig:
    """
    校验配置字典

    Raises:
        ConfigError: 未知键或取值非法，错误信息包含点分键名
    """
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"Config root must be a mapping, got {type(data).__name__}")
    try:
        config = RunConfig.model_validate(data)
    except ValidationError as e:
        problems = [f"{_dotted(err['loc'])}: {err['msg']}" for err in e.errors()]
        raise ConfigError("Invalid config: " + '; '.join(problems)) from e
    return apply_seed_override(config)


def apply_seed_override(config: RunConfig) -> RunConfig:
    """环境变量 MTMC_SEED_OVERRIDE（可写在 .env 中）覆盖所有种子"""
    load_dotenv()
    raw = os.environ.get(SEED_OVERRIDE_ENV)
    if raw is None or raw.strip() == '':
        return config
    try:
        seed = int(raw)
    except ValueError as e:
        raise ConfigError(f"{SEED_OVERRIDE_ENV} must be an integer, got {raw!r}") from e
    logger.info(f"Seed override from {SEED_OVERRIDE_ENV}: {seed}")
    config.scenario.seed = seed
    config.scenario.noise.seed = seed
    config.scenario.embedding.seed = seed
    config.model.seed = seed
    config.train.seed = seed
    return config


def load_config(config_path: str = 'config.yaml') -> RunConfig:
    """加载并校验 YAML 配置文件"""
    if not os.path.exists(config_path):
        raise ConfigError(f"Config file not found: {config_path}")
    with open(config_path, 'r', encoding='utf-8') as f:
        try:
            data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError(f"Cannot parse config {config_path}: {e}") from e
    return config_from_dict(data)
