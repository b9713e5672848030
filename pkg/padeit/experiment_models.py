"""Versioned experiment configuration documents."""

from __future__ import annotations

from enum import Enum
from pathlib import Path
from typing import List, Optional, Union

from pydantic import BaseModel, Field, field_validator, model_validator

from padeit.channels import DEFAULT_DIAGONAL_STRATEGY, DIAGONAL_STRATEGIES, PLAN_STRATEGIES
from padeit.inverse import STUDY_LAMBDA_SCALE, LambdaRule

SCHEMA_VERSION = 1


class MeshGenerator(str, Enum):
    box = "box"
    cylinder = "cylinder"
    disc = "disc"
    file = "file"


def _positive_triple(value: List[float], name: str) -> List[float]:
    if len(value) != 3 or any(v <= 0 for v in value):
        raise ValueError(f"{name} needs three positive components")
    return value


def _ordered_range(value: List[float], name: str, floor: float = 0.0) -> List[float]:
    if len(value) != 2 or not floor <= value[0] <= value[1]:
        raise ValueError(f"{name} must be [low, high] with {floor:g} <= low <= high")
    return value


class DomainSpec(BaseModel):
    generator: MeshGenerator = MeshGenerator.box
    size: List[float] = Field(default_factory=lambda: [240.0, 200.0, 100.0])
    radius: float = Field(default=150.0, gt=0)
    height: float = Field(default=140.0, gt=0)
    target_elements: int = Field(default=30000, ge=8)
    mesh_path: Optional[str] = None
    background_conductivity: float = Field(default=0.2, gt=0)
    inclusion_conductivity: float = Field(default=1.75, gt=0)
    bladder_aspect: List[float] = Field(default_factory=lambda: [1.0, 0.8, 0.6])
    bladder_center: Optional[List[float]] = None
    bladder_depth: float = Field(default=50.0, gt=0, description="mm below the pad surface")
    volume_ml: float = Field(default=100.0, ge=0)

    @field_validator("size")
    @classmethod
    def validate_size(cls, value: List[float]) -> List[float]:
        return _positive_triple(value, "size")

    @field_validator("bladder_aspect")
    @classmethod
    def validate_aspect(cls, value: List[float]) -> List[float]:
        return _positive_triple(value, "bladder_aspect")

    @model_validator(mode="after")
    def validate_source(self) -> "DomainSpec":
        if self.generator == MeshGenerator.file and not self.mesh_path:
            raise ValueError("mesh_path is required when generator is 'file'")
        if self.bladder_center is not None and len(self.bladder_center) not in (2, 3):
            raise ValueError("bladder_center needs 2 or 3 coordinates")
        return self


class GridSpec(BaseModel):
    rows: int = Field(default=3, ge=1)
    cols: int = Field(default=3, ge=1)
    spacing: float = Field(default=60.0, gt=0)

    @model_validator(mode="after")
    def validate_count(self) -> "GridSpec":
        if self.rows * self.cols < 4:
            raise ValueError("a grid needs at least 4 electrodes")
        return self


def _default_sweep() -> List[GridSpec]:
    shapes = [(2, 4, 60.0), (3, 3, 60.0), (3, 4, 60.0), (4, 4, 60.0), (3, 3, 30.0), (3, 3, 45.0)]
    return [GridSpec(rows=r, cols=c, spacing=s) for r, c, s in shapes]


class LayoutSpec(GridSpec):
    origin: Optional[List[float]] = None
    orientation: List[float] = Field(default_factory=lambda: [1.0, 0.0, 0.0])
    contact_radius: Optional[float] = Field(default=None, gt=0)
    channel_strategy: str = "default"
    diagonal_strategy: str = DEFAULT_DIAGONAL_STRATEGY
    sweep: List[GridSpec] = Field(default_factory=_default_sweep)

    @field_validator("channel_strategy")
    @classmethod
    def validate_channel_strategy(cls, value: str) -> str:
        if value not in PLAN_STRATEGIES:
            raise ValueError(f"unknown channel strategy '{value}'")
        return value

    @field_validator("diagonal_strategy")
    @classmethod
    def validate_diagonal_strategy(cls, value: str) -> str:
        if value not in DIAGONAL_STRATEGIES:
            raise ValueError(f"unknown diagonal strategy '{value}'")
        return value


class ReconstructionSpec(BaseModel):
    lam: Optional[float] = Field(default=None, gt=0, description="None selects the automatic weight")
    lambda_rule: LambdaRule = LambdaRule.weighted_trace
    lambda_scale: float = Field(default=STUDY_LAMBDA_SCALE, gt=0)
    p: float = Field(default=0.5, ge=0, le=1)
    current: float = Field(default=1e-3, gt=0, description="A")
    slice_resolution: int = Field(default=64, ge=1)
    frame_rate: float = Field(default=3.0, gt=0)
    frames_per_state: int = Field(default=6, ge=1)
    noise_sd: float = Field(default=0.0, ge=0)


class PerturbationStudySpec(BaseModel):
    k_levels: List[int] = Field(default_factory=lambda: list(range(10)))
    impedance_factor_range: List[float] = Field(default_factory=lambda: [2.0, 5.0])
    displacement_range: List[float] = Field(default_factory=lambda: [5.0, 20.0])
    trials_per_cell: int = Field(default=16, ge=1)
    noise_sd: float = Field(default=0.0, ge=0)

    @field_validator("k_levels")
    @classmethod
    def validate_levels(cls, value: List[int]) -> List[int]:
        if not value or any(k < 0 for k in value):
            raise ValueError("k_levels must be a non-empty list of non-negative integers")
        if len(set(value)) != len(value):
            raise ValueError("k_levels must not repeat")
        return value

    @field_validator("impedance_factor_range")
    @classmethod
    def validate_factors(cls, value: List[float]) -> List[float]:
        return _ordered_range(value, "impedance_factor_range", floor=1.0)

    @field_validator("displacement_range")
    @classmethod
    def validate_displacement(cls, value: List[float]) -> List[float]:
        return _ordered_range(value, "displacement_range")


class ClassificationSpec(BaseModel):
    divisions: List[List[float]] = Field(
        default_factory=lambda: [[0.0, 200.0, 400.0], [0.0, 100.0, 200.0, 300.0, 400.0]]
    )
    l2: float = Field(default=1e-3, ge=0)
    tolerance: float = Field(default=1e-6, gt=0)
    max_iterations: int = Field(default=10000, ge=1)
    fullness_pairs: List[List[float]] = Field(
        default_factory=lambda: [[0.0, 300.0], [0.0, 400.0], [100.0, 300.0], [100.0, 400.0]]
    )
    fullness_max_k: Optional[int] = Field(default=3, ge=0)

    @field_validator("divisions")
    @classmethod
    def validate_divisions(cls, value: List[List[float]]) -> List[List[float]]:
        if not value:
            raise ValueError("at least one class division is required")
        for division in value:
            if len(division) < 2 or len(set(division)) != len(division) or any(v < 0 for v in division):
                raise ValueError("each division needs at least two distinct non-negative volumes")
        return value

    @field_validator("fullness_pairs")
    @classmethod
    def validate_pairs(cls, value: List[List[float]]) -> List[List[float]]:
        for pair in value:
            if len(pair) != 2 or not pair[0] < pair[1]:
                raise ValueError("each fullness pair must be [v_low, v_high] with v_low < v_high")
        return value

    @property
    def classes(self) -> List[float]:
        """Every volume appearing in any division, ascending."""
        return sorted({v for division in self.divisions for v in division})


class AnalysisSpec(BaseModel):
    window_seconds: float = Field(default=2.0, gt=0)
    group_size: int = Field(default=3, ge=1)
    rate: Optional[float] = Field(default=None, gt=0, description="Hz; inferred from timestamps when absent")


class ExperimentConfig(BaseModel):
    schema_version: int = SCHEMA_VERSION
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    output_dir: str = "output"
    domain: DomainSpec = Field(default_factory=DomainSpec)
    layout: LayoutSpec = Field(default_factory=LayoutSpec)
    reconstruction: ReconstructionSpec = Field(default_factory=ReconstructionSpec)
    perturbation: PerturbationStudySpec = Field(default_factory=PerturbationStudySpec)
    classification: ClassificationSpec = Field(default_factory=ClassificationSpec)
    analysis: AnalysisSpec = Field(default_factory=AnalysisSpec)

    @field_validator("schema_version")
    @classmethod
    def validate_schema_version(cls, value: int) -> int:
        if value != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {value}; expected {SCHEMA_VERSION}")
        return value

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    return ExperimentConfig.model_validate_json(Path(path).read_text(encoding="utf-8"))


class ErrorResponse(BaseModel):
    """One-line machine-readable CLI error."""

    error: str
    detail: Optional[str] = None
