from typing import Any, Dict, List, Literal, Optional
from pydantic import BaseModel, Field, field_validator, model_validator

from app.errors import EvaluationError
from app.models.constant import REPORT_VERSION


class EvalPoint(BaseModel):
    x: float
    metric: float
    std: float = 0.0
    seed: Optional[int] = None


class EvalReport(BaseModel):
    """Results of one protocol for one attack variant on one model."""

    version: int = REPORT_VERSION
    protocol: str
    attack_tag: str
    model_tag: Literal["WB", "BB", "NA"] = "WB"
    x_name: str = "x"
    metric_name: str = "asr"
    parameters: Dict[str, Any] = {}
    points: List[EvalPoint] = []
    seeds: List[int] = []
    metadata: Dict[str, Any] = {}
    config_hash: str = ""

    @model_validator(mode="after")
    def validate_points(self):
        xs = [p.x for p in self.points]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise EvaluationError(f"{self.protocol}: grid must be strictly increasing, got {xs}")
        if self.metric_name in ("asr", "auc", "accuracy"):
            for p in self.points:
                if not 0.0 <= p.metric <= 1.0:
                    raise EvaluationError(
                        f"{self.protocol}: {self.metric_name} {p.metric} outside [0, 1]"
                    )
        return self

    def metric_at(self, x: float) -> float:
        for p in self.points:
            if p.x == x:
                return p.metric
        raise EvaluationError(f"{self.protocol}: no point at x={x}")


class DistancePair(BaseModel):
    """Output distances under a transform, for benign and adversarial inputs."""

    benign: List[float] = Field(min_length=1)
    adversarial: List[float] = Field(min_length=1)

    @field_validator("benign", "adversarial")
    def validate_nonnegative(cls, v):
        if any(d < 0 for d in v):
            raise EvaluationError("distances must be non-negative")
        return v


class RocResult(BaseModel):
    auc: float
    fpr: List[float]
    tpr: List[float]
    thresholds: List[float]
