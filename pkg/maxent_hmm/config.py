"""
Configuration models for the maxent-hmm toolkit
Training options and synthetic-data specs, validated with pydantic
"""

import logging
import os
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

DEFAULT_MAX_ITERS = int(os.environ.get("MAXENT_HMM_MAX_ITERS", 5000))
DEFAULT_TOL = float(os.environ.get("MAXENT_HMM_TOL", 1e-4))
DEFAULT_LOG_LEVEL = os.environ.get("MAXENT_HMM_LOG_LEVEL", "WARNING")

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class TrainOptions(BaseModel):
    """Options shared by every trainer (GIS, forward-backward, hidden-variable EM)"""

    model_config = ConfigDict(frozen=True)

    max_iters: int = Field(default=DEFAULT_MAX_ITERS, ge=1)
    # GIS and plain forward-backward: max relative constraint residual. Hidden-variable EM: log-likelihood delta.
    tol: float = Field(default=DEFAULT_TOL, gt=0)
    seed: int = 0
    record_trace: bool = True


class SynthSpec(BaseModel):
    """Specification of a seeded synthetic dataset and its truth model"""

    model_config = ConfigDict(frozen=True)

    kind: Literal["plain", "hidden"] = "plain"
    n_outputs: int = Field(default=2, ge=2)
    n_hidden: int = Field(default=2, ge=1)
    # one entry per history template (position / tag / word classes); each
    # history activates exactly one value of every template
    template_sizes: List[int] = Field(default_factory=lambda: [3, 4, 5])
    seed: int = 0
    n_events: int = Field(default=200, ge=0)
    weight_scale: float = Field(default=1.0, gt=0)
    selector_scale: float = Field(default=2.5, gt=0)
    emitter_scale: float = Field(default=2.0, gt=0)
    min_emitter_kl: float = Field(default=1.0, ge=0)
    events_path: Optional[str] = None
    truth_path: Optional[str] = None

    @field_validator("template_sizes")
    @classmethod
    def _check_templates(cls, sizes: List[int]) -> List[int]:
        if not sizes:
            raise ValueError("at least one history template is required")
        if any(s < 1 for s in sizes):
            raise ValueError(f"template sizes must be positive, got {sizes}")
        return sizes


def configure_logging(level: Optional[str] = None) -> None:
    """Configure root logging once, from an entry point"""
    name = (level or DEFAULT_LOG_LEVEL).upper()
    logging.basicConfig(level=getattr(logging, name, logging.WARNING), format=LOG_FORMAT)
