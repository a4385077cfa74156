"""JSON experiment configs. Unknown keys are rejected; CLI flags override file keys."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .sim import SCENARIOS, CostModel, Scenario

SchemeName = Literal["uncoded", "repetition", "gc", "pcr", "bcc"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CostOverrides(_Strict):
    per_multiplication_s: Optional[float] = Field(None, ge=0)
    per_message_s: Optional[float] = Field(None, ge=0)
    decode_per_multiplication_s: Optional[float] = Field(None, ge=0)
    message_jitter_s: Optional[float] = Field(None, ge=0)

    def build(self) -> CostModel:
        return CostModel(**{k: v for k, v in self.model_dump().items() if v is not None})


class ExperimentConfig(_Strict):
    """``simulate`` input. ``scenario`` (1-4) presets m, n and the artificial flag."""

    scenario: Optional[int] = Field(None, ge=1, le=4)
    m: int = Field(8000, ge=1)
    n: int = Field(40, ge=1)
    d: int = Field(7000, ge=1)
    artificial: bool = False
    p: float = Field(0.05, ge=0, le=1)
    delay_s: float = Field(0.5, ge=0)
    schemes: list[SchemeName] = Field(default_factory=lambda: ["uncoded", "gc", "pcr", "bcc"], min_length=1)
    r: int = Field(10, ge=1)
    seeds: list[int] = Field(default_factory=lambda: [0], min_length=1)
    iterations: int = Field(100, ge=1)
    cost: CostOverrides = Field(default_factory=CostOverrides)
    out_dir: Optional[str] = None

    @model_validator(mode="before")
    @classmethod
    def _apply_scenario(cls, data):
        if isinstance(data, dict) and data.get("scenario") is not None:
            preset = SCENARIOS.get(data["scenario"])
            if preset is not None:
                data = {"m": preset.m, "n": preset.n, "artificial": preset.artificial, **data}
        return data

    @model_validator(mode="after")
    def _check_r(self):
        if self.r > self.n:
            raise ValueError(f"r={self.r} exceeds n={self.n}")
        return self

    def scenario_obj(self) -> Scenario:
        return Scenario(self.m, self.n, self.artificial, self.d, self.p, self.delay_s)


class GdRunConfig(_Strict):
    """``gd`` / ``serve`` input."""

    scheme: SchemeName = "pcr"
    m: int = Field(240, ge=1)
    d: int = Field(20, ge=1)
    n: int = Field(12, ge=1)
    r: int = Field(4, ge=1)
    iterations: int = Field(100, ge=1)
    seed: int = 0
    learning_rate: Optional[float] = Field(None, ge=0)
    momentum: float = Field(0.9, ge=0, lt=1)
    out: Optional[str] = None
    # serve only
    host: str = "127.0.0.1"
    port: int = Field(0, ge=0, le=65535)
    timeout_s: float = Field(30.0, gt=0)
    spawn: bool = False
    kill_at: list[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check(self):
        if self.r > self.n:
            raise ValueError(f"r={self.r} exceeds n={self.n}")
        if self.m % self.n:
            raise ValueError(f"m={self.m} must be divisible by n={self.n}")
        return self


def load_config(model: type[BaseModel], path: str | Path | None, overrides: dict) -> BaseModel:
    data = {}
    if path is not None:
        data = json.loads(Path(path).read_text())
        if not isinstance(data, dict):
            raise ValueError("config must be a JSON object")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return model.model_validate(data)
