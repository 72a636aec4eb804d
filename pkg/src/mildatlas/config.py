"""Run settings for atlas construction and sampled verification."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Mapping

from .atlas import MODES, PAVING_DEPTH
from .harness import DEFAULT_MARGIN, DEFAULT_MAX_CHARTS, DEFAULT_SAMPLES, SLACK


class _Settings:
    @classmethod
    def from_mapping(cls, doc: Mapping[str, Any]):
        known = {f.name for f in fields(cls)}
        extra = sorted(set(doc) - known)
        if extra:
            raise ValueError(f"unknown {cls.__name__} keys: {', '.join(extra)}")
        return cls(**doc)

    def merged(self, **overrides):
        """Copy with the non-None overrides applied."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class AtlasConfig(_Settings):
    r: int = 4
    mode: str = "standard"
    depth: int = PAVING_DEPTH       # interval paving depth for C^1 and wall checks

    def __post_init__(self):
        if not isinstance(self.r, int) or self.r < 1:
            raise ValueError("r must be a positive integer")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.depth < 0:
            raise ValueError("depth must be >= 0")


@dataclass(frozen=True)
class VerifyConfig(_Settings):
    samples: int = DEFAULT_SAMPLES
    margin: float = DEFAULT_MARGIN
    tol: float = SLACK
    seed: int = 0
    max_charts: int = DEFAULT_MAX_CHARTS
    coverage: int = 0               # graph points to invert; 0 skips coverage

    def __post_init__(self):
        if self.samples < 1 or self.max_charts < 1:
            raise ValueError("samples and max_charts must be positive")
        if not 0 <= self.margin < 0.5:
            raise ValueError("margin must lie in [0, 1/2)")
        if self.tol < 0 or self.coverage < 0:
            raise ValueError("tol and coverage must be >= 0")
