"""Query and prompt records passed between the engine and backends."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass
class QuerySpec:
    """One open-vocabulary query: a unique id plus its synonym prompts."""

    query_id: str
    prompts: list[str]
    category: Optional[str] = None  # set for multi-class benchmark runs

    def __post_init__(self) -> None:
        if not self.prompts:
            raise ValueError(f"query {self.query_id!r} needs at least one prompt")


@dataclass
class Exemplar:
    """Pooled visual prior built from temporally stable regions."""

    vector: np.ndarray
    weight_mass: float
    direction: str

    def __post_init__(self) -> None:
        vec = np.asarray(self.vector, dtype=np.float64).reshape(-1)
        if not np.isfinite(vec).all():
            raise ValueError("exemplar vector contains non-finite values")
        if self.weight_mass <= 0:
            raise ValueError(f"exemplar weight mass must be > 0, got {self.weight_mass}")
        self.vector = vec

    @property
    def dim(self) -> int:
        return self.vector.shape[0]


@dataclass
class PromptSpec:
    """Text prompts plus an optional replicated visual exemplar token."""

    text_prompts: list[str]
    exemplar: Optional[Exemplar] = None
    replication: int = 0

    def __post_init__(self) -> None:
        if not self.text_prompts:
            raise ValueError("prompt needs at least one text entry")
        if self.replication < 0:
            raise ValueError(f"replication must be >= 0, got {self.replication}")
        if self.exemplar is None and self.replication != 0:
            raise ValueError("replication must be 0 without an exemplar")

    def token_count(self) -> int:
        return len(self.text_prompts) + self.replication
