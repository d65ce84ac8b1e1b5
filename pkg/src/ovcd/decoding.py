"""Final decode: synonym choice, thresholding, instance decoupling and
cross-time overlap matching.

Semantic masks at the two timestamps are split into 8-connected instances;
an instance counts as unchanged when it sufficiently overlaps any instance
at the other timestamp (in either direction's area ratio). The unmatched
remainder forms the change mask.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .errors import DimensionMismatch
from .query import QuerySpec
from .raster import BitMask, Component, ScalarMap, connected_components


@dataclass
class InstanceSet:
    """8-connected instances of one timestamp's semantic mask."""

    timestamp: int  # 1 or 2
    shape: tuple[int, int]
    instances: list[Component]

    @classmethod
    def from_mask(cls, mask: BitMask, timestamp: int) -> "InstanceSet":
        comps = connected_components(mask, 8)
        return cls(timestamp=timestamp, shape=mask.shape, instances=comps.components)

    def label_map(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=np.int32)
        for inst in self.instances:
            out[inst.pixels[:, 0], inst.pixels[:, 1]] = inst.id
        return out


@dataclass
class ChangeResult:
    change_mask: BitMask
    matched_pairs: list[tuple[int, int]]
    unmatched_t1: list[int]
    unmatched_t2: list[int]
    selected_prompt: Optional[str] = None
    instance_areas_t1: dict[int, int] = field(default_factory=dict)
    instance_areas_t2: dict[int, int] = field(default_factory=dict)


def select_best_prompt(presence: Mapping[str, float]) -> str:
    """Argmax-presence prompt; ties go to the earliest entry."""
    if not presence:
        raise ValueError("presence map is empty")
    best_prompt = None
    best_score = -1.0
    for prompt, score in presence.items():
        if score > best_score:
            best_prompt = prompt
            best_score = score
    return best_prompt


def decode_semantic(logits: ScalarMap, tau: float) -> BitMask:
    """Foreground where the logit reaches the background threshold."""
    return BitMask(logits.values >= tau)


def match_instances(set1: InstanceSet, set2: InstanceSet, theta: float) -> ChangeResult:
    """Bidirectional overlap matching across time.

    Instances i and j match when |i & j| / |i| >= theta or |i & j| / |j| >=
    theta; an instance may participate in several matches and any sufficient
    overlap marks it matched. Unmatched pixels from both timestamps form the
    change mask.
    """
    if set1.shape != set2.shape:
        raise DimensionMismatch(f"instance sets disagree: {set1.shape} vs {set2.shape}")
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must be in (0, 1], got {theta}")

    areas1 = {inst.id: inst.area for inst in set1.instances}
    areas2 = {inst.id: inst.area for inst in set2.instances}

    lab1 = set1.label_map()
    lab2 = set2.label_map()
    both = (lab1 > 0) & (lab2 > 0)
    matched1: set[int] = set()
    matched2: set[int] = set()
    pairs: list[tuple[int, int]] = []
    if both.any():
        width = int(lab2.max()) + 1
        joint = lab1[both].astype(np.int64) * width + lab2[both].astype(np.int64)
        codes, counts = np.unique(joint, return_counts=True)
        for code, count in zip(codes, counts):
            id1 = int(code // width)
            id2 = int(code % width)
            overlap = int(count)
            if overlap / areas1[id1] >= theta or overlap / areas2[id2] >= theta:
                pairs.append((id1, id2))
                matched1.add(id1)
                matched2.add(id2)

    unmatched1 = sorted(set(areas1) - matched1)
    unmatched2 = sorted(set(areas2) - matched2)

    change = np.zeros(set1.shape, dtype=bool)
    for inst in set1.instances:
        if inst.id in unmatched1:
            change[inst.pixels[:, 0], inst.pixels[:, 1]] = True
    for inst in set2.instances:
        if inst.id in unmatched2:
            change[inst.pixels[:, 0], inst.pixels[:, 1]] = True

    return ChangeResult(
        change_mask=BitMask(change),
        matched_pairs=pairs,
        unmatched_t1=unmatched1,
        unmatched_t2=unmatched2,
        instance_areas_t1=areas1,
        instance_areas_t2=areas2,
    )


def decode_change(
    query: QuerySpec,
    logits_t1: ScalarMap,
    logits_t2: ScalarMap,
    presence_t1: Mapping[str, float],
    presence_t2: Mapping[str, float],
    tau: float,
    theta: float,
) -> ChangeResult:
    """Full decode for one query from rectified logits of both timestamps.

    One synonym is selected per query (not per timestamp) by mean presence
    across the pair, then each timestamp is thresholded, decoupled into
    instances and matched across time.
    """
    merged_presence = {
        p: 0.5 * (presence_t1.get(p, 0.0) + presence_t2.get(p, 0.0)) for p in query.prompts
    }
    selected = select_best_prompt(merged_presence)

    instances_t1 = InstanceSet.from_mask(decode_semantic(logits_t1, tau), 1)
    instances_t2 = InstanceSet.from_mask(decode_semantic(logits_t2, tau), 2)
    result = match_instances(instances_t1, instances_t2, theta)
    result.selected_prompt = selected
    return result
