"""Reject candidate plans that resemble plans that already failed.

The buffer keeps every plan executed and failed this episode.  A
candidate's score is its distance to the nearest buffered failure; the
selected plan maximizes that score, so the loop steers away from
repeating mistakes.  An empty buffer scores every candidate +inf and the
first candidate wins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .core import Video, pixel_l2
from .encoders import encode_video


class RejectionMetric(Enum):
    RAW_PIXEL = "raw_pixel"
    EMBEDDING = "embedding"


@dataclass
class FailedPlanBuffer:
    """Episode-scoped store of executed plans that failed."""

    plans: list[Video] = field(default_factory=list)
    _features: list[np.ndarray] = field(default_factory=list, repr=False)

    def __len__(self) -> int:
        return len(self.plans)

    def push(self, plan: Video) -> "FailedPlanBuffer":
        self.plans.append(plan)
        self._features.append(encode_video(plan))
        return self


def push_failed(buffer: FailedPlanBuffer, plan: Video) -> FailedPlanBuffer:
    """Append a failed plan; earlier contents are preserved."""
    return buffer.push(plan)


def _plan_distance(
    metric: RejectionMetric,
    plan: Video,
    plan_feature: np.ndarray | None,
    failed: Video,
    failed_feature: np.ndarray,
) -> float:
    if metric is RejectionMetric.RAW_PIXEL:
        return pixel_l2(plan, failed)
    feature = plan_feature if plan_feature is not None else encode_video(plan)
    return float(np.linalg.norm(feature - failed_feature))


def nearest_failed_distance(
    plan: Video,
    buffer: FailedPlanBuffer,
    metric: RejectionMetric = RejectionMetric.RAW_PIXEL,
) -> float:
    """Distance from ``plan`` to its closest buffered failure; +inf if empty."""
    if len(buffer) == 0:
        return math.inf
    feature = encode_video(plan) if metric is RejectionMetric.EMBEDDING else None
    return min(
        _plan_distance(metric, plan, feature, failed, failed_feature)
        for failed, failed_feature in zip(buffer.plans, buffer._features)
    )


def select_plan(
    candidates: Sequence[Video],
    buffer: FailedPlanBuffer,
    metric: RejectionMetric = RejectionMetric.RAW_PIXEL,
) -> tuple[int, Video]:
    """Pick the candidate farthest from all previous failures.

    Ties resolve to the lowest index, which also covers the empty-buffer
    case where every candidate scores +inf.
    """
    if not candidates:
        raise ValueError("no candidate plans to select from")
    scores = [nearest_failed_distance(plan, buffer, metric) for plan in candidates]
    best = max(range(len(candidates)), key=lambda i: (scores[i], -i))
    return best, candidates[best]
