"""Enable/disable planning from matched skills and the phonetic graph."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .exceptions import UnknownSkillError
from .graph import PhoneticGraph

log = logging.getLogger(__name__)

ENABLE_SECONDS = 2.5
DISABLE_SECONDS = 3.08


class SkillState(str, enum.Enum):
    DEFAULT = "DEFAULT"
    ENABLED = "ENABLED"
    DISABLED = "DISABLED"


@dataclass(frozen=True)
class ActionPlan:
    enable: frozenset[str] = frozenset()
    disable: frozenset[str] = frozenset()
    est_setup_seconds: float = field(default=0.0)

    def __post_init__(self):
        object.__setattr__(self, "enable", frozenset(self.enable))
        object.__setattr__(self, "disable", frozenset(self.disable))
        overlap = self.enable & self.disable
        if overlap:
            raise ValueError(f"skills both enabled and disabled: {sorted(overlap)}")

    def __bool__(self):
        return bool(self.enable or self.disable)

    def to_dict(self) -> dict:
        return {
            "enable": sorted(self.enable),
            "disable": sorted(self.disable),
            "est_setup_seconds": self.est_setup_seconds,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ActionPlan":
        return cls(frozenset(data["enable"]), frozenset(data["disable"]),
                   float(data["est_setup_seconds"]))


def estimate_setup_time(plan: ActionPlan) -> float:
    return ENABLE_SECONDS * len(plan.enable) + DISABLE_SECONDS * len(plan.disable)


def plan_actions(
    matched: Iterable[str],
    graph: PhoneticGraph,
    current: Mapping[str, SkillState] | None = None,
) -> ActionPlan:
    """Enable matched skills and disable their phonetic neighbors.

    Matched skills are never disabled. Skills already disabled need no action,
    and a non-matched skill the user enabled themselves is left alone.
    """
    current = current or {}
    matched = set(matched)
    for skill_id in sorted(matched):
        if skill_id not in graph:
            raise UnknownSkillError(skill_id)

    enable = {s for s in matched if current.get(s) != SkillState.ENABLED}
    reachable: set[str] = set()
    for skill_id in matched:
        reachable |= graph.neighbor_ids(skill_id)
    reachable -= matched

    disable = set()
    for skill_id in sorted(reachable):
        state = current.get(skill_id, SkillState.DEFAULT)
        if state == SkillState.DISABLED:
            continue
        if state == SkillState.ENABLED:
            log.warning("not disabling %s: enabled by the user but within range of a match",
                        skill_id)
            continue
        disable.add(skill_id)

    plan = ActionPlan(frozenset(enable), frozenset(disable))
    return ActionPlan(plan.enable, plan.disable, estimate_setup_time(plan))


def apply_plan(
    plan: ActionPlan, current: Mapping[str, SkillState] | None = None
) -> dict[str, SkillState]:
    """New state map after executing *plan*; the input is not modified."""
    state = dict(current or {})
    for skill_id in plan.enable:
        state[skill_id] = SkillState.ENABLED
    for skill_id in plan.disable:
        state[skill_id] = SkillState.DISABLED
    return state
