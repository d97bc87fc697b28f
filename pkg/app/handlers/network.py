import logging
from typing import Any

from app.core.constants import (
    END_OF_BALANCE,
    PRIMARY_RECLAIM,
    REASON_END_OF_BALANCE,
    REASON_RECLAIM,
)
from app.core.schemas import (
    CandidatesDirective,
    ControllerEvent,
    EndOfBalanceDirective,
    PrimaryReclaimDirective,
)
from app.core.state import ControllerState

logger = logging.getLogger(__name__)


def handle_end_of_balance(
    directive: EndOfBalanceDirective, state: ControllerState, grace_cycles: int
) -> dict[str, Any]:
    """The active network bills the terminal out: scan away within the grace period."""
    if state.profile_id is None:
        logger.warning(f"end_of_balance at {directive.time:g} s with no active network")
        return {}

    billed_out = list(state.billed_out)
    if state.profile_id not in billed_out:
        billed_out.append(state.profile_id)
    event = ControllerEvent(
        kind=END_OF_BALANCE,
        timestamp=directive.time,
        detail={"profile": state.profile_id, "grace_cycles": grace_cycles},
    )
    return {
        "billed_out": billed_out,
        "grace_remaining": grace_cycles,
        "forced_reason": REASON_END_OF_BALANCE,
        "events": [event],
    }


def handle_primary_reclaim(
    directive: PrimaryReclaimDirective, state: ControllerState
) -> dict[str, Any]:
    reclaimed = list(state.reclaimed)
    if directive.profile_id not in reclaimed:
        reclaimed.append(directive.profile_id)

    # Only a secondary user on the reclaimed spectrum has to vacate it
    must_vacate = (
        state.profile_id == directive.profile_id and state.user_class == "secondary"
    )
    event = ControllerEvent(
        kind=PRIMARY_RECLAIM,
        timestamp=directive.time,
        detail={"profile": directive.profile_id, "vacate": must_vacate},
    )
    updates: dict[str, Any] = {"reclaimed": reclaimed, "events": [event]}
    if must_vacate:
        updates["forced_reason"] = REASON_RECLAIM
    return updates


def handle_candidates(
    directive: CandidatesDirective, state: ControllerState
) -> dict[str, Any]:
    return {"candidates": list(directive.candidates)}
