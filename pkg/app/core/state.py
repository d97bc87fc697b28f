import operator
from typing import Annotated, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.core.constants import (
    REASON_END_OF_BALANCE,
    REASON_QUALITY,
    REASON_RECLAIM,
    REASON_RECONNECT,
)
from app.core.schemas import (
    ControllerEvent,
    JammerSpec,
    JammingState,
    NetworkCandidate,
    Thresholds,
    WindowResult,
)

SCAN_REASONS = [REASON_QUALITY, REASON_END_OF_BALANCE, REASON_RECLAIM, REASON_RECONNECT]


class ControllerState(BaseModel):
    """State of the terminal's outer loop, threaded through one cycle graph."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    clock: float = Field(0.0, ge=0)
    # Repository time at clock 0
    epoch: float = Field(0.0, ge=0)
    cycle: int = Field(0, ge=0)

    # Active link
    profile_id: str | None = None
    thresholds: Thresholds | None = None
    user_class: Literal["primary", "secondary"] = "primary"
    link_snr_db: dict[str, float] = Field(default_factory=dict)

    jamming: JammingState = Field(default_factory=JammingState)
    jammer: JammerSpec = Field(default_factory=JammerSpec)

    # Scripted spectrum
    candidates: list[NetworkCandidate] = Field(default_factory=list)
    reclaimed: list[str] = Field(default_factory=list)
    billed_out: list[str] = Field(default_factory=list)

    # Obligations
    grace_remaining: int = Field(0, ge=0)
    forced_reason: str | None = None
    disconnected: bool = False

    # Per-cycle scratch
    received: np.ndarray | None = None
    reference_bits: np.ndarray | None = None
    jammed: bool = False
    window: WindowResult | None = None
    scan_reason: str | None = None
    scan_results: list[NetworkCandidate] = Field(default_factory=list)
    events: Annotated[list[ControllerEvent], operator.add] = Field(default_factory=list)

    @property
    def link_snr(self) -> float | None:
        if self.profile_id is None:
            return None
        return self.link_snr_db.get(self.profile_id)

    @field_validator("forced_reason", "scan_reason")
    @classmethod
    def validate_reason(cls, v: str | None) -> str | None:
        if v is not None and v not in SCAN_REASONS:
            raise ValueError(
                f"Invalid scan reason: {v}. Expected one of: {', '.join(SCAN_REASONS)}"
            )
        return v
