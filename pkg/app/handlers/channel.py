from typing import Any

from app.core.schemas import JammerDirective, JammerSpec, SetSnrDirective
from app.core.state import ControllerState


def handle_set_snr(directive: SetSnrDirective, state: ControllerState) -> dict[str, Any]:
    profile_id = directive.profile_id or state.profile_id
    if profile_id is None:
        raise ValueError(
            f"set_snr at {directive.time:g} s names no profile and none is active"
        )
    link_snr_db = dict(state.link_snr_db)
    link_snr_db[profile_id] = directive.snr_db
    return {"link_snr_db": link_snr_db}


def handle_jammer(directive: JammerDirective, state: ControllerState) -> dict[str, Any]:
    amplitude = directive.amplitude if directive.active else 0.0
    return {"jammer": JammerSpec(amplitude=amplitude, active=directive.active)}
