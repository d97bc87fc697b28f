"""Scenario scripts: ``<time_s> <directive> <args...>``, one per line.

    0 set_snr 9
    0 candidates wimax:12:primary:1 wlan80211a:9:secondary:2:unavailable
    30 jammer on 5.0
    60 end_of_balance
    75 primary_reclaim wlan80211a
"""

import logging
from pathlib import Path

from pydantic import TypeAdapter

from app.core.constants import DIRECTIVES
from app.core.schemas import Directive, NetworkCandidate, ScenarioScript

logger = logging.getLogger(__name__)

_directive_adapter: TypeAdapter[Directive] = TypeAdapter(Directive)


class ScriptParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def parse_candidate(token: str) -> NetworkCandidate:
    """``profile:snr:class:rank[:available|unavailable]``."""
    parts = token.split(":")
    if len(parts) not in (4, 5):
        raise ValueError(
            f"Candidate {token!r} must be profile:snr:class:rank[:available|unavailable]"
        )
    availability = parts[4] if len(parts) == 5 else "available"
    if availability not in ("available", "unavailable"):
        raise ValueError(f"Candidate availability must be available or unavailable, got {availability!r}")
    return NetworkCandidate(
        profile_id=parts[0],
        snr_db=float(parts[1]),
        user_class=parts[2],
        rank=int(parts[3]),
        available=availability == "available",
    )


def _directive_fields(name: str, args: list[str]) -> dict:
    if name == "set_snr":
        if len(args) not in (1, 2):
            raise ValueError("set_snr takes <db> [profile]")
        return {"snr_db": float(args[0]), "profile_id": args[1] if len(args) == 2 else None}
    if name == "jammer":
        if args == ["off"]:
            return {"active": False}
        if len(args) == 2 and args[0] == "on":
            return {"active": True, "amplitude": float(args[1])}
        raise ValueError("jammer takes 'on <amplitude>' or 'off'")
    if name == "end_of_balance":
        if args:
            raise ValueError("end_of_balance takes no arguments")
        return {}
    if name == "primary_reclaim":
        if len(args) != 1:
            raise ValueError("primary_reclaim takes <profile>")
        return {"profile_id": args[0]}
    return {"candidates": [parse_candidate(token) for token in args]}


def parse_line(text: str, number: int) -> Directive | None:
    content = text.split("#", 1)[0].strip()
    if not content:
        return None
    tokens = content.split()
    if len(tokens) < 2:
        raise ScriptParseError(f"expected '<time_s> <directive> ...', got {content!r}", number)
    time_token, name, *args = tokens
    if name not in DIRECTIVES:
        raise ScriptParseError(
            f"Unknown directive: {name}. Expected one of: {', '.join(DIRECTIVES)}", number
        )
    try:
        fields = _directive_fields(name, args)
        return _directive_adapter.validate_python(
            {"kind": name, "time": float(time_token), **fields}
        )
    except ValueError as err:
        raise ScriptParseError(" ".join(str(err).split()), number) from err


def parse_script(source: str | Path) -> ScenarioScript:
    """Parse script text, or a file when given a ``Path``."""
    if isinstance(source, Path):
        try:
            source = source.read_text()
        except OSError as err:
            raise ValueError(f"Cannot read scenario {source}: {err}") from err

    directives = []
    last_time = 0.0
    for number, text in enumerate(source.splitlines(), start=1):
        directive = parse_line(text, number)
        if directive is None:
            continue
        if directive.time < last_time:
            raise ScriptParseError(
                f"time {directive.time:g} is earlier than {last_time:g}", number
            )
        last_time = directive.time
        directives.append(directive)

    logger.info(f"Parsed scenario with {len(directives)} directive(s)")
    return ScenarioScript(directives=directives)
