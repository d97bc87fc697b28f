from collections.abc import Iterable

from app.core.schemas import NetworkCandidate


def scan_spectrum(
    candidates: Iterable[NetworkCandidate],
    reclaimed: Iterable[str] = (),
    excluded: Iterable[str] = (),
) -> list[NetworkCandidate]:
    """Available candidates by rank.

    Secondary users are dropped from spectrum a primary user has reclaimed;
    ``excluded`` profiles (e.g. after End-of-Balance) are never offered.
    """
    reclaimed = set(reclaimed)
    excluded = set(excluded)
    usable = [
        c
        for c in candidates
        if c.available
        and c.profile_id not in excluded
        and not (c.user_class == "secondary" and c.profile_id in reclaimed)
    ]
    return sorted(usable, key=lambda c: c.rank)
