from collections.abc import Callable

import pytest

from app.core.constants import WIMAX, WLAN
from app.core.schemas import PhyProfile, Thresholds, ThresholdStore
from app.services.phy import load_profiles


@pytest.fixture(scope="session")
def profiles() -> dict[str, PhyProfile]:
    """Fixture providing the bundled profiles."""
    return load_profiles()


@pytest.fixture
def small_profiles(profiles: dict[str, PhyProfile]) -> dict[str, PhyProfile]:
    """Fixture providing bundled profiles with 10-frame windows."""
    return {
        pid: p.model_copy(update={"frames_per_window": 10}) for pid, p in profiles.items()
    }


@pytest.fixture
def wlan(profiles: dict[str, PhyProfile]) -> PhyProfile:
    return profiles[WLAN]


@pytest.fixture
def wimax(profiles: dict[str, PhyProfile]) -> PhyProfile:
    return profiles[WIMAX]


@pytest.fixture
def make_store() -> Callable[[float, float], ThresholdStore]:
    """Fixture building a store with published Value-Y and chosen Value-X."""

    def build(wlan_value_x: float, wimax_value_x: float) -> ThresholdStore:
        return ThresholdStore(
            entries={
                WLAN: Thresholds(value_x=wlan_value_x, value_y=0.072, min_snr_db=7.0),
                WIMAX: Thresholds(value_x=wimax_value_x, value_y=0.076, min_snr_db=5.0),
            }
        )

    return build
