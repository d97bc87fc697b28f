import math
from collections.abc import Callable
from pathlib import Path

import pytest

from app.core.constants import (
    DISCONNECTED,
    END_OF_BALANCE,
    ESTIMATE_STORED,
    HANDOVER_COMPLETED,
    HANDOVER_INITIATED,
    JAMMING_DETECTED,
    NO_NETWORK_AVAILABLE,
    PRIMARY_RECLAIM,
    QUALITY_BREACH,
    REASON_END_OF_BALANCE,
    REASON_QUALITY,
    REASON_RECLAIM,
    REASON_RECONNECT,
    SCAN_STARTED,
    WIMAX,
    WLAN,
)
from app.core.schemas import ControllerEvent, NetworkCandidate, PhyProfile, ThresholdStore
from app.core.state import ControllerState
from app.services.repository import FileRepository
from app.services.scenario import parse_script
from app.services.testbench import calibrate_store
from app.services.workflow import Controller

ES, QB, SS = ESTIMATE_STORED, QUALITY_BREACH, SCAN_STARTED
HI, HC, NNA = HANDOVER_INITIATED, HANDOVER_COMPLETED, NO_NETWORK_AVAILABLE


@pytest.fixture
def repository(tmp_path: Path) -> FileRepository:
    """Fixture providing an empty file repository."""
    return FileRepository(tmp_path / "repository.csv")


@pytest.fixture
def make_controller(
    small_profiles: dict[str, PhyProfile],
    make_store: Callable[[float, float], ThresholdStore],
    repository: FileRepository,
) -> Callable[..., Controller]:
    """Fixture building controllers over 10-frame windows."""

    def build(wlan_value_x: float, wimax_value_x: float, **kwargs) -> Controller:
        return Controller(
            small_profiles,
            make_store(wlan_value_x, wimax_value_x),
            repository,
            grace_cycles=kwargs.pop("grace_cycles", 3),
            **kwargs,
        )

    return build


def kinds_at(events: list[ControllerEvent], timestamp: float) -> list[str]:
    return [e.kind for e in events if e.timestamp == timestamp]


class TestQualityLoop:
    """Test cases for estimation, breach and handover."""

    def test_degrading_link_hands_over(
        self, make_controller: Callable[..., Controller], repository: FileRepository
    ) -> None:
        """Test a falling SNR breaches Value-Y and moves to the ranked candidate."""
        controller = make_controller(1e-6, 10.0)
        script = parse_script("0 candidates wimax:20:primary:1\n3 set_snr 15\n")
        events, state = controller.run(script, WLAN, duration_s=6, snr_db=math.inf)

        for t in (0.0, 1.0, 2.0):
            assert kinds_at(events, t) == [ES]
        assert kinds_at(events, 3.0) == [QB, SS, HI, HC]
        assert kinds_at(events, 4.0) == [ES]
        assert kinds_at(events, 5.0) == [ES]

        breach = next(e for e in events if e.kind == QB)
        assert breach.detail["est_ber"] > 0.072
        assert breach.detail["value_y"] == 0.072
        completed = next(e for e in events if e.kind == HC)
        assert completed.detail["from_profile"] == WLAN
        assert completed.detail["to_profile"] == WIMAX
        assert completed.detail["value_x"] == 10.0
        assert completed.detail["min_snr_db"] == 5.0

        assert state.profile_id == WIMAX
        assert state.thresholds.value_x == 10.0
        assert state.link_snr == 20.0
        assert state.clock == 6.0
        assert state.cycle == 6

    def test_clean_estimates_stored(
        self, make_controller: Callable[..., Controller], repository: FileRepository
    ) -> None:
        """Test each EstimateStored event has a matching repository record."""
        controller = make_controller(1e-6, 10.0)
        events, _ = controller.run(parse_script(""), WLAN, duration_s=3, snr_db=math.inf)

        stored = [e for e in events if e.kind == ES]
        records = repository.query()
        assert len(stored) == len(records) == 3
        for event, record in zip(stored, records, strict=True):
            assert record.timestamp == event.timestamp
            assert record.profile_id == WLAN
            assert record.est_ber == event.detail["est_ber"] == 0.0
            assert record.mapped_snr_db == event.detail["mapped_snr_db"] == 11.0
            assert not record.jamming

    def test_breach_without_candidates(self, make_controller: Callable[..., Controller]) -> None:
        """Test an empty environment reports NoNetworkAvailable and keeps the link."""
        controller = make_controller(0.0, 10.0)
        events, state = controller.run(parse_script(""), WLAN, duration_s=3, snr_db=math.inf)

        for t in (0.0, 1.0, 2.0):
            assert kinds_at(events, t) == [QB, SS, NNA]
        assert all(e.detail["reason"] == REASON_QUALITY for e in events if e.kind == NNA)
        assert state.profile_id == WLAN
        assert not state.disconnected

    def test_self_handover(self, make_controller: Callable[..., Controller]) -> None:
        """Test a rescan that finds the current network keeps its link SNR."""
        controller = make_controller(0.0, 10.0)
        script = parse_script("0 candidates wlan80211a:30:primary:1\n")
        events, state = controller.run(script, WLAN, duration_s=1, snr_db=math.inf)

        assert kinds_at(events, 0.0) == [QB, SS, HI, HC]
        assert state.profile_id == WLAN
        assert state.link_snr == math.inf

    def test_timestamps_non_decreasing(self, make_controller: Callable[..., Controller]) -> None:
        """Test the event log is ordered in time."""
        controller = make_controller(1e-6, 10.0)
        script = parse_script(
            "0 candidates wimax:20:primary:1\n2 set_snr 15\n4 end_of_balance\n"
        )
        events, _ = controller.run(script, WLAN, duration_s=6, snr_db=math.inf)
        times = [e.timestamp for e in events]
        assert times == sorted(times)


class TestJamming:
    """Test cases for jamming in the controller."""

    def test_jammer_suppresses_estimation(
        self, make_controller: Callable[..., Controller], repository: FileRepository
    ) -> None:
        """Test jammed cycles report JammingDetected and flag records instead of estimating."""
        controller = make_controller(10.0, 10.0)
        script = parse_script("5 jammer on 3.0\n")
        events, state = controller.run(script, WIMAX, duration_s=8, snr_db=20.0)

        for t in range(5):
            assert kinds_at(events, float(t)) == [ES]
        for t in range(5, 8):
            assert kinds_at(events, float(t)) == [JAMMING_DETECTED]

        jamming = next(e for e in events if e.kind == JAMMING_DETECTED)
        assert jamming.detail["d"] > jamming.detail["sd_rx"]
        assert jamming.detail["profile"] == WIMAX

        records = repository.query()
        assert [r.jamming for r in records] == [False] * 5 + [True] * 3
        assert all(r.profile_id == WIMAX for r in records)
        assert state.profile_id == WIMAX


class TestObligations:
    """Test cases for End-of-Balance and primary reclaim."""

    def test_end_of_balance_grace_then_disconnect(
        self, make_controller: Callable[..., Controller]
    ) -> None:
        """Test failed scans spend the grace period and then disconnect."""
        controller = make_controller(10.0, 10.0, grace_cycles=3)
        script = parse_script("2 end_of_balance\n")
        events, state = controller.run(script, WIMAX, duration_s=7, snr_db=20.0)

        assert [e.kind for e in events] == [
            ES,
            ES,
            END_OF_BALANCE,
            ES, SS, NNA,
            ES, SS, NNA,
            ES, SS, NNA, DISCONNECTED,
            SS, NNA,
            SS, NNA,
        ]
        disconnect = next(e for e in events if e.kind == DISCONNECTED)
        assert disconnect.timestamp == 4.0
        assert disconnect.detail == {"profile": WIMAX, "reason": REASON_END_OF_BALANCE}

        reconnects = [e for e in events if e.kind == SS and e.timestamp >= 5.0]
        assert all(e.detail["reason"] == REASON_RECONNECT for e in reconnects)
        assert all(e.detail["profile"] == "none" for e in reconnects)
        assert state.profile_id is None
        assert state.disconnected

    def test_end_of_balance_hands_over(self, make_controller: Callable[..., Controller]) -> None:
        """Test End-of-Balance moves to another network when one is found."""
        controller = make_controller(10.0, 10.0)
        script = parse_script("0 candidates wlan80211a:20:primary:1\n2 end_of_balance\n")
        events, state = controller.run(script, WIMAX, duration_s=4, snr_db=20.0)

        assert kinds_at(events, 2.0) == [END_OF_BALANCE, ES, SS, HI, HC]
        assert kinds_at(events, 3.0) == [ES]
        initiated = next(e for e in events if e.kind == HI)
        assert initiated.detail["reason"] == REASON_END_OF_BALANCE
        assert state.profile_id == WLAN
        assert state.forced_reason is None
        assert state.grace_remaining == 0

    def test_billed_out_network_not_offered(
        self, make_controller: Callable[..., Controller]
    ) -> None:
        """Test the network that billed the terminal out is not rescanned."""
        controller = make_controller(10.0, 10.0)
        script = parse_script("0 candidates wimax:20:primary:1\n1 end_of_balance\n")
        events, _ = controller.run(script, WIMAX, duration_s=2, snr_db=20.0)

        scan = next(e for e in events if e.kind == SS)
        assert scan.detail["found"] == 0

    def test_reclaim_disconnects_secondary(
        self, make_controller: Callable[..., Controller]
    ) -> None:
        """Test a reclaimed secondary with nowhere to go is disconnected."""
        controller = make_controller(0.0, 10.0)
        script = parse_script(
            "0 candidates wimax:20:secondary:1\n2 primary_reclaim wimax\n"
        )
        events, state = controller.run(script, WLAN, duration_s=4, snr_db=math.inf)

        assert kinds_at(events, 0.0) == [QB, SS, HI, HC]
        assert kinds_at(events, 1.0) == [ES]
        assert kinds_at(events, 2.0) == [PRIMARY_RECLAIM, ES, SS, NNA, DISCONNECTED]
        assert kinds_at(events, 3.0) == [SS, NNA]

        reclaim = next(e for e in events if e.kind == PRIMARY_RECLAIM)
        assert reclaim.detail == {"profile": WIMAX, "vacate": True}
        disconnect = next(e for e in events if e.kind == DISCONNECTED)
        assert disconnect.detail["reason"] == REASON_RECLAIM
        assert state.profile_id is None

    def test_end_of_balance_during_breach(
        self, make_controller: Callable[..., Controller]
    ) -> None:
        """Test End-of-Balance still disconnects after its grace when the link also breaches."""
        controller = make_controller(10.0, 0.0, grace_cycles=3)
        script = parse_script("1 end_of_balance\n")
        events, state = controller.run(script, WIMAX, duration_s=6, snr_db=20.0)

        assert kinds_at(events, 0.0) == [QB, SS, NNA]
        assert kinds_at(events, 1.0) == [END_OF_BALANCE, QB, SS, NNA]
        assert kinds_at(events, 2.0) == [QB, SS, NNA]
        assert kinds_at(events, 3.0) == [QB, SS, NNA, DISCONNECTED]
        assert kinds_at(events, 4.0) == [SS, NNA]
        assert kinds_at(events, 5.0) == [SS, NNA]

        unavailable = [e for e in events if e.kind == NNA and 1.0 <= e.timestamp <= 3.0]
        assert all(e.detail["reason"] == REASON_END_OF_BALANCE for e in unavailable)
        disconnect = next(e for e in events if e.kind == DISCONNECTED)
        assert disconnect.detail == {"profile": WIMAX, "reason": REASON_END_OF_BALANCE}
        assert state.profile_id is None
        assert state.disconnected

    def test_reclaim_during_breach(self, make_controller: Callable[..., Controller]) -> None:
        """Test a reclaimed secondary is disconnected even when its link breaches."""
        controller = make_controller(0.0, 0.0)
        script = parse_script(
            "0 candidates wimax:20:secondary:1\n2 primary_reclaim wimax\n"
        )
        events, state = controller.run(script, WLAN, duration_s=4, snr_db=math.inf)

        assert kinds_at(events, 0.0) == [QB, SS, HI, HC]
        assert kinds_at(events, 1.0) == [QB, SS, HI, HC]
        assert kinds_at(events, 2.0) == [PRIMARY_RECLAIM, QB, SS, NNA, DISCONNECTED]
        assert kinds_at(events, 3.0) == [SS, NNA]

        disconnect = next(e for e in events if e.kind == DISCONNECTED)
        assert disconnect.detail == {"profile": WIMAX, "reason": REASON_RECLAIM}
        assert state.profile_id is None
        assert state.disconnected


class TestController:
    """Test cases for controller setup and single steps."""

    def test_invalid_grace(self, make_controller: Callable[..., Controller]) -> None:
        """Test the grace period is at least one cycle."""
        with pytest.raises(ValueError, match="grace_cycles"):
            make_controller(10.0, 10.0, grace_cycles=0)

    def test_unknown_profile(self, make_controller: Callable[..., Controller]) -> None:
        """Test starting on an unknown profile is rejected."""
        with pytest.raises(ValueError, match="Unknown profile: lte"):
            make_controller(10.0, 10.0).initial_state("lte")

    def test_cycle_needs_profile(self, make_controller: Callable[..., Controller]) -> None:
        """Test a cycle without a selected profile is rejected."""
        with pytest.raises(ValueError, match="No profile selected"):
            make_controller(10.0, 10.0).run_cycle(ControllerState())

    def test_negative_duration(self, make_controller: Callable[..., Controller]) -> None:
        """Test negative durations are rejected."""
        with pytest.raises(ValueError, match="non-negative"):
            make_controller(10.0, 10.0).run(parse_script(""), WLAN, duration_s=-1)

    def test_run_cycle_advances_clock(self, make_controller: Callable[..., Controller]) -> None:
        """Test one cycle advances the clock by one period."""
        controller = make_controller(10.0, 10.0)
        events, state = controller.run_cycle(controller.initial_state(WIMAX, 20.0))
        assert [e.kind for e in events] == [ES]
        assert (state.clock, state.cycle) == (1.0, 1)
        assert state.events == []
        assert state.received is None

    def test_deterministic(
        self,
        small_profiles: dict[str, PhyProfile],
        make_store: Callable[[float, float], ThresholdStore],
        tmp_path: Path,
    ) -> None:
        """Test identical seeds give identical event logs."""
        script = parse_script("0 candidates wimax:20:primary:1\n")

        def run(name: str) -> list[ControllerEvent]:
            controller = Controller(
                small_profiles,
                make_store(0.00205, 0.0048),
                FileRepository(tmp_path / name),
                seed=40,
            )
            return controller.run(script, WLAN, duration_s=3, snr_db=8.0)[0]

        assert run("a.csv") == run("b.csv")

    def test_sessions_share_repository(
        self, make_controller: Callable[..., Controller], repository: FileRepository
    ) -> None:
        """Test a second session on a stored repository continues after its last record."""
        controller = make_controller(10.0, 10.0)
        first, _ = controller.run(parse_script(""), WIMAX, duration_s=2, snr_db=20.0)
        second, state = controller.run(parse_script(""), WIMAX, duration_s=2, snr_db=20.0)

        assert first == second, "Event logs are session-relative"
        assert state.epoch == 2.0
        assert [r.timestamp for r in repository.query()] == [0.0, 1.0, 2.0, 3.0]

        reopened = make_controller(10.0, 10.0)
        assert reopened.initial_state(WIMAX).epoch == 4.0

    @pytest.mark.parametrize(
        ("candidate", "message"),
        [
            (NetworkCandidate(profile_id=WIMAX, snr_db=9.0, rank=1, available=False), "not available"),
            (NetworkCandidate(profile_id="lte", snr_db=9.0, rank=1), "Unknown profile"),
        ],
    )
    def test_execute_handover_rejects(
        self,
        make_controller: Callable[..., Controller],
        candidate: NetworkCandidate,
        message: str,
    ) -> None:
        """Test handovers to unusable candidates are rejected."""
        controller = make_controller(10.0, 10.0)
        state = controller.initial_state(WLAN)
        with pytest.raises(ValueError, match=message):
            controller.execute_handover(WLAN, candidate, state)

    def test_execute_handover(self, make_controller: Callable[..., Controller]) -> None:
        """Test a handover reloads thresholds and resets jamming state."""
        controller = make_controller(0.5, 10.0)
        state = controller.initial_state(WLAN, 9.0)
        candidate = NetworkCandidate(
            profile_id=WIMAX, snr_db=12.0, user_class="secondary", rank=1
        )
        events, updates = controller.execute_handover(WLAN, candidate, state)

        assert [e.kind for e in events] == [HI, HC]
        assert updates["profile_id"] == WIMAX
        assert updates["thresholds"].value_x == 10.0
        assert updates["user_class"] == "secondary"
        assert updates["link_snr_db"] == {WLAN: 9.0, WIMAX: 12.0}
        assert updates["jamming"].baseline_strength is None


class TestCalibratedThresholds:
    """Test cases for the controller on calibrated thresholds."""

    @pytest.mark.slow
    def test_breach_and_recovery(
        self,
        profiles: dict[str, PhyProfile],
        small_profiles: dict[str, PhyProfile],
        repository: FileRepository,
    ) -> None:
        """Test a calibrated link stores clean estimates, breaches on a fade and recovers."""
        published = ThresholdStore.from_profiles({pid: profiles[pid] for pid in (WLAN, WIMAX)})
        store = calibrate_store(published, profiles, seed=10)
        controller = Controller(small_profiles, store, repository)
        script = parse_script("0 candidates wimax:20:primary:1\n3 set_snr 1\n")
        events, state = controller.run(script, WLAN, duration_s=5, snr_db=15.0)

        for t in (0.0, 1.0, 2.0):
            assert kinds_at(events, t) == [ES]
        assert kinds_at(events, 3.0) == [QB, SS, HI, HC]
        assert kinds_at(events, 4.0) == [ES]

        breach = next(e for e in events if e.kind == QB)
        assert breach.detail["est_ber"] > store.entries[WLAN].value_y
        assert [e.kind for e in events].count(QB) == 1
        wimax_value_x = store.entries[WIMAX].value_x
        after = [e for e in events if e.timestamp >= 3.0 and "value_x" in e.detail]
        assert all(e.detail["value_x"] == wimax_value_x for e in after if e.kind != QB)
        assert state.profile_id == WIMAX
