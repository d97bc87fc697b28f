"""The terminal's outer loop as a LangGraph cycle graph.

One ``run_cycle`` is one simulated second: a jamming check on a fresh window,
then either estimation (store or breach) or nothing, followed by any forced
scan the script has imposed (End-of-Balance, primary reclaim). Every scan
ends in a handover or a ``NoNetworkAvailable``.
"""

import logging
import math
from collections.abc import Callable
from typing import Any

from langgraph.graph import END, START, StateGraph
from langgraph.graph.state import CompiledStateGraph

from app.core.config import Config
from app.core.constants import (
    CYCLE_PERIOD_S,
    DISCONNECTED,
    ESTIMATE_STORED,
    HANDOVER_COMPLETED,
    HANDOVER_INITIATED,
    JAMMING_BROADCAST,
    JAMMING_DETECTED,
    NO_NETWORK_AVAILABLE,
    QUALITY_BREACH,
    REASON_END_OF_BALANCE,
    REASON_QUALITY,
    REASON_RECLAIM,
    REASON_RECONNECT,
    SCAN_STARTED,
)
from app.core.schemas import (
    ControllerEvent,
    Directive,
    JammingState,
    LookupTable,
    NetworkCandidate,
    PhyProfile,
    RepositoryRecord,
    ScenarioScript,
    ThresholdStore,
)
from app.core.state import ControllerState
from app.handlers.channel import handle_jammer, handle_set_snr
from app.handlers.network import (
    handle_candidates,
    handle_end_of_balance,
    handle_primary_reclaim,
)
from app.services.channel import signal_stats
from app.services.mapping import get_thresholds, load_bundled_table, map_ber_to_snr
from app.services.phy import derive_seed
from app.services.repository import Repository
from app.services.scanner import scan_spectrum
from app.services.testbench import detect_jamming, estimate_window, simulate_window

logger = logging.getLogger(__name__)

NO_PROFILE = "none"


class Controller:
    """Controller of the mobile terminal: profiles, threshold store and repository."""

    def __init__(
        self,
        profiles: dict[str, PhyProfile],
        store: ThresholdStore,
        repository: Repository,
        tables: dict[str, LookupTable] | None = None,
        seed: int = Config.DEFAULT_SEED,
        grace_cycles: int = Config.GRACE_CYCLES,
        alpha: float = Config.JAMMING_ALPHA,
    ):
        if grace_cycles < 1:
            raise ValueError(f"grace_cycles must be at least 1, got {grace_cycles}")
        self.profiles = profiles
        self.store = store
        self.repository = repository
        self.tables = dict(tables or {})
        self.seed = seed
        self.grace_cycles = grace_cycles
        self.alpha = alpha
        self.graph = self._build_graph()

    # Setup

    def initial_state(
        self, profile_id: str, snr_db: float = Config.DEFAULT_SNR_DB
    ) -> ControllerState:
        """Fresh session state; its records continue after the repository's last one."""
        self._profile(profile_id)
        records = self.repository.query()
        epoch = records[-1].timestamp + CYCLE_PERIOD_S if records else 0.0
        if epoch:
            logger.info(f"Session records start at {epoch:g} s after {len(records)} stored")
        return ControllerState(
            epoch=epoch,
            profile_id=profile_id,
            thresholds=get_thresholds(profile_id, self.store),
            link_snr_db={profile_id: snr_db},
            jamming=JammingState(alpha=self.alpha),
        )

    def _profile(self, profile_id: str) -> PhyProfile:
        if profile_id not in self.profiles:
            raise ValueError(
                f"Unknown profile: {profile_id}. Expected one of: {', '.join(self.profiles)}"
            )
        return self.profiles[profile_id]

    def _table(self, profile: PhyProfile) -> LookupTable | None:
        if profile.lookup_table_id is None:
            return None
        if profile.lookup_table_id not in self.tables:
            self.tables[profile.lookup_table_id] = load_bundled_table(profile.lookup_table_id)
        return self.tables[profile.lookup_table_id]

    def _event(self, kind: str, state: ControllerState, **detail: Any) -> ControllerEvent:
        return ControllerEvent(kind=kind, timestamp=state.clock, detail=detail)

    # Graph nodes

    def sense(self, state: ControllerState) -> dict[str, Any]:
        """Run a window through the channel and check D against SD_Rx."""
        profile = self._profile(state.profile_id)
        snr_db = state.link_snr
        if snr_db is None:
            raise ValueError(f"No link SNR set for profile {profile.id}")

        window = simulate_window(
            profile,
            snr_db,
            derive_seed(self.seed, state.cycle),
            jammer=state.jammer if state.jammer.active else None,
            frames=profile.frames_per_window,
        )
        stats = signal_stats(window.received.ravel())
        jammed, jamming = detect_jamming(stats, state.jamming)
        if not jammed:
            return {
                "jamming": jamming,
                "jammed": False,
                "received": window.received,
                "reference_bits": window.bits,
            }

        logger.info(f"Jamming on {profile.id} at {state.clock:g} s (D={jamming.d:.4f})")
        event = self._event(
            JAMMING_DETECTED,
            state,
            profile=profile.id,
            d=jamming.d,
            sd_rx=stats.sd_strength,
            broadcast=JAMMING_BROADCAST,
        )
        if state.window is not None and state.window.profile_id == profile.id:
            # Last known quality, flagged as observed under jamming
            self.repository.append(
                RepositoryRecord(
                    timestamp=state.epoch + state.clock,
                    profile_id=profile.id,
                    est_ber=state.window.est_ber,
                    mapped_snr_db=state.window.mapped_snr_db,
                    jamming=True,
                )
            )
        return {"jamming": jamming, "jammed": True, "events": [event]}

    def estimate(self, state: ControllerState) -> dict[str, Any]:
        """Frame-flag estimate of the window, mapped to an SNR."""
        profile = self._profile(state.profile_id)
        result = estimate_window(
            state.received,
            profile,
            value_x=state.thresholds.value_x,
            reference_bits=state.reference_bits,
            timestamp=state.clock,
        )
        table = self._table(profile)
        mapped = map_ber_to_snr(result.est_ber, table) if table is not None else math.nan
        return {
            "window": result.model_copy(update={"mapped_snr_db": mapped}),
            "received": None,
            "reference_bits": None,
        }

    def store_estimate(self, state: ControllerState) -> dict[str, Any]:
        window = state.window
        self.repository.append(
            RepositoryRecord(
                timestamp=state.epoch + state.clock,
                profile_id=window.profile_id,
                est_ber=window.est_ber,
                mapped_snr_db=window.mapped_snr_db,
            )
        )
        event = self._event(
            ESTIMATE_STORED,
            state,
            profile=window.profile_id,
            est_ber=window.est_ber,
            mapped_snr_db=window.mapped_snr_db,
            value_x=state.thresholds.value_x,
        )
        return {"events": [event]}

    def breach(self, state: ControllerState) -> dict[str, Any]:
        window = state.window
        logger.info(
            f"Quality breach on {window.profile_id} at {state.clock:g} s: "
            f"est_ber {window.est_ber} > {state.thresholds.value_y}"
        )
        event = self._event(
            QUALITY_BREACH,
            state,
            profile=window.profile_id,
            est_ber=window.est_ber,
            mapped_snr_db=window.mapped_snr_db,
            value_x=state.thresholds.value_x,
            value_y=state.thresholds.value_y,
        )
        # A pending End-of-Balance or reclaim still governs a failed scan
        return {"scan_reason": state.forced_reason or REASON_QUALITY, "events": [event]}

    def obligations(self, state: ControllerState) -> dict[str, Any]:
        return {"scan_reason": state.forced_reason}

    def reconnect(self, state: ControllerState) -> dict[str, Any]:
        return {"scan_reason": REASON_RECONNECT}

    def scan(self, state: ControllerState) -> dict[str, Any]:
        results = scan_spectrum(state.candidates, state.reclaimed, state.billed_out)
        event = self._event(
            SCAN_STARTED,
            state,
            reason=state.scan_reason,
            profile=state.profile_id or NO_PROFILE,
            found=len(results),
        )
        return {"scan_results": results, "events": [event]}

    def handover(self, state: ControllerState) -> dict[str, Any]:
        if state.scan_results:
            events, updates = self.execute_handover(
                state.profile_id, state.scan_results[0], state
            )
            return {
                **updates,
                "forced_reason": None,
                "grace_remaining": 0,
                "events": events,
            }

        events = [self._event(NO_NETWORK_AVAILABLE, state, reason=state.scan_reason)]
        updates: dict[str, Any] = {}
        if state.scan_reason == REASON_END_OF_BALANCE and state.profile_id is not None:
            remaining = max(state.grace_remaining - 1, 0)
            updates["grace_remaining"] = remaining
            if remaining == 0:
                events.append(self._disconnect(state, REASON_END_OF_BALANCE))
                updates.update(self._deselected())
        elif state.scan_reason == REASON_RECLAIM and state.profile_id is not None:
            # A secondary user may not stay on reclaimed spectrum
            events.append(self._disconnect(state, REASON_RECLAIM))
            updates.update(self._deselected())
        return {**updates, "events": events}

    def _disconnect(self, state: ControllerState, reason: str) -> ControllerEvent:
        logger.warning(f"Disconnected from {state.profile_id} at {state.clock:g} s ({reason})")
        return self._event(DISCONNECTED, state, profile=state.profile_id, reason=reason)

    def _deselected(self) -> dict[str, Any]:
        return {
            "profile_id": None,
            "thresholds": None,
            "disconnected": True,
            "forced_reason": None,
            "grace_remaining": 0,
        }

    def execute_handover(
        self,
        from_profile: str | None,
        chosen: NetworkCandidate,
        state: ControllerState,
    ) -> tuple[list[ControllerEvent], dict[str, Any]]:
        """Reconfigure the PHY and reload thresholds from the store."""
        if not chosen.available:
            raise ValueError(f"Candidate {chosen.profile_id} is not available")
        self._profile(chosen.profile_id)
        thresholds = get_thresholds(chosen.profile_id, self.store)
        source = from_profile or NO_PROFILE

        initiated = self._event(
            HANDOVER_INITIATED,
            state,
            from_profile=source,
            to_profile=chosen.profile_id,
            reason=state.scan_reason or REASON_QUALITY,
        )
        completed = self._event(
            HANDOVER_COMPLETED,
            state,
            from_profile=source,
            to_profile=chosen.profile_id,
            user_class=chosen.user_class,
            value_x=thresholds.value_x,
            value_y=thresholds.value_y,
            min_snr_db=thresholds.min_snr_db,
        )
        updates: dict[str, Any] = {
            "profile_id": chosen.profile_id,
            "thresholds": thresholds,
            "user_class": chosen.user_class,
            "disconnected": False,
        }
        if chosen.profile_id != from_profile:
            link_snr_db = dict(state.link_snr_db)
            link_snr_db[chosen.profile_id] = chosen.snr_db
            updates["link_snr_db"] = link_snr_db
            updates["jamming"] = JammingState(alpha=self.alpha)
        logger.info(f"Handover {source} -> {chosen.profile_id} at {state.clock:g} s")
        return [initiated, completed], updates

    # Routing

    @staticmethod
    def _route_start(state: ControllerState) -> str:
        return "reconnect" if state.profile_id is None else "sense"

    @staticmethod
    def _route_sense(state: ControllerState) -> str:
        return "obligations" if state.jammed else "estimate"

    @staticmethod
    def _route_estimate(state: ControllerState) -> str:
        # Equal to value_y still stores
        if state.window.est_ber <= state.thresholds.value_y:
            return "store"
        return "breach"

    @staticmethod
    def _route_obligations(state: ControllerState) -> str:
        return "scan" if state.scan_reason else END

    def _build_graph(self) -> CompiledStateGraph:
        workflow = StateGraph(ControllerState)

        workflow.add_node("sense", self.sense)
        workflow.add_node("estimate", self.estimate)
        workflow.add_node("store", self.store_estimate)
        workflow.add_node("breach", self.breach)
        workflow.add_node("obligations", self.obligations)
        workflow.add_node("reconnect", self.reconnect)
        workflow.add_node("scan", self.scan)
        workflow.add_node("handover", self.handover)

        workflow.add_conditional_edges(
            START, self._route_start, {"sense": "sense", "reconnect": "reconnect"}
        )
        workflow.add_conditional_edges(
            "sense",
            self._route_sense,
            {"estimate": "estimate", "obligations": "obligations"},
        )
        workflow.add_conditional_edges(
            "estimate", self._route_estimate, {"store": "store", "breach": "breach"}
        )
        workflow.add_edge("store", "obligations")
        workflow.add_edge("breach", "scan")
        workflow.add_conditional_edges(
            "obligations", self._route_obligations, {"scan": "scan", END: END}
        )
        workflow.add_edge("reconnect", "scan")
        workflow.add_edge("scan", "handover")
        workflow.add_edge("handover", END)

        return workflow.compile()

    # Driving

    def run_cycle(
        self, state: ControllerState
    ) -> tuple[list[ControllerEvent], ControllerState]:
        """One outer-loop iteration at ``state.clock``; the clock then advances one period."""
        if state.profile_id is None and not state.disconnected:
            raise ValueError("No profile selected: cannot run a controller cycle")

        start = state.model_copy(
            update={
                "events": [],
                "jammed": False,
                "scan_reason": None,
                "scan_results": [],
            }
        )
        result = self.graph.invoke(dict(start))
        finished = ControllerState(**{**dict(start), **result})
        events = list(finished.events)
        logger.debug(f"Cycle {state.cycle} at {state.clock:g} s: {len(events)} event(s)")
        return events, finished.model_copy(
            update={
                "events": [],
                "clock": state.clock + CYCLE_PERIOD_S,
                "cycle": state.cycle + 1,
            }
        )

    def apply_directive(
        self, directive: Directive, state: ControllerState
    ) -> tuple[list[ControllerEvent], ControllerState]:
        handlers: dict[str, Callable[[], dict[str, Any]]] = {
            "set_snr": lambda: handle_set_snr(directive, state),
            "jammer": lambda: handle_jammer(directive, state),
            "end_of_balance": lambda: handle_end_of_balance(
                directive, state, self.grace_cycles
            ),
            "primary_reclaim": lambda: handle_primary_reclaim(directive, state),
            "candidates": lambda: handle_candidates(directive, state),
        }
        updates = handlers[directive.kind]()
        events = updates.pop("events", [])
        return events, state.model_copy(update=updates)

    def run(
        self,
        script: ScenarioScript,
        profile_id: str,
        duration_s: float,
        snr_db: float = Config.DEFAULT_SNR_DB,
    ) -> tuple[list[ControllerEvent], ControllerState]:
        """Apply directives due at or before each cycle, then run the cycle."""
        if duration_s < 0:
            raise ValueError(f"Duration must be non-negative, got {duration_s}")
        state = self.initial_state(profile_id, snr_db)
        pending = list(script.directives)
        log: list[ControllerEvent] = []

        for _ in range(math.floor(duration_s / CYCLE_PERIOD_S)):
            while pending and pending[0].time <= state.clock:
                events, state = self.apply_directive(pending.pop(0), state)
                log.extend(events)
            events, state = self.run_cycle(state)
            log.extend(events)

        logger.info(
            f"Scenario finished after {state.cycle} cycle(s) on "
            f"{state.profile_id or NO_PROFILE} with {len(log)} event(s)"
        )
        return log, state
