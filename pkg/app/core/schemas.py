import math
from pathlib import Path
from typing import Annotated, Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.constants import (
    DEFAULT_KEY_SEED,
    EVENT_KINDS,
    FRAMES_PER_WINDOW,
    TABLE_SEEDS,
    WINDOW_DURATION_S,
)

SUPPORTED_MODULATIONS = (2, 4, 16, 64)

Scalar = bool | int | float | str


class PhyProfile(BaseModel):
    """Everything needed to transmit/receive one network standard.

    Also houses the default test bench thresholds.
    """

    model_config = ConfigDict(frozen=True)

    id: str = Field(..., min_length=1)
    name: str = ""
    modulation: int
    code_rate: tuple[int, int] = (1, 2)
    generators: tuple[int, ...] = (0o133, 0o171)
    constraint_length: int = Field(7, ge=1)
    bits_per_frame: int = Field(..., gt=0)
    value_x: float = Field(..., ge=0)
    value_y: float = Field(..., ge=0, le=1)
    min_snr_db: float
    lookup_table_id: str | None = None
    frames_per_window: int = Field(FRAMES_PER_WINDOW, ge=1)
    window_duration_s: float = Field(WINDOW_DURATION_S, gt=0)
    data_rate_bps: float | None = Field(None, gt=0)

    @field_validator("modulation")
    @classmethod
    def validate_modulation(cls, v: int) -> int:
        if v not in SUPPORTED_MODULATIONS:
            raise ValueError(
                f"Invalid modulation: {v}. Must be one of: "
                f"{', '.join(str(m) for m in SUPPORTED_MODULATIONS)}"
            )
        return v

    @field_validator("code_rate", mode="before")
    @classmethod
    def parse_code_rate(cls, v: Any) -> Any:
        if isinstance(v, str):
            numerator, _, denominator = v.partition("/")
            return (int(numerator), int(denominator or 1))
        return v

    @field_validator("generators", mode="before")
    @classmethod
    def parse_generators(cls, v: Any) -> Any:
        # INI files write generators in octal, e.g. "133, 171"
        if isinstance(v, str):
            return tuple(int(token, 8) for token in v.replace(",", " ").split())
        return v

    @model_validator(mode="before")
    @classmethod
    def derive_bits_per_frame(cls, data: Any) -> Any:
        # Frame size follows data rate x window time / frames when not given
        if not isinstance(data, dict) or data.get("data_rate_bps") is None:
            return data
        if data.get("bits_per_frame") not in (None, ""):
            return data
        frames = int(data.get("frames_per_window", FRAMES_PER_WINDOW))
        duration = float(data.get("window_duration_s", WINDOW_DURATION_S))
        bits = round(float(data["data_rate_bps"]) * duration / frames)
        return {**data, "bits_per_frame": bits}

    @model_validator(mode="after")
    def validate_framing(self) -> "PhyProfile":
        numerator, denominator = self.code_rate
        if numerator != 1 or denominator < 1:
            raise ValueError(
                f"Unsupported code rate {numerator}/{denominator}: only 1/n codes"
            )
        if denominator == 1:
            if self.generators:
                raise ValueError("Rate 1/1 profiles are uncoded and take no generators")
        elif len(self.generators) != denominator:
            raise ValueError(
                f"Code rate 1/{denominator} needs {denominator} generators, "
                f"got {len(self.generators)}"
            )
        for generator in self.generators:
            if not 0 < generator < 1 << self.constraint_length:
                raise ValueError(
                    f"Generator {generator:o} does not fit constraint length "
                    f"{self.constraint_length}"
                )
        if self.coded_bits_per_frame % self.bits_per_symbol:
            raise ValueError(
                f"bits_per_frame {self.bits_per_frame} does not map to a whole "
                f"number of {self.modulation}-ary symbols at rate "
                f"{numerator}/{denominator}"
            )
        if self.data_rate_bps is not None:
            nominal = self.data_rate_bps * self.window_duration_s / self.frames_per_window
            if not math.isclose(nominal, self.bits_per_frame):
                raise ValueError(
                    f"bits_per_frame {self.bits_per_frame} does not match "
                    f"{self.data_rate_bps:g} bps over {self.window_duration_s:g} s "
                    f"in {self.frames_per_window} frames ({nominal:g} bits)"
                )
        return self

    @property
    def is_coded(self) -> bool:
        return bool(self.generators)

    @property
    def bits_per_symbol(self) -> int:
        return int(math.log2(self.modulation))

    @property
    def coded_bits_per_frame(self) -> int:
        return self.bits_per_frame * self.code_rate[1] // self.code_rate[0]

    @property
    def symbols_per_frame(self) -> int:
        return self.coded_bits_per_frame // self.bits_per_symbol


class BitFrame(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    bits: np.ndarray
    seed: int | None = None

    @field_validator("bits", mode="before")
    @classmethod
    def coerce_bits(cls, v: Any) -> np.ndarray:
        bits = np.asarray(v, dtype=np.uint8)
        if bits.ndim != 1:
            raise ValueError(f"Bit frame must be one-dimensional, got shape {bits.shape}")
        if np.any(bits > 1):
            raise ValueError("Bit frame may only contain 0 and 1")
        return bits

    def __len__(self) -> int:
        return int(self.bits.size)


class ComplexFrame(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    samples: np.ndarray

    @field_validator("samples", mode="before")
    @classmethod
    def coerce_samples(cls, v: Any) -> np.ndarray:
        samples = np.asarray(v, dtype=np.complex128)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("Complex frame must be a non-empty one-dimensional sequence")
        return samples

    def __len__(self) -> int:
        return int(self.samples.size)


class SignalStats(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean_strength: float = Field(..., ge=0, allow_inf_nan=False)
    sd_strength: float = Field(..., ge=0, allow_inf_nan=False)


class JammerSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    amplitude: float = Field(0.0, ge=0)
    active: bool = False


class FrameVerdict(BaseModel):
    model_config = ConfigDict(frozen=True)

    sd_rx: float = Field(..., ge=0)
    sd_remod: float = Field(..., ge=0)
    sd_diff: float = Field(..., ge=0)
    value_x: float = Field(..., ge=0)
    erroneous: bool

    @model_validator(mode="after")
    def validate_comparison(self) -> "FrameVerdict":
        if self.sd_diff != abs(self.sd_rx - self.sd_remod):
            raise ValueError("sd_diff must equal |sd_rx - sd_remod|")
        if self.erroneous != (self.sd_diff >= self.value_x):
            raise ValueError("erroneous must equal sd_diff >= value_x")
        return self

    @classmethod
    def compare(cls, sd_rx: float, sd_remod: float, value_x: float) -> "FrameVerdict":
        """Flag the frame when the SD difference reaches Value-X."""
        sd_diff = abs(sd_rx - sd_remod)
        return cls(
            sd_rx=sd_rx,
            sd_remod=sd_remod,
            sd_diff=sd_diff,
            value_x=value_x,
            erroneous=sd_diff >= value_x,
        )


class WindowResult(BaseModel):
    total_frames: int = Field(..., gt=0)
    erroneous_frames: int = Field(..., ge=0)
    est_ber: float = Field(..., ge=0, le=1)
    mapped_snr_db: float | None = None
    profile_id: str
    timestamp: float = 0.0
    actual_ber: float | None = Field(None, ge=0, le=1)
    value_x: float | None = None

    @model_validator(mode="after")
    def validate_counts(self) -> "WindowResult":
        if self.erroneous_frames > self.total_frames:
            raise ValueError(
                f"erroneous_frames {self.erroneous_frames} exceeds "
                f"total_frames {self.total_frames}"
            )
        if self.est_ber != self.erroneous_frames / self.total_frames:
            raise ValueError("est_ber must equal erroneous_frames / total_frames")
        return self

    @classmethod
    def from_counts(
        cls, erroneous_frames: int, total_frames: int, profile_id: str, **kwargs: Any
    ) -> "WindowResult":
        return cls(
            total_frames=total_frames,
            erroneous_frames=erroneous_frames,
            est_ber=erroneous_frames / total_frames,
            profile_id=profile_id,
            **kwargs,
        )


class JammingState(BaseModel):
    model_config = ConfigDict(frozen=True)

    # None until the first window has been seen
    baseline_strength: float | None = Field(None, ge=0)
    alpha: float = Field(0.2, gt=0, le=1)
    d: float = Field(0.0, ge=0)


class SeedEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    actual_ber: float = Field(..., ge=0, le=1)
    estimated_ber: float = Field(..., ge=0, le=1)
    erroneous_frames: int = Field(..., ge=0)


class LookupRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    snr_db: float
    per_seed: dict[int, SeedEntry]


class LookupTable(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    rows: list[LookupRow]
    key_column: Literal["estimated", "actual"] = "estimated"
    # None averages the chosen column over every seed of the row
    key_seed: int | None = DEFAULT_KEY_SEED

    @model_validator(mode="after")
    def validate_rows(self) -> "LookupTable":
        if len(self.rows) < 2:
            raise ValueError(f"Table {self.id} needs at least 2 rows")
        snrs = [row.snr_db for row in self.rows]
        if any(b <= a for a, b in zip(snrs, snrs[1:], strict=False)):
            raise ValueError(f"Table {self.id} rows must be strictly ascending by SNR")
        if self.key_seed is not None:
            for index, row in enumerate(self.rows):
                if self.key_seed not in row.per_seed:
                    raise ValueError(
                        f"Table {self.id} row {index} has no seed {self.key_seed}"
                    )
        return self

    def snrs(self) -> np.ndarray:
        return np.array([row.snr_db for row in self.rows])

    def key_bers(self) -> np.ndarray:
        """The BER column the MAP function searches."""
        attribute = f"{self.key_column}_ber"
        if self.key_seed is None:
            return np.array(
                [
                    np.mean([getattr(e, attribute) for e in row.per_seed.values()])
                    for row in self.rows
                ]
            )
        return np.array([getattr(row.per_seed[self.key_seed], attribute) for row in self.rows])


class Thresholds(BaseModel):
    model_config = ConfigDict(frozen=True)

    value_x: float = Field(..., ge=0)
    value_y: float = Field(..., ge=0, le=1)
    min_snr_db: float


class ThresholdStore(BaseModel):
    """Per-profile thresholds handed to the test bench."""

    model_config = ConfigDict(frozen=True)

    entries: dict[str, Thresholds] = Field(default_factory=dict)

    @classmethod
    def from_profiles(cls, profiles: dict[str, PhyProfile]) -> "ThresholdStore":
        return cls(
            entries={
                pid: Thresholds(
                    value_x=p.value_x, value_y=p.value_y, min_snr_db=p.min_snr_db
                )
                for pid, p in profiles.items()
            }
        )

    def with_value_x(self, profile_id: str, value_x: float) -> "ThresholdStore":
        current = self.entries[profile_id]
        entries = dict(self.entries)
        entries[profile_id] = current.model_copy(update={"value_x": value_x})
        return ThresholdStore(entries=entries)


class ControllerEvent(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: str
    timestamp: float = Field(..., ge=0)
    detail: dict[str, Scalar] = Field(default_factory=dict)

    @field_validator("kind")
    @classmethod
    def validate_kind(cls, v: str) -> str:
        if v not in EVENT_KINDS:
            raise ValueError(
                f"Invalid event kind: {v}. Expected one of: {', '.join(EVENT_KINDS)}"
            )
        return v


class RepositoryRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    timestamp: float = Field(..., ge=0)
    profile_id: str = Field(..., min_length=1)
    est_ber: float = Field(..., ge=0, le=1)
    mapped_snr_db: float
    jamming: bool = False


class NetworkCandidate(BaseModel):
    model_config = ConfigDict(frozen=True)

    profile_id: str = Field(..., min_length=1)
    available: bool = True
    snr_db: float
    user_class: Literal["primary", "secondary"] = "primary"
    rank: int


class _Directive(BaseModel):
    model_config = ConfigDict(frozen=True)

    time: float = Field(..., ge=0)


class SetSnrDirective(_Directive):
    kind: Literal["set_snr"] = "set_snr"
    snr_db: float
    profile_id: str | None = None


class JammerDirective(_Directive):
    kind: Literal["jammer"] = "jammer"
    active: bool
    amplitude: float = Field(0.0, ge=0)


class EndOfBalanceDirective(_Directive):
    kind: Literal["end_of_balance"] = "end_of_balance"


class PrimaryReclaimDirective(_Directive):
    kind: Literal["primary_reclaim"] = "primary_reclaim"
    profile_id: str


class CandidatesDirective(_Directive):
    kind: Literal["candidates"] = "candidates"
    candidates: list[NetworkCandidate] = Field(default_factory=list)

    @field_validator("candidates")
    @classmethod
    def validate_ranks(cls, v: list[NetworkCandidate]) -> list[NetworkCandidate]:
        ranks = [c.rank for c in v]
        if len(ranks) != len(set(ranks)):
            raise ValueError(f"Candidate ranks must be unique, got {ranks}")
        return v


Directive = Annotated[
    SetSnrDirective
    | JammerDirective
    | EndOfBalanceDirective
    | PrimaryReclaimDirective
    | CandidatesDirective,
    Field(discriminator="kind"),
]


class ScenarioScript(BaseModel):
    directives: list[Directive] = Field(default_factory=list)

    @field_validator("directives")
    @classmethod
    def validate_order(cls, v: list[Any]) -> list[Any]:
        times = [d.time for d in v]
        if any(b < a for a, b in zip(times, times[1:], strict=False)):
            raise ValueError("Scenario directive times must be non-decreasing")
        return v


class SweepSpec(BaseModel):
    profile_id: str
    snr_points: list[float]
    seeds: list[int] = Field(default_factory=lambda: list(TABLE_SEEDS))
    frames: int = Field(FRAMES_PER_WINDOW, ge=1)
    out: Path | None = None
    value_x: float | None = Field(None, ge=0)
    log10: bool = False

    @field_validator("snr_points")
    @classmethod
    def validate_snr_points(cls, v: list[float]) -> list[float]:
        if not v:
            raise ValueError("snr_points must not be empty")
        if any(b <= a for a, b in zip(v, v[1:], strict=False)):
            raise ValueError("snr_points must be strictly increasing")
        return v

    @field_validator("seeds")
    @classmethod
    def validate_seeds(cls, v: list[int]) -> list[int]:
        if not v:
            raise ValueError("seeds must not be empty")
        return v


class SweepRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    snr_db: float
    seed: int
    actual_ber: float = Field(..., ge=0, le=1)
    estimated_ber: float = Field(..., ge=0, le=1)
    erroneous_frames: int = Field(..., ge=0)


class CalibrationResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    profile_id: str
    snr_db: float
    value_x: float = Field(..., ge=0)
    target_ber: float
    achieved_ber: float
    residual: float
    iterations: int
    validation_ber: float | None = None
    validation_residual: float | None = None
