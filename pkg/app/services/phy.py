"""Simplified transmit/receive chains and the receiver-side re-modulation path.

Frames are flat symbol streams: a rate 1/n convolutional code (unterminated,
hard-decision Viterbi) followed by a unit-energy constellation. Everything
here is pure and works on whole windows at once, ``(frames, bits)`` in and
``(frames, symbols)`` out; the per-frame operations wrap the batched ones.
"""

import configparser
import logging
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np
from commpy.channelcoding.convcode import Trellis
from commpy.modulation import PSKModem, QAMModem

from app.core.config import Config
from app.core.constants import DATA_STREAM
from app.core.schemas import BitFrame, ComplexFrame, PhyProfile

logger = logging.getLogger(__name__)

# Frames decoded together; bounds the traceback buffer to a few MB
DECODE_CHUNK = 64


def derive_seed(*keys: int) -> int:
    """Collapse a tuple of non-negative integers into one reproducible seed."""
    state = np.random.SeedSequence([int(k) for k in keys]).generate_state(1)
    return int(state[0])


def _unpack(values: np.ndarray, width: int) -> np.ndarray:
    shifts = np.arange(width - 1, -1, -1)
    bits = (values[..., None] >> shifts) & 1
    return bits.reshape(values.shape[0], -1).astype(np.uint8)


def _pack(bits: np.ndarray, width: int) -> np.ndarray:
    weights = 1 << np.arange(width - 1, -1, -1)
    grouped = bits.reshape(bits.shape[0], -1, width).astype(np.intp)
    return grouped @ weights


class ConvolutionalCode:
    """Rate 1/n feed-forward code driven by a commpy trellis."""

    def __init__(self, generators: tuple[int, ...], constraint_length: int):
        self.trellis = Trellis(
            np.array([constraint_length - 1]), np.array([list(generators)])
        )
        self.n = len(generators)
        self.next_state = np.asarray(self.trellis.next_state_table, dtype=np.intp)
        self.output = np.asarray(self.trellis.output_table, dtype=np.intp)
        states = self.next_state.shape[0]

        # Every state of a shift-register code has exactly two predecessors
        self.pred_state = np.zeros((2, states), dtype=np.intp)
        self.pred_input = np.zeros((2, states), dtype=np.uint8)
        self.pred_output = np.zeros((2, states), dtype=np.intp)
        filled = np.zeros(states, dtype=np.intp)
        for state in range(states):
            for bit in (0, 1):
                nxt = self.next_state[state, bit]
                slot = filled[nxt]
                if slot > 1:
                    raise ValueError("Trellis is not a rate 1/n shift register")
                self.pred_state[slot, nxt] = state
                self.pred_input[slot, nxt] = bit
                self.pred_output[slot, nxt] = self.output[state, bit]
                filled[nxt] += 1
        self.popcount = np.array(
            [bin(v).count("1") for v in range(1 << self.n)], dtype=np.int32
        )

    def encode(self, bits: np.ndarray) -> np.ndarray:
        """Encode ``(frames, k)`` bits from the all-zero state, no tail."""
        frames, length = bits.shape
        state = np.zeros(frames, dtype=np.intp)
        outputs = np.empty((frames, length), dtype=np.intp)
        for t in range(length):
            column = bits[:, t]
            outputs[:, t] = self.output[state, column]
            state = self.next_state[state, column]
        return _unpack(outputs, self.n)

    def decode(self, coded: np.ndarray) -> np.ndarray:
        """Hard-decision Viterbi over ``(frames, k*n)`` coded bits."""
        chunks = [
            self._viterbi(coded[start : start + DECODE_CHUNK])
            for start in range(0, coded.shape[0], DECODE_CHUNK)
        ]
        return np.concatenate(chunks, axis=0)

    def _viterbi(self, coded: np.ndarray) -> np.ndarray:
        received = _pack(coded, self.n)
        frames, steps = received.shape
        states = self.next_state.shape[0]
        rows = np.arange(frames)

        unreachable = np.int32(1 << 24)
        metrics = np.full((frames, states), unreachable, dtype=np.int32)
        metrics[:, 0] = 0
        decisions = np.empty((steps, frames, states), dtype=np.uint8)
        for t in range(steps):
            symbol = received[:, t, None]
            via0 = metrics[:, self.pred_state[0]] + self.popcount[
                symbol ^ self.pred_output[0]
            ]
            via1 = metrics[:, self.pred_state[1]] + self.popcount[
                symbol ^ self.pred_output[1]
            ]
            choose = via1 < via0
            decisions[t] = choose
            metrics = np.where(choose, via1, via0)

        state = metrics.argmin(axis=1)
        decoded = np.empty((frames, steps), dtype=np.uint8)
        for t in range(steps - 1, -1, -1):
            slot = decisions[t, rows, state]
            decoded[:, t] = self.pred_input[slot, state]
            state = self.pred_state[slot, state]
        return decoded


class SymbolMapper:
    """Unit-energy constellation taken from commpy's Gray-mapped modems.

    Mapping groups coded bits MSB first, the same convention as
    ``Modem.modulate``; demapping is nearest constellation point.
    """

    def __init__(self, modulation: int):
        self.modem = PSKModem(2) if modulation == 2 else QAMModem(modulation)
        constellation = np.asarray(self.modem.constellation, dtype=np.complex128)
        self.scale = float(np.sqrt(np.mean(np.abs(constellation) ** 2)))
        self.constellation = constellation / self.scale
        self.bits_per_symbol = int(np.log2(modulation))

    def modulate(self, coded: np.ndarray) -> np.ndarray:
        indices = _pack(coded, self.bits_per_symbol)
        return self.constellation[indices]

    def demodulate(self, samples: np.ndarray) -> np.ndarray:
        indices = np.zeros(samples.shape, dtype=np.intp)
        nearest = np.full(samples.shape, np.inf)
        for index, point in enumerate(self.constellation):
            distance = np.abs(samples - point)
            closer = distance < nearest
            indices = np.where(closer, index, indices)
            nearest = np.where(closer, distance, nearest)
        return _unpack(indices, self.bits_per_symbol)


@lru_cache(maxsize=16)
def _code(generators: tuple[int, ...], constraint_length: int) -> ConvolutionalCode:
    return ConvolutionalCode(generators, constraint_length)


@lru_cache(maxsize=8)
def _mapper(modulation: int) -> SymbolMapper:
    return SymbolMapper(modulation)


def _profiles_from_ini(text: str, source: str) -> dict[str, PhyProfile]:
    parser = configparser.ConfigParser()
    parser.read_string(text, source=source)
    profiles: dict[str, PhyProfile] = {}
    for section in parser.sections():
        fields = dict(parser[section])
        try:
            profiles[section] = PhyProfile(id=section, **fields)
        except ValueError as err:
            raise ValueError(f"Invalid profile [{section}] in {source}: {err}") from err
    return profiles


def load_profiles(path: str | Path | None = None) -> dict[str, PhyProfile]:
    """Load bundled profiles, then layer user INI files on top."""
    bundled = resources.files("app.data").joinpath("profiles.ini").read_text()
    profiles = _profiles_from_ini(bundled, "profiles.ini")
    for extra in (Config.PROFILES_PATH, path):
        if not extra:
            continue
        try:
            text = Path(extra).read_text()
        except OSError as err:
            raise ValueError(f"Cannot read profiles file {extra}: {err}") from err
        loaded = _profiles_from_ini(text, str(extra))
        logger.info(f"Loaded {len(loaded)} profile(s) from {extra}")
        profiles.update(loaded)
    return profiles


def get_profile(
    profile_id: str, profiles: dict[str, PhyProfile] | None = None
) -> PhyProfile:
    registry = profiles if profiles is not None else load_profiles()
    if profile_id not in registry:
        raise ValueError(
            f"Unknown profile: {profile_id}. Expected one of: {', '.join(registry)}"
        )
    return registry[profile_id]


def generate_bits(seed: int, profile: PhyProfile) -> BitFrame:
    """Bernoulli(0.5) data frame; identical for identical seeds."""
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=profile.bits_per_frame, dtype=np.uint8)
    return BitFrame(bits=bits, seed=seed)


def generate_window_bits(
    seed: int, profile: PhyProfile, frames: int | None = None
) -> np.ndarray:
    """Data for one window: frame ``i`` is drawn from seed ``(seed, data, i)``."""
    count = frames if frames is not None else profile.frames_per_window
    return np.stack(
        [
            generate_bits(derive_seed(seed, DATA_STREAM, i), profile).bits
            for i in range(count)
        ]
    )


def _check_width(array: np.ndarray, expected: int, what: str) -> None:
    if array.ndim != 2 or array.shape[1] != expected:
        raise ValueError(f"Expected {what} of length {expected}, got shape {array.shape}")


def tx_chain_batch(bits: np.ndarray, profile: PhyProfile) -> np.ndarray:
    _check_width(bits, profile.bits_per_frame, "bit frames")
    coded = bits.astype(np.uint8)
    if profile.is_coded:
        coded = _code(profile.generators, profile.constraint_length).encode(coded)
    return _mapper(profile.modulation).modulate(coded)


def rx_chain_batch(samples: np.ndarray, profile: PhyProfile) -> np.ndarray:
    _check_width(samples, profile.symbols_per_frame, "sample frames")
    coded = _mapper(profile.modulation).demodulate(samples)
    if not profile.is_coded:
        return coded
    return _code(profile.generators, profile.constraint_length).decode(coded)


def remodulate_batch(decoded: np.ndarray, profile: PhyProfile) -> np.ndarray:
    """Re-modulation: the transmit chain applied to decoded bits."""
    return tx_chain_batch(decoded, profile)


def tx_chain(bits: BitFrame, profile: PhyProfile) -> ComplexFrame:
    if len(bits) != profile.bits_per_frame:
        raise ValueError(
            f"Bit frame has {len(bits)} bits, profile {profile.id} "
            f"expects {profile.bits_per_frame}"
        )
    return ComplexFrame(samples=tx_chain_batch(bits.bits[None, :], profile)[0])


def rx_chain(frame: ComplexFrame, profile: PhyProfile) -> BitFrame:
    if len(frame) != profile.symbols_per_frame:
        raise ValueError(
            f"Frame has {len(frame)} samples, profile {profile.id} "
            f"expects {profile.symbols_per_frame}"
        )
    return BitFrame(bits=rx_chain_batch(frame.samples[None, :], profile)[0])


def remodulate(decoded: BitFrame, profile: PhyProfile) -> ComplexFrame:
    return tx_chain(decoded, profile)
