"""Transmitter chain and channel: Gray-mapped modulation, symbol spreading,
Rayleigh fading with optional estimation error, and composition of the
multiuser received signal.

Resource elements are indexed PRB-major, so one group's REs (MU-MIMO) and one
spread block's REs (NOMA) are contiguous runs of the flat grid.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import coding
from .coding import CodeConfig
from .seqdesign import SignatureMatrix

encode = coding.encode  # CRC framing + coding + rate matching, see coding module


class PhyError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Modulation

def _qam16_table():
    pts = np.empty(16, dtype=np.complex128)
    for idx in range(16):
        b = [(idx >> (3 - i)) & 1 for i in range(4)]
        re = (1 - 2 * b[0]) * (2 - (1 - 2 * b[2]))
        im = (1 - 2 * b[1]) * (2 - (1 - 2 * b[3]))
        pts[idx] = (re + 1j * im) / np.sqrt(10)
    return pts


def _qpsk_table():
    pts = np.empty(4, dtype=np.complex128)
    for idx in range(4):
        b0, b1 = (idx >> 1) & 1, idx & 1
        pts[idx] = ((1 - 2 * b0) + 1j * (1 - 2 * b1)) / np.sqrt(2)
    return pts


class ModScheme(enum.Enum):
    """Gray-mapped unit-energy constellations."""

    QPSK = "qpsk"
    QAM16 = "qam16"

    @property
    def bits_per_symbol(self) -> int:
        return 2 if self is ModScheme.QPSK else 4

    @property
    def points(self) -> np.ndarray:
        """Constellation table indexed by the symbol's bits, MSB first."""
        return _TABLES[self]

    @property
    def bit_labels(self) -> np.ndarray:
        """(n_points, bits_per_symbol) bit pattern of each constellation index."""
        m = self.bits_per_symbol
        idx = np.arange(1 << m)
        return ((idx[:, None] >> np.arange(m - 1, -1, -1)[None, :]) & 1).astype(np.uint8)


_TABLES = {ModScheme.QPSK: _qpsk_table(), ModScheme.QAM16: _qam16_table()}


def modulate(bits: np.ndarray, scheme: ModScheme) -> np.ndarray:
    """Map a bit vector (MSB-first per symbol) onto constellation symbols."""
    bits = np.asarray(bits, dtype=np.uint8)
    m = scheme.bits_per_symbol
    if len(bits) % m:
        raise PhyError(f"bit count {len(bits)} not divisible by {m}")
    idx = bits.reshape(-1, m) @ (1 << np.arange(m - 1, -1, -1))
    return scheme.points[idx]


def spread(q: complex, s_k: np.ndarray) -> np.ndarray:
    """Repeat one symbol over the spread length, weighted by the signature."""
    return q * np.asarray(s_k)


# ---------------------------------------------------------------------------
# Frame configuration

@dataclass(frozen=True)
class NomaWsma:
    signatures: SignatureMatrix


@dataclass(frozen=True)
class MuMimo:
    groups: int
    users_per_group: int


@dataclass(frozen=True)
class FrameConfig:
    """Resource grid and multiple-access mode for one transmission frame."""

    mode: NomaWsma | MuMimo
    n_prb: int = 6
    data_symbols: int = 12
    subcarriers_per_prb: int = 12
    receive_antennas: int = 4

    def __post_init__(self):
        if isinstance(self.mode, NomaWsma):
            if self.n_re % self.spread_length:
                raise PhyError(
                    f"grid of {self.n_re} REs not divisible by spread length "
                    f"{self.spread_length}"
                )
        elif isinstance(self.mode, MuMimo):
            if self.n_prb % self.mode.groups:
                raise PhyError(
                    f"{self.n_prb} PRBs not divisible into {self.mode.groups} groups"
                )
        else:
            raise PhyError(f"unknown mode {self.mode!r}")

    @property
    def n_re(self) -> int:
        return self.n_prb * self.subcarriers_per_prb * self.data_symbols

    @property
    def spread_length(self) -> int:
        return self.mode.signatures.spread_length if isinstance(self.mode, NomaWsma) else 1

    @property
    def user_count(self) -> int:
        if isinstance(self.mode, NomaWsma):
            return self.mode.signatures.user_count
        return self.mode.groups * self.mode.users_per_group

    @property
    def symbols_per_ue(self) -> int:
        if isinstance(self.mode, NomaWsma):
            return self.n_re // self.spread_length
        return self.n_re // self.mode.groups

    def group_of(self, ue: int) -> int:
        if isinstance(self.mode, NomaWsma):
            return 0
        return ue // self.mode.users_per_group

    def group_res(self, group: int) -> slice:
        """Contiguous RE range owned by one MU-MIMO group (whole grid for NOMA)."""
        if isinstance(self.mode, NomaWsma):
            return slice(0, self.n_re)
        per = self.n_re // self.mode.groups
        return slice(group * per, (group + 1) * per)


@dataclass(frozen=True)
class UeTxConfig:
    """Per-UE transmit parameters."""

    power: float
    signature_index: int
    modulation: ModScheme
    tbs_bytes: int
    code: CodeConfig = field(default_factory=CodeConfig)

    def __post_init__(self):
        if self.power < 0:
            raise PhyError("power must be nonnegative")
        if self.tbs_bytes < 1:
            raise PhyError("tbs_bytes must be positive")

    @property
    def info_bits(self) -> int:
        return 8 * self.tbs_bytes


# ---------------------------------------------------------------------------
# Channel

class ChannelModel(enum.Enum):
    BLOCK_FLAT = "block_flat"  # one draw per (UE, antenna), constant over REs
    PER_RE = "per_re"          # independent draw on every RE


@dataclass(frozen=True)
class ChannelRealization:
    """True fading gains plus the receiver-side estimate used for detection.

    ``flat`` marks gains (and estimate) constant across REs, which lets
    receivers reuse one detection filter for the whole frame.
    """

    gains: np.ndarray     # (K, N_r, n_re) complex
    estimate: np.ndarray  # same shape; equals gains when est_error_var == 0
    est_error_var: float = 0.0
    flat: bool = False


def _cn(rng, shape, var=1.0):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(var / 2)


def draw_channel(frame: FrameConfig, model: ChannelModel, seed) -> ChannelRealization:
    """Unit-variance circular complex Gaussian gains, ideal estimate attached."""
    rng = np.random.default_rng(seed)
    K, Nr, n_re = frame.user_count, frame.receive_antennas, frame.n_re
    if model is ChannelModel.BLOCK_FLAT:
        per_link = _cn(rng, (K, Nr))
        gains = np.broadcast_to(per_link[:, :, None], (K, Nr, n_re)).copy()
        return ChannelRealization(gains=gains, estimate=gains, flat=True)
    gains = _cn(rng, (K, Nr, n_re))
    return ChannelRealization(gains=gains, estimate=gains, flat=False)


def estimate_channel(ch: ChannelRealization, est_error_var: float, seed) -> ChannelRealization:
    """Attach an estimate with additive i.i.d. complex Gaussian error.

    A flat channel gets one error draw per (UE, antenna) link, matching a
    single per-link pilot estimate, so the estimate stays flat too.
    """
    if est_error_var < 0:
        raise PhyError("est_error_var must be nonnegative")
    if est_error_var == 0:
        return ChannelRealization(
            gains=ch.gains, estimate=ch.gains, est_error_var=0.0, flat=ch.flat
        )
    rng = np.random.default_rng(seed)
    if ch.flat:
        err = _cn(rng, ch.gains.shape[:2], est_error_var)[:, :, None]
    else:
        err = _cn(rng, ch.gains.shape, est_error_var)
    return ChannelRealization(
        gains=ch.gains,
        estimate=ch.gains + err,
        est_error_var=est_error_var,
        flat=ch.flat,
    )


# ---------------------------------------------------------------------------
# Received-signal composition

def ue_transmit_grid(frame: FrameConfig, ue: int, cfg: UeTxConfig, symbols: np.ndarray) -> np.ndarray:
    """Per-RE transmit samples of one UE on the flat grid (zeros off-allocation)."""
    symbols = np.asarray(symbols)
    if len(symbols) != frame.symbols_per_ue:
        raise PhyError(
            f"UE {ue}: expected {frame.symbols_per_ue} symbols, got {len(symbols)}"
        )
    x = np.zeros(frame.n_re, dtype=np.complex128)
    amp = np.sqrt(cfg.power)
    if isinstance(frame.mode, NomaWsma):
        s = frame.mode.signatures.column(cfg.signature_index)
        x[:] = amp * (symbols[:, None] * s[None, :]).reshape(-1)
    else:
        x[frame.group_res(frame.group_of(ue))] = amp * symbols
    return x


def compose_received(
    frame: FrameConfig,
    ues: list[UeTxConfig],
    symbols_per_ue: list[np.ndarray],
    ch: ChannelRealization,
    noise_var: float,
    noise_seed,
) -> np.ndarray:
    """Superimpose all UEs through their fading channels and add AWGN.

    Returns the (N_r, n_re) received grid. The noise draw depends only on
    ``noise_seed``, so two compositions with the same seed share one noise
    realization exactly.
    """
    if len(ues) != len(symbols_per_ue):
        raise PhyError("ues and symbols lists differ in length")
    if len(ues) > frame.user_count:
        raise PhyError(f"{len(ues)} UEs exceed frame capacity {frame.user_count}")
    if ch.gains.shape != (len(ues), frame.receive_antennas, frame.n_re):
        raise PhyError(
            f"channel shape {ch.gains.shape} does not match "
            f"({len(ues)}, {frame.receive_antennas}, {frame.n_re})"
        )
    if isinstance(frame.mode, NomaWsma):
        for cfg in ues:
            if cfg.signature_index >= frame.mode.signatures.user_count:
                raise PhyError(f"signature index {cfg.signature_index} out of range")
    y = np.zeros((frame.receive_antennas, frame.n_re), dtype=np.complex128)
    for ue, (cfg, syms) in enumerate(zip(ues, symbols_per_ue)):
        x = ue_transmit_grid(frame, ue, cfg, syms)
        y += ch.gains[ue] * x[None, :]
    rng = np.random.default_rng(noise_seed)
    y += _cn(rng, y.shape, noise_var) if noise_var > 0 else 0.0
    return y
