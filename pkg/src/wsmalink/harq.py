"""Slot-based HARQ state machines for paired-UE NOMA retransmission schemes.

Four protocol variants share one episode engine:

* ``baseline_rtd``    - both UEs share a band; every failed block is
  retransmitted by its owner and chase-combined at the receiver.
* ``smart``           - after a double failure only the strong UE retransmits
  while the weak UE delays (keeps sending new data); once the strong UE's
  block is resolved, its interference is cancelled from every buffered slot
  and the weak UE's signals are decoded, retransmitting only what remains.
* ``dynamic_pairing`` - a failed strong UE retransmits paired with a fresh
  stronger partner while the weak UE moves to an orthogonal band.
* ``ma_adaptation``   - OMA start on dedicated bands; a failed UE repeats its
  block on both bands in later rounds and all copies are combined.

Every UE is full-buffered: a transmission opportunity with no retransmission
duty sends a new block. An episode runs a fixed number of slots; the BS
attempts, in descending gain order and to a fixed point, to decode every
buffered undecoded block each slot, cancelling decoded blocks retroactively
from all buffered observations.

Two decoding backends implement the same interface: an abstract
accumulate-SINR model (a block decodes once the sum of its combined copies'
SINRs reaches 2^rate - 1), which makes episodes exactly enumerable, and a
full PHY backend running the real modulate/spread/MMSE/decode chain.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import coding, phy, rx
from .coding import CodeConfig
from .phy import FrameConfig, ModScheme, NomaWsma, UeTxConfig
from .seqdesign import PiKind, generate


class HarqError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Block:
    ue: int
    seq: int


@dataclass(frozen=True)
class GainDist:
    """Discrete channel-gain distribution for the abstract backend."""

    values: tuple[float, ...] = (1.0,)
    probs: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        if len(self.values) != len(self.probs) or not self.values:
            raise HarqError("gain values and probs must align and be non-empty")
        if abs(sum(self.probs) - 1.0) > 1e-9:
            raise HarqError("gain probabilities must sum to 1")

    def draw(self, rng) -> float:
        return float(rng.choice(self.values, p=self.probs))

    @property
    def mean(self) -> float:
        return float(np.dot(self.values, self.probs))


@dataclass(frozen=True)
class PhyLink:
    """Frame geometry for one band of the PHY backend."""

    spread_length: int = 4
    n_prb: int = 1
    data_symbols: int = 12
    receive_antennas: int = 2
    modulation: str = "qpsk"
    tbs_bytes: int = 4
    code_kind: str = "uncoded"
    rep_factor: int = 2
    noise_var: float = 1.0
    est_error_var: float = 0.0


@dataclass(frozen=True)
class EpisodeConfig:
    """One protocol episode: pairing, rates, channel statistics, policies.

    UE 0 is the cell-center (strong) UE, UE 1 the cell-edge UE; the optional
    re-pairing candidate of ``dynamic_pairing`` is UE 2 with the best channel.
    """

    protocol: str = "baseline_rtd"
    backend: str = "accum_snr"  # or "phy"
    max_retx: int = 4
    horizon: int = 20
    rates: tuple[float, ...] = (1.0, 1.0)    # bits/symbol; theta = 2^r - 1
    powers: tuple[float, ...] = (1.0, 1.0)
    gains: tuple[GainDist, ...] = (GainDist((2.0,)), GainDist((1.0,)))
    gain_process: str = "per_episode"        # or "per_slot"
    rx_adaptation: bool = False
    decode_cost_unit: float = 4.0            # Gamma(L) per decode attempt
    pool_gain: GainDist | None = None        # UE0 of dynamic pairing
    pool_power: float = 1.0
    pool_rate: float = 1.0
    phy_link: PhyLink = field(default_factory=PhyLink)

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise HarqError(f"unknown protocol {self.protocol!r}")
        if self.backend not in ("accum_snr", "phy"):
            raise HarqError(f"unknown backend {self.backend!r}")
        if self.gain_process not in ("per_episode", "per_slot"):
            raise HarqError(f"unknown gain process {self.gain_process!r}")
        if self.max_retx < 0 or self.horizon < 1:
            raise HarqError("max_retx must be >= 0 and horizon >= 1")
        if not (len(self.rates) == len(self.powers) == len(self.gains) == 2):
            raise HarqError("exactly two paired UEs are configured per episode")
        if self.gains[0].mean < self.gains[1].mean:
            raise HarqError("UE 0 must be the statistically stronger UE")

    @property
    def ue_count(self) -> int:
        return 3 if self.protocol == "dynamic_pairing" and self.pool_gain else 2

    def theta(self, ue: int) -> float:
        return 2.0 ** self.rate(ue) - 1.0

    def rate(self, ue: int) -> float:
        return self.pool_rate if ue == 2 else self.rates[ue]

    def power(self, ue: int) -> float:
        return self.pool_power if ue == 2 else self.powers[ue]

    def gain_dist(self, ue: int) -> GainDist:
        return self.pool_gain if ue == 2 else self.gains[ue]


@dataclass(frozen=True)
class UeHarqStats:
    terminated: int
    delivered: int
    dropped: int
    mean_retx: float | None
    mean_delay: float | None   # slots + decode-cost units, delivered blocks
    throughput: float          # info bits per slot


@dataclass(frozen=True)
class HarqMetrics:
    per_ue: tuple[UeHarqStats, ...]
    fairness: float
    decode_cost_total: float
    slots: int
    degraded_to_baseline: bool = False
    events: tuple[dict, ...] = ()


def jain_fairness(values) -> float:
    x = np.asarray(values, dtype=float)
    if len(x) == 0 or np.all(x == 0):
        return 1.0
    return float(np.sum(x) ** 2 / (len(x) * np.sum(x**2)))


# ---------------------------------------------------------------------------
# Backends

@dataclass
class _Copy:
    block: Block
    signal_power: float
    interferers: list[tuple[Block, float]]


class AccumSnrBackend:
    """Threshold decoding on accumulated SINR with exact hard cancellation.

    Every received copy remembers its co-channel blocks; an interferer stops
    counting the moment its block is decoded, which also upgrades previously
    buffered copies.
    """

    def __init__(self, cfg: EpisodeConfig):
        self.cfg = cfg
        self._gains: dict[tuple[int, int], float] = {}
        self._episode_gain: dict[int, float] = {}
        self._copies: dict[Block, list[_Copy]] = {}
        self._decoded: set[Block] = set()
        self._rng = None

    def begin_episode(self, rng):
        self._rng = rng
        self._gains.clear()
        self._episode_gain = {
            ue: self.cfg.gain_dist(ue).draw(rng) for ue in range(self.cfg.ue_count)
        }
        self._copies.clear()
        self._decoded.clear()

    def gain(self, ue: int, slot: int) -> float:
        if self.cfg.gain_process == "per_episode":
            return self._episode_gain[ue]
        key = (ue, slot)
        if key not in self._gains:
            self._gains[key] = self.cfg.gain_dist(ue).draw(self._rng)
        return self._gains[key]

    def order_gain(self, ue: int, slot: int) -> float:
        return self.cfg.power(ue) * self.gain(ue, slot)

    def new_block(self, block: Block):
        pass  # no payload needed in the abstract model

    def block_bits(self, block: Block) -> float:
        return self.cfg.rate(block.ue)

    def receive_slot(self, slot: int, per_band: dict[int, list[Block]]):
        for band_blocks in per_band.values():
            received = [
                (b, self.cfg.power(b.ue) * self.gain(b.ue, slot)) for b in band_blocks
            ]
            for b, sp in received:
                others = [(ob, op) for ob, op in received if ob != b]
                self._copies.setdefault(b, []).append(
                    _Copy(block=b, signal_power=sp, interferers=others)
                )

    def accumulated_sinr(self, block: Block) -> float:
        total = 0.0
        for copy in self._copies.get(block, []):
            assert copy.block == block
            interference = sum(
                p for ob, p in copy.interferers if ob not in self._decoded
            )
            total += copy.signal_power / (1.0 + interference)
        return total

    def try_decode(self, block: Block):
        sinr = self.accumulated_sinr(block)
        return sinr >= self.cfg.theta(block.ue), sinr

    def mark_decoded(self, block: Block):
        self._decoded.add(block)

    def attempt_cost(self, block: Block) -> float:
        return self.cfg.decode_cost_unit


class PhyBackend:
    """Full transmit/receive chain per slot with buffered raw observations.

    Channels are static across the episode and independent per (UE, band).
    Decoding a block MMSE-detects each buffered copy against the still-active
    co-channel blocks, MRC-combines the per-symbol streams, demaps and runs
    the block decoder; cancellations subtract the re-encoded signal through
    the estimated channel from every buffered observation.
    """

    def __init__(self, cfg: EpisodeConfig, n_bands: int = 2):
        self.cfg = cfg
        link = cfg.phy_link
        self.n_ues = cfg.ue_count
        with warnings.catch_warnings():
            # underloaded signature sets are intentional for small pairs
            warnings.simplefilter("ignore")
            sigs = generate(max(self.n_ues, 2), link.spread_length, PiKind.TSC)
        self.frame = FrameConfig(
            mode=NomaWsma(sigs),
            n_prb=link.n_prb,
            data_symbols=link.data_symbols,
            receive_antennas=link.receive_antennas,
        )
        self.mod = ModScheme(link.modulation)
        self.code = CodeConfig(
            kind=link.code_kind,
            rep_factor=link.rep_factor,
            crc_bits=16,
        )
        self.target_bits = self.frame.symbols_per_ue * self.mod.bits_per_symbol
        payload = 8 * link.tbs_bytes + self.code.crc_bits
        if self.target_bits < payload:
            raise HarqError(
                f"phy link carries {self.target_bits} bits < payload {payload}"
            )
        self.n_bands = n_bands
        self.noise_var = link.noise_var

    def begin_episode(self, rng):
        self._rng = rng
        link = self.cfg.phy_link
        Nr = self.frame.receive_antennas
        shape = (self.n_bands, self.n_ues, Nr)
        h = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
        if link.est_error_var > 0:
            err = (
                rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
            ) * np.sqrt(link.est_error_var / 2)
            est = h + err
        else:
            est = h
        self._h, self._est = h, est
        self._payloads: dict[Block, np.ndarray] = {}
        self._symbols: dict[Block, np.ndarray] = {}
        self._slots: list[tuple[int, int, np.ndarray, list[Block]]] = []
        self._decoded: set[Block] = set()
        self._decoded_bits: dict[Block, np.ndarray] = {}

    def _ue_cfg(self, ue: int) -> UeTxConfig:
        return UeTxConfig(
            power=self.cfg.power(ue),
            signature_index=ue,
            modulation=self.mod,
            tbs_bytes=self.cfg.phy_link.tbs_bytes,
            code=self.code,
        )

    def gain(self, ue: int, slot: int) -> float:
        return float(np.mean(np.abs(self._est[:, ue]) ** 2))

    def order_gain(self, ue: int, slot: int) -> float:
        return self.cfg.power(ue) * self.gain(ue, slot)

    def new_block(self, block: Block):
        bits = self._rng.integers(0, 2, 8 * self.cfg.phy_link.tbs_bytes).astype(np.uint8)
        self._payloads[block] = bits
        coded = coding.encode(bits, self.code, self.target_bits)
        self._symbols[block] = phy.modulate(coded, self.mod)

    def block_bits(self, block: Block) -> float:
        return float(8 * self.cfg.phy_link.tbs_bytes)

    def payload(self, block: Block) -> np.ndarray:
        return self._payloads[block]

    def receive_slot(self, slot: int, per_band: dict[int, list[Block]]):
        n_re = self.frame.n_re
        for band, blocks in per_band.items():
            if not blocks:
                continue
            ues = [self._ue_cfg(b.ue) for b in blocks]
            syms = [self._symbols[b] for b in blocks]
            links = [b.ue for b in blocks]
            sub = phy.ChannelRealization(
                gains=np.repeat(self._h[band][links][:, :, None], n_re, axis=2),
                estimate=np.repeat(self._est[band][links][:, :, None], n_re, axis=2),
                flat=True,
            )
            y = phy.compose_received(
                self.frame, ues, syms, sub, self.noise_var,
                noise_seed=int(self._rng.integers(0, 2**63)),
            )
            self._slots.append((slot, band, y, list(blocks)))

    def try_decode(self, block: Block):
        n_re = self.frame.n_re
        streams = []
        for slot, band, y, blocks in self._slots:
            if block not in blocks:
                continue
            active = [b for b in blocks if b not in self._decoded]
            ues = [self._ue_cfg(b.ue) for b in active]
            est = np.repeat(
                self._est[band][[b.ue for b in active]][:, :, None], n_re, axis=2
            )
            ch = phy.ChannelRealization(gains=est, estimate=est, flat=True)
            eff = rx.build_effective_channel(
                self.frame, ues, ch, active=list(range(len(active)))
            )
            det = rx.mmse_detect(rx.stack_blocks(self.frame, y), eff.matrix, self.noise_var)
            streams.append(det.stream(active.index(block)))
        if not streams:
            return False, 0.0
        z, gamma = rx.mrc_combine(streams)
        llrs = rx.demap_llrs(z, gamma, self.mod)
        got = coding.decode(llrs, self.code, 8 * self.cfg.phy_link.tbs_bytes)
        if got.crc_pass:
            self._decoded_bits[block] = got.bits
        return got.crc_pass, float(np.mean(gamma))

    def mark_decoded(self, block: Block):
        self._decoded.add(block)
        bits = self._decoded_bits.get(block, self._payloads[block])
        coded = coding.encode(bits, self.code, self.target_bits)
        syms = phy.modulate(coded, self.mod)
        for i, (slot, band, y, blocks) in enumerate(self._slots):
            if block not in blocks:
                continue
            idx = blocks.index(block)
            x = phy.ue_transmit_grid(self.frame, idx, self._ue_cfg(block.ue), syms)
            hk = self._est[band][block.ue]
            self._slots[i] = (slot, band, y - hk[:, None] * x[None, :], blocks)

    def attempt_cost(self, block: Block) -> float:
        return self.cfg.decode_cost_unit


def make_backend(cfg: EpisodeConfig):
    if cfg.backend == "accum_snr":
        return AccumSnrBackend(cfg)
    return PhyBackend(cfg)


# ---------------------------------------------------------------------------
# Episode engine

@dataclass
class _ProcState:
    block: Block
    first_slot: int
    transmissions: int = 0
    attempts_cost: float = 0.0
    status: str = "pending"  # pending | acked | dropped
    terminal_slot: int | None = None

    @property
    def retx_used(self) -> int:
        return max(self.transmissions - 1, 0)


class _Episode:
    """Shared bookkeeping: block lifecycle, feedback log, decode fixed point."""

    def __init__(self, cfg: EpisodeConfig, backend, rng):
        self.cfg = cfg
        self.backend = backend
        self.rng = rng
        self.procs: dict[Block, _ProcState] = {}
        self.events: list[dict] = []
        self.seq = [0] * cfg.ue_count
        self.cost_total = 0.0
        backend.begin_episode(rng)

    def log(self, slot, ue, action, band=None, outcome=None, sinr=None, seq=None):
        self.events.append(
            {"slot": slot, "ue": ue, "action": action, "band": band,
             "outcome": outcome, "sinr": sinr, "seq": seq}
        )

    def new_block(self, ue: int, slot: int) -> Block:
        b = Block(ue=ue, seq=self.seq[ue])
        self.seq[ue] += 1
        self.backend.new_block(b)
        self.procs[b] = _ProcState(block=b, first_slot=slot)
        return b

    def transmit(self, b: Block, slot: int, band: int):
        st = self.procs[b]
        if st.status != "pending":
            raise HarqError(f"block {b} transmitted after terminal status")
        if st.transmissions > self.cfg.max_retx:
            raise HarqError(f"block {b} exceeded max retransmissions")
        st.transmissions += 1
        self.log(slot, b.ue, "retx" if st.transmissions > 1 else "tx", band=band, seq=b.seq)

    def pending_blocks(self):
        return [b for b, st in self.procs.items() if st.status == "pending"]

    def undecoded_transmitted(self):
        return [
            b for b, st in self.procs.items()
            if st.status == "pending" and st.transmissions > 0
        ]

    def decode_all(self, slot: int):
        """Descending-gain decode of every buffered block, to a fixed point.

        A block is re-attempted within the slot only after some other decode
        changed its interference state. With receiver adaptation on, a failure
        of the slot's first attempt skips every remaining decode of the slot.
        """
        decoded = []
        first_attempt = True
        cancellations = 0
        seen_state: dict[Block, int] = {}
        progress = True
        while progress:
            progress = False
            order = sorted(
                self.undecoded_transmitted(),
                key=lambda b: (-self.backend.order_gain(b.ue, slot), b.ue, b.seq),
            )
            for b in order:
                if seen_state.get(b) == cancellations:
                    continue  # nothing changed since its last attempt
                seen_state[b] = cancellations
                ok, sinr = self.backend.try_decode(b)
                cost = self.backend.attempt_cost(b)
                self.cost_total += cost
                self.procs[b].attempts_cost += cost
                self.log(slot, b.ue, "decode", outcome="pass" if ok else "fail",
                         sinr=round(float(sinr), 9), seq=b.seq)
                if ok:
                    self.backend.mark_decoded(b)
                    cancellations += 1
                    st = self.procs[b]
                    st.status = "acked"
                    st.terminal_slot = slot
                    self.log(slot, b.ue, "ack", seq=b.seq)
                    decoded.append(b)
                    progress = True
                elif first_attempt and self.cfg.rx_adaptation:
                    self.log(slot, b.ue, "skip_rest", seq=b.seq)
                    return decoded
                first_attempt = False
        return decoded

    def enforce_drops(self, slot: int):
        for b in self.pending_blocks():
            st = self.procs[b]
            if st.transmissions >= self.cfg.max_retx + 1:
                st.status = "dropped"
                st.terminal_slot = slot
                self.log(slot, b.ue, "drop", seq=b.seq)

    def head_undecoded(self, ue: int) -> Block | None:
        cands = [
            b for b, st in self.procs.items()
            if b.ue == ue and st.status == "pending" and st.transmissions > 0
        ]
        return min(cands, key=lambda b: b.seq) if cands else None

    def metrics(self, degraded=False) -> HarqMetrics:
        per_ue = []
        throughputs = []
        for ue in range(self.cfg.ue_count):
            blocks = [st for b, st in self.procs.items() if b.ue == ue]
            term = [st for st in blocks if st.status in ("acked", "dropped")]
            acked = [st for st in blocks if st.status == "acked"]
            dropped = [st for st in blocks if st.status == "dropped"]
            mean_retx = (
                float(np.mean([st.retx_used for st in term])) if term else None
            )
            mean_delay = (
                float(
                    np.mean(
                        [
                            (st.terminal_slot - st.first_slot + 1) + st.attempts_cost
                            for st in acked
                        ]
                    )
                )
                if acked
                else None
            )
            bits = sum(self.backend.block_bits(st.block) for st in acked)
            tp = bits / self.cfg.horizon
            throughputs.append(tp)
            per_ue.append(
                UeHarqStats(
                    terminated=len(term),
                    delivered=len(acked),
                    dropped=len(dropped),
                    mean_retx=mean_retx,
                    mean_delay=mean_delay,
                    throughput=tp,
                )
            )
        return HarqMetrics(
            per_ue=tuple(per_ue),
            fairness=jain_fairness(throughputs),
            decode_cost_total=self.cost_total,
            slots=self.cfg.horizon,
            degraded_to_baseline=degraded,
            events=tuple(self.events),
        )


def _episode_rng(cfg: EpisodeConfig, seed):
    parts = list(seed) if isinstance(seed, (tuple, list)) else [seed]
    return np.random.default_rng(np.random.SeedSequence([0x4A51, *parts]))


# ---------------------------------------------------------------------------
# Protocols

def run_baseline_rtd(cfg: EpisodeConfig, backend=None, seed: int = 0) -> HarqMetrics:
    """Shared-band RTD: each UE retransmits its own failed block; the BS
    chase-combines all buffered copies every slot."""
    backend = backend or make_backend(cfg)
    ep = _Episode(cfg, backend, _episode_rng(cfg, seed))
    for slot in range(cfg.horizon):
        txs = []
        for ue in (0, 1):
            b = ep.head_undecoded(ue) or ep.new_block(ue, slot)
            ep.transmit(b, slot, band=0)
            txs.append(b)
        backend.receive_slot(slot, {0: txs})
        ep.decode_all(slot)
        for b in txs:
            if ep.procs[b].status == "pending":
                ep.log(slot, b.ue, "nack", band=0, seq=b.seq)
        ep.enforce_drops(slot)
    return ep.metrics()


def run_smart_harq(cfg: EpisodeConfig, backend=None, seed: int = 0) -> HarqMetrics:
    """Delay the weak UE's retransmissions while the strong UE retransmits.

    On a double failure the weak UE keeps sending new data; once the strong
    UE's failed block is resolved (decoded or dropped), cancellation frees the
    buffered weak-UE signals and only still-undecoded ones are retransmitted.
    """
    backend = backend or make_backend(cfg)
    ep = _Episode(cfg, backend, _episode_rng(cfg, seed))
    for slot in range(cfg.horizon):
        ue1_retx = ep.head_undecoded(0)
        b1 = ue1_retx or ep.new_block(0, slot)
        # the weak UE delays (sends new data) whenever the strong UE is
        # occupied by a retransmission and something of UE2's is buffered
        delaying = ue1_retx is not None and ep.head_undecoded(1) is not None
        if delaying:
            ep.log(slot, 1, "delay")
            b2 = ep.new_block(1, slot)
        else:
            b2 = ep.head_undecoded(1) or ep.new_block(1, slot)
        ep.transmit(b1, slot, band=0)
        ep.transmit(b2, slot, band=0)
        backend.receive_slot(slot, {0: [b1, b2]})
        ep.decode_all(slot)
        for b in (b1, b2):
            if ep.procs[b].status == "pending":
                ep.log(slot, b.ue, "nack", band=0, seq=b.seq)
        ep.enforce_drops(slot)
    return ep.metrics()


def run_dynamic_pairing(cfg: EpisodeConfig, backend=None, seed: int = 0) -> HarqMetrics:
    """Re-pair a failed strong UE with a fresh, stronger candidate.

    While the strong UE retransmits it shares its band with the candidate's
    new data; the weak UE retransmits on a separate orthogonal band,
    interference-free. Without a candidate the run degrades to baseline RTD.
    """
    degraded = cfg.pool_gain is None
    if degraded:
        base = run_baseline_rtd(cfg, backend=backend, seed=seed)
        return replace(base, degraded_to_baseline=True)
    backend = backend or make_backend(cfg)
    ep = _Episode(cfg, backend, _episode_rng(cfg, seed))
    for slot in range(cfg.horizon):
        per_band: dict[int, list[Block]] = {0: [], 1: []}
        ue1_retx = ep.head_undecoded(0)
        if ue1_retx is not None:
            # retransmission round: UE0 joins on band 0, UE2 moves to band 1
            ep.transmit(ue1_retx, slot, band=0)
            b0 = ep.new_block(2, slot)
            ep.transmit(b0, slot, band=0)
            per_band[0] = [ue1_retx, b0]
            b2 = ep.head_undecoded(1) or ep.new_block(1, slot)
            ep.transmit(b2, slot, band=1)
            per_band[1] = [b2]
        else:
            b1 = ep.new_block(0, slot)
            b2 = ep.head_undecoded(1) or ep.new_block(1, slot)
            ep.transmit(b1, slot, band=0)
            ep.transmit(b2, slot, band=0)
            per_band[0] = [b1, b2]
        backend.receive_slot(slot, per_band)
        ep.decode_all(slot)
        for blocks in per_band.values():
            for b in blocks:
                if ep.procs[b].status == "pending":
                    ep.log(slot, b.ue, "nack", seq=b.seq)
        ep.enforce_drops(slot)
    return ep.metrics()


def run_ma_adaptation(cfg: EpisodeConfig, backend=None, seed: int = 0) -> HarqMetrics:
    """OMA with band reuse in retransmission rounds.

    Each UE owns one band; a UE retransmitting a failed block repeats the
    same signal on both bands while the other UE keeps to its own band, and
    the BS combines every buffered copy (cancelling what it can first).
    """
    backend = backend or make_backend(cfg)
    ep = _Episode(cfg, backend, _episode_rng(cfg, seed))
    for slot in range(cfg.horizon):
        per_band: dict[int, list[Block]] = {0: [], 1: []}
        for ue in (0, 1):
            own = ue  # band ownership follows the UE index
            retx = ep.head_undecoded(ue)
            if retx is not None:
                ep.transmit(retx, slot, band=own)
                per_band[own].append(retx)
                per_band[1 - own].append(retx)  # same signal reuses the other band
                ep.log(slot, ue, "band_reuse", band=1 - own)
            else:
                b = ep.new_block(ue, slot)
                ep.transmit(b, slot, band=own)
                per_band[own].append(b)
        backend.receive_slot(slot, per_band)
        ep.decode_all(slot)
        for b in dict.fromkeys(per_band[0] + per_band[1]):
            if ep.procs[b].status == "pending":
                ep.log(slot, b.ue, "nack", seq=b.seq)
        ep.enforce_drops(slot)
    return ep.metrics()


PROTOCOLS = {
    "baseline_rtd": run_baseline_rtd,
    "smart": run_smart_harq,
    "dynamic_pairing": run_dynamic_pairing,
    "ma_adaptation": run_ma_adaptation,
}


def run_episode(cfg: EpisodeConfig, seed: int = 0, backend=None) -> HarqMetrics:
    return PROTOCOLS[cfg.protocol](cfg, backend=backend, seed=seed)


def apply_rx_adaptation(policy: bool, sic_run: list[rx.DecodeOutcome]):
    """Receiver adaptation over one slot's ordered SIC outcomes.

    If the first decode failed, every later decode is skipped; the return is
    the outcomes actually produced plus the decode delay charged.
    """
    if not sic_run:
        return [], 0.0
    if not policy or sic_run[0].crc_pass:
        return list(sic_run), float(sum(o.decode_cost for o in sic_run))
    return [sic_run[0]], float(sic_run[0].decode_cost)


def events_to_json(metrics: HarqMetrics) -> str:
    """Episode trace as a JSON event log."""
    return json.dumps(list(metrics.events), indent=1)
