"""Multiuser receivers: joint MMSE detection, successive interference
cancellation, maximum ratio combining, max-log demapping and block decoding.

One detection "block" is a spread block of L consecutive REs stacked over all
receive antennas (NOMA) or a single RE of one group (MU-MIMO); in both cases
detection solves y = H x + z with one column per active UE.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import coding, phy
from .coding import CodeConfig
from .phy import ChannelRealization, FrameConfig, ModScheme, NomaWsma, UeTxConfig


class RxError(ValueError):
    pass


# decode cost per coded bit, the unit of the decoding-delay accounting
GAMMA_PER_BIT = 1.0


def decode_cost(n_coded_bits: int, alpha: float = GAMMA_PER_BIT) -> float:
    """Delay charged for one decode attempt of a codeword of given length."""
    return alpha * n_coded_bits


@dataclass(frozen=True)
class DecodeOutcome:
    """Per-UE result of one decode attempt."""

    ue: int
    crc_pass: bool
    bits: np.ndarray
    post_sinr_db: float
    decode_cost: float


@dataclass(frozen=True)
class EffectiveChannel:
    """Stacked per-block mixing matrices; column j belongs to ``ue_ids[j]``.

    ``matrix`` has shape (n_h, M, n_active) with n_h either 1 (channel flat
    across blocks) or the block count.
    """

    matrix: np.ndarray
    ue_ids: tuple[int, ...]


@dataclass(frozen=True)
class DetectionResult:
    """MMSE outputs per block and stream: estimate, bias and residual power."""

    estimates: np.ndarray  # (n_blocks, K) x_hat
    bias: np.ndarray       # (n_blocks, K) a_k = (WH)_kk
    residual: np.ndarray   # (n_blocks, K) interference + noise power after the filter

    @property
    def sinr(self) -> np.ndarray:
        return np.abs(self.bias) ** 2 / self.residual

    def stream(self, col: int):
        """Unbiased symbol estimates and per-symbol effective SNR of one column."""
        a = self.bias[:, col]
        safe = np.abs(a) > 1e-12
        z = np.where(safe, self.estimates[:, col] / np.where(safe, a, 1.0), 0.0)
        gamma = np.where(safe, self.sinr[:, col], 0.0)
        return z, gamma


def stack_blocks(frame: FrameConfig, y: np.ndarray, group: int = 0) -> np.ndarray:
    """Received grid -> (n_blocks, M) with antennas stacked per block."""
    res = frame.group_res(group)
    L = frame.spread_length
    sub = y[:, res]
    n_blocks = sub.shape[1] // L
    # (N_r, n_blocks, L) -> (n_blocks, N_r * L)
    return sub.reshape(sub.shape[0], n_blocks, L).transpose(1, 0, 2).reshape(n_blocks, -1)


def build_effective_channel(
    frame: FrameConfig,
    ues: list[UeTxConfig],
    ch: ChannelRealization,
    active: list[int] | None = None,
    group: int = 0,
) -> EffectiveChannel:
    """Per-block mixing matrix from the channel estimate (never the true gains)."""
    if active is None:
        active = [k for k in range(len(ues)) if frame.group_of(k) == group]
    res = frame.group_res(group)
    L = frame.spread_length
    h = ch.estimate[:, :, res]
    if ch.flat:
        h = h[:, :, :L]  # one block is representative
    cols = []
    for k in active:
        amp = np.sqrt(ues[k].power)
        hk = h[k]  # (N_r, n_res or L)
        if isinstance(frame.mode, NomaWsma):
            s = frame.mode.signatures.column(ues[k].signature_index)
            n_blocks = hk.shape[1] // L
            blocks = hk.reshape(hk.shape[0], n_blocks, L) * s[None, None, :]
            cols.append(amp * blocks.transpose(1, 0, 2).reshape(n_blocks, -1))
        else:
            cols.append(amp * hk.T)  # (n_res, N_r)
    matrix = np.stack(cols, axis=-1)
    return EffectiveChannel(matrix=matrix, ue_ids=tuple(active))


def mmse_detect(y_blocks: np.ndarray, H: np.ndarray, noise_var: float) -> DetectionResult:
    """Linear MMSE x_hat = (H^H H + noise_var I)^-1 H^H y per block.

    ``H`` may carry one matrix per block or a single shared matrix. With zero
    noise a rank-deficient system is reported as an error rather than being
    silently regularized.
    """
    y_blocks = np.atleast_2d(np.asarray(y_blocks))
    if H.ndim == 2:
        H = H[None]
    n_h, M, K = H.shape
    if y_blocks.shape[1] != M:
        raise RxError(f"block length {y_blocks.shape[1]} does not match H rows {M}")
    if noise_var < 0:
        raise RxError("noise_var must be nonnegative")
    n_blocks = y_blocks.shape[0]
    if n_h not in (1, n_blocks):
        raise RxError(f"{n_h} channel matrices for {n_blocks} blocks")
    Hh = H.conj().transpose(0, 2, 1)
    A = Hh @ H + noise_var * np.eye(K)[None]
    if noise_var == 0 and np.any(np.linalg.matrix_rank(H) < K):
        raise RxError("zero-noise detection with rank-deficient effective channel")
    W = np.linalg.solve(A, Hh)  # (n_h, K, M)
    WH = W @ H                  # (n_h, K, K)
    bias = np.einsum("hkk->hk", WH)
    interference = np.sum(np.abs(WH) ** 2, axis=2) - np.abs(bias) ** 2
    noise_out = noise_var * np.sum(np.abs(W) ** 2, axis=2)
    residual = np.maximum(interference + noise_out, 1e-300)
    estimates = np.einsum("hkm,bm->bk", W, y_blocks) if n_h == 1 else np.einsum(
        "bkm,bm->bk", W, y_blocks
    )
    bias_b = np.broadcast_to(bias, (n_blocks, K))
    residual_b = np.broadcast_to(residual, (n_blocks, K))
    return DetectionResult(estimates=estimates, bias=bias_b, residual=residual_b)


def demap_llrs(z: np.ndarray, gamma: np.ndarray, scheme: ModScheme) -> np.ndarray:
    """Max-log LLRs from unbiased symbol estimates; positive favours bit 0."""
    z = np.atleast_1d(np.asarray(z))
    g = np.broadcast_to(np.asarray(gamma, dtype=float), z.shape)
    pts = scheme.points
    labels = scheme.bit_labels
    d = np.abs(z[:, None] - pts[None, :]) ** 2  # (n_sym, n_points)
    m = scheme.bits_per_symbol
    llr = np.empty((len(z), m))
    for b in range(m):
        zero = labels[:, b] == 0
        llr[:, b] = d[:, ~zero].min(axis=1) - d[:, zero].min(axis=1)
    return (g[:, None] * llr).reshape(-1)


def demap_decode(
    z: np.ndarray,
    gamma: np.ndarray,
    scheme: ModScheme,
    code: CodeConfig,
    n_info: int,
    ue: int = 0,
    decoder=None,
) -> DecodeOutcome:
    """Demap one symbol stream and run the block decoder + CRC check."""
    llrs = demap_llrs(z, gamma, scheme)
    decoder = decoder or (lambda llr, cfg, n, ue: coding.decode(llr, cfg, n))
    block = decoder(llrs, code, n_info, ue)
    mean_sinr = float(np.mean(gamma))
    sinr_db = 10 * np.log10(mean_sinr) if mean_sinr > 0 else -np.inf
    return DecodeOutcome(
        ue=ue,
        crc_pass=block.crc_pass,
        bits=block.bits,
        post_sinr_db=sinr_db,
        decode_cost=decode_cost(len(llrs)),
    )


def mrc_combine(copies):
    """SINR-weighted combination of statistics of the same block.

    Each copy is (statistic, sinr); combined SINR is the plain sum, valid for
    independent post-detection noise.
    """
    if not copies:
        raise RxError("mrc_combine needs at least one copy")
    stats = [np.asarray(s) for s, _ in copies]
    sinrs = [np.asarray(g, dtype=float) for _, g in copies]
    total = sum(sinrs)
    weightsum = np.where(total > 0, total, 1.0)
    combined = sum(g * s for s, g in zip(stats, sinrs)) / weightsum
    return combined, total


def estimated_gain(ch: ChannelRealization, ue: int) -> float:
    """Scalar link quality used for SIC ordering: mean estimated link energy."""
    return float(np.mean(np.abs(ch.estimate[ue]) ** 2))


def _reconstruct_grid(frame, ue, cfg, bits, target_bits):
    coded = coding.encode(bits, cfg.code, target_bits)
    syms = phy.modulate(coded, cfg.modulation)
    return phy.ue_transmit_grid(frame, ue, cfg, syms)


def mmse_decode_frame(
    frame: FrameConfig,
    ues: list[UeTxConfig],
    y: np.ndarray,
    ch: ChannelRealization,
    noise_var: float,
    decoder=None,
) -> list[DecodeOutcome]:
    """Joint MMSE detection of all UEs followed by per-UE decoding.

    With the default decoder, UEs sharing one code geometry are block-decoded
    in a single batched pass.
    """
    groups = 1 if isinstance(frame.mode, NomaWsma) else frame.mode.groups
    streams: list[tuple[int, np.ndarray, np.ndarray]] = []
    for g in range(groups):
        eff = build_effective_channel(frame, ues, ch, group=g)
        det = mmse_detect(stack_blocks(frame, y, g), eff.matrix, noise_var)
        for col, k in enumerate(eff.ue_ids):
            z, gamma = det.stream(col)
            streams.append((k, z, gamma))
    streams.sort(key=lambda t: t[0])
    uniform = decoder is None and len(
        {(ues[k].modulation, ues[k].code, ues[k].info_bits) for k, _, _ in streams}
    ) == 1
    if uniform:
        k0 = streams[0][0]
        llrs = [demap_llrs(z, gamma, ues[k].modulation) for k, z, gamma in streams]
        blocks = coding.decode_many(llrs, ues[k0].code, ues[k0].info_bits)
        outcomes = []
        for (k, _, gamma), block, llr in zip(streams, blocks, llrs):
            mean_sinr = float(np.mean(gamma))
            outcomes.append(
                DecodeOutcome(
                    ue=k,
                    crc_pass=block.crc_pass,
                    bits=block.bits,
                    post_sinr_db=10 * np.log10(mean_sinr) if mean_sinr > 0 else -np.inf,
                    decode_cost=decode_cost(len(llr)),
                )
            )
        return outcomes
    return [
        demap_decode(
            z, gamma, ues[k].modulation, ues[k].code, ues[k].info_bits,
            ue=k, decoder=decoder,
        )
        for k, z, gamma in streams
    ]


def sic_decode(
    frame: FrameConfig,
    ues: list[UeTxConfig],
    y: np.ndarray,
    ch: ChannelRealization,
    noise_var: float,
    order: list[int] | None = None,
    decoder=None,
) -> list[DecodeOutcome]:
    """Successive interference cancellation over a whole frame.

    UEs are detected in ``order`` (default: descending estimated channel
    gain). After each CRC pass the decoded block is re-encoded, re-spread,
    passed through the *estimated* channel and subtracted; a CRC failure
    leaves the received signal untouched. Outcomes are returned in decode
    order.
    """
    K = len(ues)
    if order is None:
        order = sorted(range(K), key=lambda k: -estimated_gain(ch, k))
    if sorted(order) != list(range(K)):
        raise RxError(f"order {order} is not a permutation of 0..{K - 1}")
    residual = y.astype(np.complex128).copy()
    remaining = set(range(K))
    outcomes: list[DecodeOutcome] = []
    for k in order:
        g = frame.group_of(k)
        active = sorted(u for u in remaining if frame.group_of(u) == g)
        eff = build_effective_channel(frame, ues, ch, active=active, group=g)
        det = mmse_detect(stack_blocks(frame, residual, g), eff.matrix, noise_var)
        col = eff.ue_ids.index(k)
        z, gamma = det.stream(col)
        out = demap_decode(
            z, gamma, ues[k].modulation, ues[k].code, ues[k].info_bits,
            ue=k, decoder=decoder,
        )
        outcomes.append(out)
        remaining.discard(k)
        if out.crc_pass:
            target_bits = frame.symbols_per_ue * ues[k].modulation.bits_per_symbol
            x = _reconstruct_grid(frame, k, ues[k], out.bits, target_bits)
            residual -= ch.estimate[k] * x[None, :]
    return outcomes
