"""Block coding surrogates: CRC-16 framing, repetition and rate-1/2
convolutional (constraint length 7) codes, and cyclic/punctured rate matching
so every codeword exactly fills its allocated modulation payload.

LLR convention throughout: positive values vote for bit 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class CodingError(ValueError):
    pass


@dataclass(frozen=True)
class CodeConfig:
    """Channel-code selection for one transport block.

    kind: "uncoded", "repetition" (factor-fold duplication) or
    "convolutional" (rate 1/2, constraint length 7, zero-terminated).
    """

    kind: str = "convolutional"
    rep_factor: int = 2
    crc_bits: int = 16

    def __post_init__(self):
        if self.kind not in ("uncoded", "repetition", "convolutional"):
            raise CodingError(f"unknown code kind {self.kind!r}")
        if self.kind == "repetition" and self.rep_factor < 1:
            raise CodingError("rep_factor must be >= 1")
        if self.crc_bits not in (0, 16):
            raise CodingError("crc_bits must be 0 or 16")


# ---------------------------------------------------------------------------
# CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF)

_CRC_POLY = 0x1021
_CRC_INIT = 0xFFFF


def _build_crc_table():
    table = np.zeros(256, dtype=np.uint16)
    for byte in range(256):
        reg = byte << 8
        for _ in range(8):
            reg = ((reg << 1) ^ _CRC_POLY) if reg & 0x8000 else (reg << 1)
            reg &= 0xFFFF
        table[byte] = reg
    return table


_CRC_TABLE = _build_crc_table()


def crc16(bits: np.ndarray) -> np.ndarray:
    """CRC-16 of a bit vector (MSB-first), returned as 16 bits."""
    bits = np.asarray(bits, dtype=np.uint8)
    reg = _CRC_INIT
    n_bytes = len(bits) // 8
    if n_bytes:
        packed = np.packbits(bits[: n_bytes * 8])
        for byte in packed:
            reg = ((reg << 8) & 0xFFFF) ^ int(_CRC_TABLE[(reg >> 8) ^ byte])
    for b in bits[n_bytes * 8 :]:
        reg ^= int(b) << 15
        reg = ((reg << 1) ^ _CRC_POLY) if reg & 0x8000 else (reg << 1)
        reg &= 0xFFFF
    return ((reg >> np.arange(15, -1, -1)) & 1).astype(np.uint8)


def crc_append(bits: np.ndarray, crc_bits: int = 16) -> np.ndarray:
    if crc_bits == 0:
        return np.asarray(bits, dtype=np.uint8)
    return np.concatenate([np.asarray(bits, dtype=np.uint8), crc16(bits)])


def crc_ok(payload: np.ndarray, crc_bits: int = 16) -> bool:
    if crc_bits == 0:
        return True
    return bool(np.array_equal(crc16(payload[:-crc_bits]), payload[-crc_bits:]))


# ---------------------------------------------------------------------------
# Convolutional code (171, 133) octal, K=7

_K_CONST = 7
_N_STATES = 1 << (_K_CONST - 1)
_G0_TAPS = np.array([1, 1, 1, 1, 0, 0, 1], dtype=np.uint8)  # 0o171, newest first
_G1_TAPS = np.array([1, 0, 1, 1, 0, 1, 1], dtype=np.uint8)  # 0o133


def _build_trellis():
    # state holds the previous K-1 inputs, most recent in the MSB
    nxt = np.zeros((_N_STATES, 2), dtype=np.int64)
    out = np.zeros((_N_STATES, 2, 2), dtype=np.int8)
    for s in range(_N_STATES):
        for b in (0, 1):
            reg = (b << (_K_CONST - 1)) | s
            reg_bits = (reg >> np.arange(_K_CONST - 1, -1, -1)) & 1
            out[s, b, 0] = np.bitwise_xor.reduce(reg_bits & _G0_TAPS)
            out[s, b, 1] = np.bitwise_xor.reduce(reg_bits & _G1_TAPS)
            nxt[s, b] = reg >> 1
    # reverse transitions for the add-compare-select recursion
    in_s = np.zeros((_N_STATES, 2), dtype=np.int64)
    in_b = np.zeros((_N_STATES, 2), dtype=np.int64)
    count = np.zeros(_N_STATES, dtype=np.int64)
    for s in range(_N_STATES):
        for b in (0, 1):
            ns = nxt[s, b]
            in_s[ns, count[ns]] = s
            in_b[ns, count[ns]] = b
            count[ns] += 1
    return nxt, out, in_s, in_b


_NEXT, _OUT, _IN_S, _IN_B = _build_trellis()
# per-(state, input) signs of the two output bits: +1 encodes bit 0
_OUT_SIGN = (1.0 - 2.0 * _OUT).astype(np.float64)


def conv_encode(bits: np.ndarray) -> np.ndarray:
    """Zero-terminated rate-1/2 encoding; output length 2*(len(bits)+6)."""
    u = np.concatenate(
        [np.asarray(bits, dtype=np.uint8), np.zeros(_K_CONST - 1, dtype=np.uint8)]
    )
    c0 = np.convolve(u, _G0_TAPS)[: len(u)] % 2
    c1 = np.convolve(u, _G1_TAPS)[: len(u)] % 2
    out = np.empty(2 * len(u), dtype=np.uint8)
    out[0::2] = c0
    out[1::2] = c1
    return out


def viterbi_decode(llrs: np.ndarray, n_info: int) -> np.ndarray:
    """Soft ML decoding of zero-terminated codewords.

    ``llrs`` has shape (..., 2*(n_info+6)); leading axes are independent
    codewords decoded in one pass.
    """
    llrs = np.asarray(llrs, dtype=np.float64)
    n_steps = n_info + _K_CONST - 1
    if llrs.shape[-1] != 2 * n_steps:
        raise CodingError(
            f"expected {2 * n_steps} code LLRs, got {llrs.shape[-1]}"
        )
    lead = llrs.shape[:-1]
    flat = llrs.reshape(-1, 2 * n_steps)
    B = flat.shape[0]
    half = 0.5 * flat.reshape(B, n_steps, 2)

    metric = np.full((B, _N_STATES), -np.inf)
    metric[:, 0] = 0.0
    back = np.zeros((n_steps, B, _N_STATES), dtype=np.int8)
    s0, s1 = _IN_S[:, 0], _IN_S[:, 1]
    b0, b1 = _IN_B[:, 0], _IN_B[:, 1]
    for t in range(n_steps):
        bm = (
            _OUT_SIGN[None, :, :, 0] * half[:, t, 0, None, None]
            + _OUT_SIGN[None, :, :, 1] * half[:, t, 1, None, None]
        )  # (B, state, input)
        cand0 = metric[:, s0] + bm[:, s0, b0]
        cand1 = metric[:, s1] + bm[:, s1, b1]
        take1 = cand1 > cand0
        metric = np.where(take1, cand1, cand0)
        back[t] = take1
    # zero tail forces the terminal state to 0
    state = np.zeros(B, dtype=np.int64)
    bits = np.empty((B, n_steps), dtype=np.uint8)
    rows = np.arange(B)
    for t in range(n_steps - 1, -1, -1):
        k = back[t, rows, state]
        bits[:, t] = _IN_B[state, k]
        state = _IN_S[state, k]
    return bits[:, :n_info].reshape(*lead, n_info)


# ---------------------------------------------------------------------------
# Rate matching

def _mother_codeword(payload: np.ndarray, cfg: CodeConfig) -> np.ndarray:
    if cfg.kind == "uncoded":
        return payload
    if cfg.kind == "repetition":
        return np.repeat(payload, cfg.rep_factor)
    return conv_encode(payload)


def mother_length(cfg: CodeConfig, n_payload: int) -> int:
    if cfg.kind == "uncoded":
        return n_payload
    if cfg.kind == "repetition":
        return n_payload * cfg.rep_factor
    return 2 * (n_payload + _K_CONST - 1)


def _rate_match_indices(n_mother: int, target_bits: int) -> np.ndarray:
    if target_bits >= n_mother:
        return np.arange(target_bits) % n_mother
    return (np.arange(target_bits) * n_mother) // target_bits


def encode(info_bits: np.ndarray, cfg: CodeConfig, target_bits: int) -> np.ndarray:
    """CRC framing + channel coding + rate matching to exactly target_bits."""
    info_bits = np.asarray(info_bits, dtype=np.uint8)
    payload = crc_append(info_bits, cfg.crc_bits)
    if target_bits < len(payload):
        raise CodingError(
            f"target_bits={target_bits} below payload size {len(payload)}"
        )
    mother = _mother_codeword(payload, cfg)
    return mother[_rate_match_indices(len(mother), target_bits)]


@dataclass(frozen=True)
class DecodedBlock:
    bits: np.ndarray  # info bits, CRC stripped
    crc_pass: bool


def _derate(llrs: np.ndarray, cfg: CodeConfig, n_payload: int) -> np.ndarray:
    n_mother = mother_length(cfg, n_payload)
    acc = np.zeros(n_mother)
    np.add.at(acc, _rate_match_indices(n_mother, len(llrs)), llrs)
    return acc


def _payload_from_mother(acc: np.ndarray, cfg: CodeConfig, n_payload: int) -> np.ndarray:
    if cfg.kind == "uncoded":
        return (acc < 0).astype(np.uint8)
    if cfg.kind == "repetition":
        per_bit = acc.reshape(*acc.shape[:-1], n_payload, cfg.rep_factor).sum(axis=-1)
        return (per_bit < 0).astype(np.uint8)
    return viterbi_decode(acc, n_payload)


def _check(payload: np.ndarray, cfg: CodeConfig) -> DecodedBlock:
    if cfg.crc_bits:
        ok = crc_ok(payload, cfg.crc_bits)
        return DecodedBlock(bits=payload[: -cfg.crc_bits], crc_pass=ok)
    return DecodedBlock(bits=payload, crc_pass=True)


def decode(llrs: np.ndarray, cfg: CodeConfig, n_info: int) -> DecodedBlock:
    """Invert encode() from code-bit LLRs; crc_pass is the block-error verdict."""
    llrs = np.asarray(llrs, dtype=np.float64)
    n_payload = n_info + cfg.crc_bits
    acc = _derate(llrs, cfg, n_payload)
    return _check(_payload_from_mother(acc, cfg, n_payload), cfg)


def decode_many(llr_blocks, cfg: CodeConfig, n_info: int) -> list[DecodedBlock]:
    """Decode equal-geometry codewords in one pass (one trellis sweep)."""
    n_payload = n_info + cfg.crc_bits
    acc = np.stack([_derate(np.asarray(l, dtype=np.float64), cfg, n_payload)
                    for l in llr_blocks])
    payloads = _payload_from_mother(acc, cfg, n_payload)
    return [_check(payloads[i], cfg) for i in range(len(llr_blocks))]
