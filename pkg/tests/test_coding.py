import numpy as np
import pytest

from wsmalink import coding
from wsmalink.coding import CodeConfig, CodingError


def bits_of_ascii(s):
    return np.unpackbits(np.frombuffer(s.encode(), dtype=np.uint8))


class TestCrc16:
    def test_known_check_value(self):
        # CRC-16/CCITT-FALSE of "123456789" is 0x29B1
        crc = coding.crc16(bits_of_ascii("123456789"))
        value = int("".join(map(str, crc)), 2)
        assert value == 0x29B1

    @pytest.mark.parametrize("seed", range(4))
    def test_detects_single_bit_flip(self, seed):
        rng = np.random.default_rng(seed)
        msg = rng.integers(0, 2, 64).astype(np.uint8)
        framed = coding.crc_append(msg)
        assert coding.crc_ok(framed)
        pos = int(rng.integers(0, len(framed)))
        framed[pos] ^= 1
        assert not coding.crc_ok(framed)

    def test_non_byte_aligned_length(self):
        msg = np.array([1, 0, 1, 1, 0], dtype=np.uint8)
        assert coding.crc_ok(coding.crc_append(msg))


class TestConvEncode:
    def test_matches_shift_register_reference(self):
        # independent bit-serial shift register, newest bit first in the taps
        def reference(bits):
            reg = [0] * 7
            out = []
            for b in list(bits) + [0] * 6:
                reg = [b] + reg[:6]
                out.append(sum(r * t for r, t in zip(reg, [1, 1, 1, 1, 0, 0, 1])) % 2)
                out.append(sum(r * t for r, t in zip(reg, [1, 0, 1, 1, 0, 1, 1])) % 2)
            return np.array(out, dtype=np.uint8)

        rng = np.random.default_rng(0)
        for n in (1, 7, 40):
            bits = rng.integers(0, 2, n).astype(np.uint8)
            assert np.array_equal(coding.conv_encode(bits), reference(bits))

    def test_output_length(self):
        assert len(coding.conv_encode(np.zeros(10, dtype=np.uint8))) == 32


class TestViterbi:
    def test_matches_brute_force_ml(self):
        # exhaustive maximum-likelihood search over all 4-bit messages
        rng = np.random.default_rng(1)
        msgs = [np.array([(m >> i) & 1 for i in range(4)], dtype=np.uint8) for m in range(16)]
        books = {m: coding.conv_encode(msgs[m]) for m in range(16)}
        for trial in range(20):
            true = int(rng.integers(0, 16))
            clean = 1.0 - 2.0 * books[true].astype(float)
            llr = 2.0 * (clean + rng.standard_normal(clean.size) * 0.8)
            scores = {m: np.sum(llr * (1.0 - 2.0 * books[m])) for m in range(16)}
            ml = max(scores, key=scores.get)
            got = coding.viterbi_decode(llr, 4)
            assert np.array_equal(got, msgs[ml])

    def test_batched_equals_sequential(self):
        rng = np.random.default_rng(2)
        llrs = rng.standard_normal((5, 2 * (12 + 6)))
        batch = coding.viterbi_decode(llrs, 12)
        for i in range(5):
            assert np.array_equal(batch[i], coding.viterbi_decode(llrs[i], 12))

    def test_rejects_wrong_length(self):
        with pytest.raises(CodingError):
            coding.viterbi_decode(np.zeros(10), 12)


class TestEncode:
    def test_uncoded_with_crc_layout(self):
        # 8 info bits + CRC16 fills target 24 exactly, info bits first
        info = np.array([1, 0, 1, 1, 0, 0, 1, 0], dtype=np.uint8)
        out = coding.encode(info, CodeConfig(kind="uncoded"), 24)
        assert len(out) == 24
        assert np.array_equal(out[:8], info)

    def test_repetition_duplicates_each_bit(self):
        info = np.array([1, 0, 0, 1], dtype=np.uint8)
        cfg = CodeConfig(kind="repetition", rep_factor=2, crc_bits=0)
        out = coding.encode(info, cfg, 8)
        assert np.array_equal(out, np.array([1, 1, 0, 0, 0, 0, 1, 1], dtype=np.uint8))

    def test_target_too_small_raises(self):
        with pytest.raises(CodingError, match="target_bits"):
            coding.encode(np.zeros(8, dtype=np.uint8), CodeConfig(kind="uncoded"), 20)

    def test_cyclic_extension_wraps(self):
        info = np.array([1, 0], dtype=np.uint8)
        cfg = CodeConfig(kind="uncoded", crc_bits=0)
        out = coding.encode(info, cfg, 5)
        assert np.array_equal(out, np.array([1, 0, 1, 0, 1], dtype=np.uint8))


def noise_free_llrs(code_bits):
    return 8.0 * (1.0 - 2.0 * code_bits.astype(float))


class TestRoundTrip:
    @pytest.mark.parametrize(
        "cfg",
        [
            CodeConfig(kind="uncoded"),
            CodeConfig(kind="repetition", rep_factor=2),
            CodeConfig(kind="repetition", rep_factor=3, crc_bits=0),
            CodeConfig(kind="convolutional"),
        ],
    )
    @pytest.mark.parametrize("n_info,target", [(8, 64), (160, 432), (40, 120)])
    def test_noise_free_loopback(self, cfg, n_info, target):
        rng = np.random.default_rng(n_info + target)
        info = rng.integers(0, 2, n_info).astype(np.uint8)
        payload = n_info + cfg.crc_bits
        if target < coding.mother_length(cfg, payload) and cfg.kind != "convolutional":
            target = coding.mother_length(cfg, payload)
        coded = coding.encode(info, cfg, target)
        got = coding.decode(noise_free_llrs(coded), cfg, n_info)
        assert got.crc_pass
        assert np.array_equal(got.bits, info)

    def test_convolutional_punctured_loopback(self):
        # 496 payload bits punctured from 1004 mother bits into 864 slots,
        # the 16-QAM / 60-byte frame geometry
        cfg = CodeConfig(kind="convolutional")
        rng = np.random.default_rng(9)
        info = rng.integers(0, 2, 480).astype(np.uint8)
        coded = coding.encode(info, cfg, 864)
        got = coding.decode(noise_free_llrs(coded), cfg, 480)
        assert got.crc_pass and np.array_equal(got.bits, info)

    def test_convolutional_160_bit_noise_free(self):
        cfg = CodeConfig(kind="convolutional", crc_bits=0)
        rng = np.random.default_rng(4)
        info = rng.integers(0, 2, 160).astype(np.uint8)
        coded = coding.encode(info, cfg, 2 * (160 + 6))
        got = coding.decode(noise_free_llrs(coded), cfg, 160)
        assert np.array_equal(got.bits, info)

    def test_repetition_survives_single_flipped_llr(self):
        # exhaustive over all 4-bit blocks and all flip positions
        cfg = CodeConfig(kind="repetition", rep_factor=2, crc_bits=0)
        for m in range(16):
            info = np.array([(m >> i) & 1 for i in range(4)], dtype=np.uint8)
            coded = coding.encode(info, cfg, 8)
            for pos in range(8):
                llr = noise_free_llrs(coded)
                llr[pos] = -0.5 * llr[pos]
                got = coding.decode(llr, cfg, 4)
                assert np.array_equal(got.bits, info)

    def test_crc_catches_decoding_error(self):
        cfg = CodeConfig(kind="uncoded")
        info = np.ones(16, dtype=np.uint8)
        coded = coding.encode(info, cfg, 32)
        llr = noise_free_llrs(coded)
        llr[:3] *= -1  # three hard bit errors
        got = coding.decode(llr, cfg, 16)
        assert not got.crc_pass
