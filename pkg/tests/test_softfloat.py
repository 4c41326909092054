"""Bit-exact checks of the binary16/binary32 software emulation.

The trusted references are numpy's half/single arithmetic (IEEE 754,
round-to-nearest-even) and, for quantization, a brute-force nearest
search over all 2**16 binary16 patterns.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from approxdet import softfloat as sf

RNG = np.random.default_rng(0xA1CE)


def np_half_bits(pattern_a, pattern_b, op):
    a = np.uint16(pattern_a).view(np.float16)
    b = np.uint16(pattern_b).view(np.float16)
    with np.errstate(all="ignore"):
        r = op(a, b)
    return int(np.float16(r).view(np.uint16))


def brute_force_nearest_half(value: float) -> int:
    """Independent oracle: scan every finite binary16 for the nearest.

    Ties break toward the pattern with even mantissa, matching
    round-to-nearest-even.
    """
    best = None
    best_err = None
    for bits in range(1 << 16):
        if not sf.is_finite(bits, sf.BINARY16):
            continue
        decoded = sf.decode_half(bits)
        err = abs(decoded - value)
        if best is None or err < best_err:
            best, best_err = bits, err
        elif err == best_err:
            if (bits & 1) == 0 and (best & 1) == 1:
                best = bits
    # Values at or beyond the overflow threshold (max + half ulp, tie
    # rounding to the even pattern = infinity) round to infinity.
    if abs(value) >= 65504.0 + 16.0:
        return sf.pack(1 if value < 0 else 0, 0x1F, 0, sf.BINARY16)
    if sf.decode_half(best) == 0.0:
        # The search cannot see the sign of zero; IEEE keeps it.
        return 0x8000 if math.copysign(1.0, value) < 0 else 0x0000
    return best


class TestDecode:
    def test_worked_decode_example(self):
        # 0 01101 0101010100
        bits = 0b0011010101010100
        assert sf.decode_half(bits) == 0.3330078125
        assert abs(sf.decode_half(bits) - 0.333007813) <= 1e-9

    def test_zero_pattern(self):
        assert sf.decode_half(0x0000) == 0.0
        assert math.copysign(1.0, sf.decode_half(0x0000)) == 1.0
        assert math.copysign(1.0, sf.decode_half(0x8000)) == -1.0

    def test_minus_one(self):
        assert sf.decode_half(0b1011110000000000) == -1.0

    def test_specials(self):
        assert sf.decode_half(0x7C00) == math.inf
        assert sf.decode_half(0xFC00) == -math.inf
        assert math.isnan(sf.decode_half(0x7C01))
        assert math.isnan(sf.decode_half(0x7E00))

    def test_exhaustive_against_numpy(self):
        patterns = np.arange(1 << 16, dtype=np.uint16)
        expected = patterns.view(np.float16).astype(np.float64)
        for bits in range(1 << 16):
            got = sf.decode_half(bits)
            want = expected[bits]
            assert (math.isnan(got) and math.isnan(want)) or got == want


class TestEncodeRoundTrip:
    def test_round_trip_all_finite_halves(self):
        for bits in range(1 << 16):
            if not sf.is_finite(bits, sf.BINARY16):
                continue
            assert sf.float_to_bits16(sf.decode_half(bits)) == bits

    def test_nan_encodes_canonical(self):
        assert sf.float_to_bits16(math.nan) == sf.BINARY16.quiet_nan

    def test_float32_encode_matches_struct(self):
        values = RNG.standard_normal(20000) * np.float64(
            10.0 ** RNG.uniform(-30, 30, 20000)
        )
        for v in values.tolist() + [0.0, -0.0, 1e39, -1e39, 1e-46, math.inf]:
            assert sf.float_to_bits32(v) == sf.native_float32_bits(v)


class TestQuantize:
    def test_exact_value_passes_through(self):
        one32 = sf.float_to_bits32(1.0)
        assert sf.quantize_32_to_16(one32) == 0x3C00

    def test_tenth_matches_brute_force(self):
        bits32 = sf.native_float32_bits(0.1)
        got = sf.quantize_32_to_16(bits32)
        assert got == brute_force_nearest_half(sf.decode_single(bits32))
        assert got == 0b0010111001100110

    def test_overflow_to_infinity(self):
        bits32 = sf.float_to_bits32(131072.0)  # 2**17
        assert sf.quantize_32_to_16(bits32) == 0x7C00
        # Exhaustive max search: no finite half exceeds 65504.
        max_finite = max(
            sf.decode_half(b) for b in range(1 << 16) if sf.is_finite(b, sf.BINARY16)
        )
        assert max_finite == 65504.0

    def test_brute_force_agreement_on_sample(self):
        values = [
            0.1,
            -0.1,
            1.0 / 3.0,
            65519.0,
            65520.0,
            65504.0,
            2.0**-24,
            2.0**-25,
            2.0**-25 * 1.5,
            -(2.0**-26),
            6.1e-5,
            0.499999,
        ]
        for v in values:
            bits32 = sf.native_float32_bits(v)
            assert sf.quantize_32_to_16(bits32) == brute_force_nearest_half(
                sf.decode_single(bits32)
            ), v

    def test_quantize_widen_identity_exhaustive(self):
        for bits in range(1 << 16):
            if not sf.is_finite(bits, sf.BINARY16):
                continue
            assert sf.quantize_32_to_16(sf.widen_16_to_32(bits)) == bits

    def test_nan_preserved_quiet(self):
        assert sf.quantize_32_to_16(sf.float_to_bits32(math.nan)) == 0x7E00

    def test_relative_error_bound_normal_range(self):
        n = 100_000
        exps = RNG.uniform(-14, 16, n)
        mants = RNG.uniform(1.0, 2.0, n)
        for e, m in zip(exps, mants):
            x = float(np.float32(m * 2.0**e))
            if not (2.0**-14 <= abs(x) < 65504.0):
                continue
            q = sf.decode_half(sf.quantize_32_to_16(sf.float_to_bits32(x)))
            assert abs(q - x) / abs(x) <= 2.0**-11

    @given(st.floats(min_value=2.0**-14, max_value=65503.0))
    def test_relative_error_bound_property(self, x):
        q = sf.decode_half(sf.quantize_32_to_16(sf.float_to_bits32(x)))
        assert abs(q - x) / abs(x) <= 2.0**-11


def _interesting_half_patterns():
    fixed = [
        0x0000,
        0x8000,  # zeros
        0x0001,
        0x8001,  # smallest subnormals
        0x03FF,
        0x83FF,  # largest subnormals
        0x0400,
        0x8400,  # smallest normals
        0x3C00,
        0xBC00,  # ones
        0x7BFF,
        0xFBFF,  # max finite
        0x7C00,
        0xFC00,  # infinities
        0x7E00,
        0x7C01,
        0xFE00,  # NaNs
        0x3555,
        0x3554,
    ]
    random_patterns = RNG.integers(0, 1 << 16, 300, dtype=np.uint16).tolist()
    return sorted(set(fixed + random_patterns))


class TestHalfArithmetic:
    def test_one_plus_one(self):
        assert sf.add_half(0x3C00, 0x3C00) == 0x4000  # 2.0

    def test_overflow_add(self):
        top = sf.float_to_bits16(65504.0)
        assert sf.add_half(top, top) == 0x7C00
        # widening oracle: 65504 + 65504 in binary32, then quantized
        wide = sf.add_single(sf.widen_16_to_32(top), sf.widen_16_to_32(top))
        assert sf.quantize_32_to_16(wide) == 0x7C00

    def test_invalid_combinations_yield_nan(self):
        inf, ninf = 0x7C00, 0xFC00
        assert sf.add_half(inf, ninf) == sf.BINARY16.quiet_nan
        assert sf.mul_half(inf, 0x0000) == sf.BINARY16.quiet_nan
        assert sf.mul_half(0x8000, inf) == sf.BINARY16.quiet_nan

    def test_signed_zero_sums(self):
        assert sf.add_half(0x0000, 0x8000) == 0x0000
        assert sf.add_half(0x8000, 0x8000) == 0x8000
        assert sf.add_half(0x3C00, 0xBC00) == 0x0000

    def test_paper_decode_times_three(self):
        third = 0x3554  # 0.3330078125
        three = sf.float_to_bits16(3.0)
        assert sf.mul_half(third, three) == np_half_bits(third, three, np.multiply)

    def test_exhaustive_pattern_battery_add_mul(self):
        pats = _interesting_half_patterns()
        for a in pats:
            for b in pats:
                got = sf.add_half(a, b)
                want = np_half_bits(a, b, np.add)
                if sf.is_nan(want, sf.BINARY16):
                    assert sf.is_nan(got, sf.BINARY16), (hex(a), hex(b))
                else:
                    assert got == want, ("add", hex(a), hex(b))
                got = sf.mul_half(a, b)
                want = np_half_bits(a, b, np.multiply)
                if sf.is_nan(want, sf.BINARY16):
                    assert sf.is_nan(got, sf.BINARY16), (hex(a), hex(b))
                else:
                    assert got == want, ("mul", hex(a), hex(b))

    @pytest.mark.parametrize("op,npop", [("add", np.add), ("mul", np.multiply)])
    def test_random_pairs_match_numpy(self, op, npop):
        n = 500_000 if op == "mul" else 250_000
        a = RNG.integers(0, 1 << 16, n, dtype=np.uint16)
        b = RNG.integers(0, 1 << 16, n, dtype=np.uint16)
        with np.errstate(all="ignore"):
            want = npop(a.view(np.float16), b.view(np.float16)).view(np.uint16)
        mine = sf.add_half if op == "add" else sf.mul_half
        nan16 = sf.BINARY16.quiet_nan
        for i in range(n):
            got = mine(int(a[i]), int(b[i]))
            w = int(want[i])
            if sf.is_nan(w, sf.BINARY16):
                assert got == nan16
            else:
                assert got == w, (op, hex(int(a[i])), hex(int(b[i])))

    @given(
        st.integers(min_value=0, max_value=(1 << 16) - 1),
        st.integers(min_value=0, max_value=(1 << 16) - 1),
    )
    @settings(max_examples=300)
    def test_commutativity(self, a, b):
        assert sf.add_half(a, b) == sf.add_half(b, a)
        assert sf.mul_half(a, b) == sf.mul_half(b, a)


class TestSingleArithmetic:
    @pytest.mark.parametrize("op,npop", [("add", np.add), ("mul", np.multiply)])
    def test_random_pairs_match_native(self, op, npop):
        n = 500_000
        a = RNG.integers(0, 1 << 32, n, dtype=np.uint32)
        b = RNG.integers(0, 1 << 32, n, dtype=np.uint32)
        with np.errstate(all="ignore"):
            want = npop(a.view(np.float32), b.view(np.float32)).view(np.uint32)
        mine = sf.add_single if op == "add" else sf.mul_single
        for i in range(n):
            got = mine(int(a[i]), int(b[i]))
            w = int(want[i])
            if sf.is_nan(w, sf.BINARY32):
                assert sf.is_nan(got, sf.BINARY32)
            else:
                assert got == w, (op, hex(int(a[i])), hex(int(b[i])))

    def test_mirrored_16bit_cases(self):
        one = sf.float_to_bits32(1.0)
        assert sf.add_single(one, one) == sf.float_to_bits32(2.0)
        inf = sf.pack(0, 0xFF, 0, sf.BINARY32)
        assert sf.mul_single(inf, sf.float_to_bits32(0.0)) == sf.BINARY32.quiet_nan
