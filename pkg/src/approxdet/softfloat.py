"""Software emulation of IEEE 754 binary16 and binary32 arithmetic.

Everything here works on unsigned integer bit patterns, never on native
float arithmetic, so that alternative significand units (see
``approx_units``) can be spliced into the add/multiply datapath while
sign and exponent handling stay exact.

Conventions:
  * a "bit pattern" is a non-negative int of the format's width,
    e.g. ``0x3C00`` is binary16 one;
  * rounding is always round-to-nearest, ties-to-even;
  * any NaN result is the format's canonical quiet NaN.
"""

from __future__ import annotations

import enum
import math
import struct


class FloatFormat:
    """Field layout of a binary interchange format."""

    __slots__ = (
        "name",
        "exponent_bits",
        "mantissa_bits",
        "width",
        "bias",
        "exponent_mask",
        "mantissa_mask",
        "sign_mask",
        "hidden_bit",
        "min_exponent",
        "quiet_nan",
    )

    def __init__(self, name: str, exponent_bits: int, mantissa_bits: int):
        self.name = name
        self.exponent_bits = exponent_bits
        self.mantissa_bits = mantissa_bits
        self.width = 1 + exponent_bits + mantissa_bits
        self.bias = (1 << (exponent_bits - 1)) - 1
        self.exponent_mask = (1 << exponent_bits) - 1
        self.mantissa_mask = (1 << mantissa_bits) - 1
        self.sign_mask = 1 << (self.width - 1)
        self.hidden_bit = 1 << mantissa_bits
        # Exponent shared by all subnormals (and the smallest normals).
        self.min_exponent = 1 - self.bias
        # Quiet NaN: exponent all ones, mantissa MSB set.
        self.quiet_nan = (self.exponent_mask << mantissa_bits) | (
            1 << (mantissa_bits - 1)
        )

    def __repr__(self) -> str:
        return f"FloatFormat({self.name})"


BINARY16 = FloatFormat("binary16", 5, 10)
BINARY32 = FloatFormat("binary32", 8, 23)


class RoundingMode(enum.Enum):
    """Rounding rule used when a value is not representable.

    Only the IEEE 754 default is implemented; the enum exists so new
    modes slot in without changing operation signatures.
    """

    NEAREST_EVEN = "nearest-even"


def unpack(bits: int, fmt: FloatFormat) -> tuple[int, int, int]:
    """Split a bit pattern into (sign, biased exponent, mantissa field)."""
    return (
        (bits >> (fmt.width - 1)) & 1,
        (bits >> fmt.mantissa_bits) & fmt.exponent_mask,
        bits & fmt.mantissa_mask,
    )


def pack(sign: int, biased_exponent: int, mantissa: int, fmt: FloatFormat) -> int:
    """Assemble a bit pattern from its three fields."""
    return (sign << (fmt.width - 1)) | (biased_exponent << fmt.mantissa_bits) | mantissa


def is_nan(bits: int, fmt: FloatFormat) -> bool:
    _, e, m = unpack(bits, fmt)
    return e == fmt.exponent_mask and m != 0


def is_inf(bits: int, fmt: FloatFormat) -> bool:
    _, e, m = unpack(bits, fmt)
    return e == fmt.exponent_mask and m == 0


def is_zero(bits: int, fmt: FloatFormat) -> bool:
    return bits & ~fmt.sign_mask == 0


def is_finite(bits: int, fmt: FloatFormat) -> bool:
    _, e, _ = unpack(bits, fmt)
    return e != fmt.exponent_mask


def decode_bits(bits: int, fmt: FloatFormat) -> float:
    """Value represented by a bit pattern, as a Python float.

    Total over all patterns: subnormals, signed zero, infinities and NaN
    all decode. Exact for binary16/binary32 because binary64 is a
    superset of both.
    """
    sign, e, m = unpack(bits, fmt)
    if e == fmt.exponent_mask:
        if m != 0:
            return math.nan
        return -math.inf if sign else math.inf
    if e == 0:
        value = math.ldexp(m, fmt.min_exponent - fmt.mantissa_bits)
    else:
        value = math.ldexp(m | fmt.hidden_bit, e - fmt.bias - fmt.mantissa_bits)
    return -value if sign else value


def decode_half(bits: int) -> float:
    """Decode a 16-bit pattern, e.g. 0x3554 -> 0.3330078125."""
    return decode_bits(bits, BINARY16)


def decode_single(bits: int) -> float:
    return decode_bits(bits, BINARY32)


def split_finite(bits: int, fmt: FloatFormat) -> tuple[int, int, int]:
    """Express a finite pattern as (sign, significand, exponent-of-lsb).

    The represented value is ``(-1)**sign * significand * 2**exp2`` with
    the significand an integer below ``2**(mantissa_bits + 1)`` (hidden
    bit included for normals). Zero yields significand 0.
    """
    sign, e, m = unpack(bits, fmt)
    if e == fmt.exponent_mask:
        raise ValueError("split_finite: pattern is not finite")
    if e == 0:
        return sign, m, fmt.min_exponent - fmt.mantissa_bits
    return sign, m | fmt.hidden_bit, e - fmt.bias - fmt.mantissa_bits


def round_to_format(sign: int, significand: int, exp2: int, fmt: FloatFormat) -> int:
    """Round the exact value ``(-1)**sign * significand * 2**exp2``.

    ``significand`` is an arbitrary-precision non-negative integer; this
    is the single rounding point shared by every operation (nearest,
    ties to even). Overflow returns the signed infinity, total underflow
    the signed zero.
    """
    if significand == 0:
        return sign << (fmt.width - 1)
    mbits = fmt.mantissa_bits
    value_exp = exp2 + significand.bit_length() - 1
    target_exp = value_exp if value_exp > fmt.min_exponent else fmt.min_exponent
    shift = target_exp - mbits - exp2
    if shift <= 0:
        q = significand << -shift
    else:
        q = significand >> shift
        rem = significand & ((1 << shift) - 1)
        half = 1 << (shift - 1)
        if rem > half or (rem == half and q & 1):
            q += 1
    if q >= (1 << (mbits + 1)):
        # Rounding carried out of the significand, e.g. 0x3FF -> 0x400.
        q >>= 1
        target_exp += 1
    if q == 0:
        return sign << (fmt.width - 1)
    if q < fmt.hidden_bit:
        return pack(sign, 0, q, fmt)
    biased = target_exp + fmt.bias
    if biased >= fmt.exponent_mask:
        return pack(sign, fmt.exponent_mask, 0, fmt)
    return pack(sign, biased, q & fmt.mantissa_mask, fmt)


def float_to_bits(value: float, fmt: FloatFormat) -> int:
    """Encode a Python float into the nearest pattern of ``fmt``."""
    if math.isnan(value):
        return fmt.quiet_nan
    sign = 1 if math.copysign(1.0, value) < 0 else 0
    if math.isinf(value):
        return pack(sign, fmt.exponent_mask, 0, fmt)
    if value == 0.0:
        return sign << (fmt.width - 1)
    frac, exp = math.frexp(abs(value))
    # frac * 2**53 is an integer for every binary64 value.
    return round_to_format(sign, int(frac * (1 << 53)), exp - 53, fmt)


def float_to_bits16(value: float) -> int:
    return float_to_bits(value, BINARY16)


def float_to_bits32(value: float) -> int:
    return float_to_bits(value, BINARY32)


# Values at or above max-float32 + half an ulp round to infinity under
# nearest-even; struct.pack refuses them instead of rounding.
_F32_OVERFLOW_THRESHOLD = 3.4028235677973366e38


def native_float32_bits(value: float) -> int:
    """Bit pattern of the platform float32, for cross-checks only."""
    try:
        return struct.unpack("<I", struct.pack("<f", value))[0]
    except OverflowError:
        sign = 0x80000000 if math.copysign(1.0, value) < 0 else 0
        if abs(value) >= _F32_OVERFLOW_THRESHOLD:
            return sign | 0x7F800000
        return sign | 0x7F7FFFFF


def quantize(
    bits: int,
    src: FloatFormat,
    dst: FloatFormat,
    mode: RoundingMode = RoundingMode.NEAREST_EVEN,
) -> int:
    """Re-round a pattern of ``src`` into ``dst``.

    NaN maps to the destination's canonical quiet NaN; infinities keep
    their sign; finite values round per ``mode``.
    """
    if mode is not RoundingMode.NEAREST_EVEN:
        raise ValueError(f"unsupported rounding mode: {mode}")
    if is_nan(bits, src):
        return dst.quiet_nan
    sign, e, m = unpack(bits, src)
    if e == src.exponent_mask:
        return pack(sign, dst.exponent_mask, 0, dst)
    sign, sig, exp2 = split_finite(bits, src)
    return round_to_format(sign, sig, exp2, dst)


def quantize_32_to_16(
    bits32: int, mode: RoundingMode = RoundingMode.NEAREST_EVEN
) -> int:
    """Nearest binary16 to a binary32 value (overflow to inf, RNE)."""
    return quantize(bits32, BINARY32, BINARY16, mode)


def widen_16_to_32(bits16: int) -> int:
    """Exact binary32 pattern of a binary16 value."""
    return quantize(bits16, BINARY16, BINARY32)


def _add_core(bits_a: int, bits_b: int, fmt: FloatFormat, sig_add=None) -> int:
    """Shared addition datapath.

    ``sig_add(x, y) -> int`` replaces the significand adder: it receives
    the two aligned significands (each below ``2**(mantissa_bits+1)``)
    and returns the full integer sum including any carry. ``None``
    selects the exact adder. Alignment, sign/exponent handling,
    normalization and rounding are identical for every unit.
    """
    a_nan = is_nan(bits_a, fmt)
    b_nan = is_nan(bits_b, fmt)
    if a_nan or b_nan:
        return fmt.quiet_nan
    a_inf = is_inf(bits_a, fmt)
    b_inf = is_inf(bits_b, fmt)
    if a_inf or b_inf:
        if a_inf and b_inf and (bits_a ^ bits_b) & fmt.sign_mask:
            return fmt.quiet_nan
        return bits_a if a_inf else bits_b
    sign_a, sig_a, exp_a = split_finite(bits_a, fmt)
    sign_b, sig_b, exp_b = split_finite(bits_b, fmt)
    if exp_b > exp_a:
        sign_a, sig_a, exp_a, sign_b, sig_b, exp_b = (
            sign_b,
            sig_b,
            exp_b,
            sign_a,
            sig_a,
            exp_a,
        )
    d = exp_a - exp_b
    if sign_a == sign_b:
        # Effective addition: the smaller operand is truncated onto the
        # W-bit lattice for the significand unit, the shifted-out
        # residue re-enters exactly before rounding.
        b_aligned = sig_b >> d
        residue = sig_b - (b_aligned << d)
        if sig_add is None:
            total = sig_a + b_aligned
        else:
            total = sig_add(sig_a, b_aligned)
        total = (total << d) + residue
        if total == 0:
            return sign_a << (fmt.width - 1)
        return round_to_format(sign_a, total, exp_b, fmt)
    # Effective subtraction: computed exactly (a borrow chain is a
    # different unit from a carry-truncated adder).
    diff = (sig_a << d) - sig_b
    if diff == 0:
        return 0  # IEEE: exact cancellation is +0 under nearest-even.
    if diff > 0:
        return round_to_format(sign_a, diff, exp_b, fmt)
    return round_to_format(sign_b, -diff, exp_b, fmt)


def _mul_core(bits_a: int, bits_b: int, fmt: FloatFormat, sig_mul=None) -> int:
    """Shared multiplication datapath.

    ``sig_mul(x, y) -> int`` replaces the raw significand multiplier
    (full double-width product, before normalization). ``None`` selects
    the exact multiplier.
    """
    if is_nan(bits_a, fmt) or is_nan(bits_b, fmt):
        return fmt.quiet_nan
    sign = ((bits_a ^ bits_b) >> (fmt.width - 1)) & 1
    a_inf = is_inf(bits_a, fmt)
    b_inf = is_inf(bits_b, fmt)
    a_zero = is_zero(bits_a, fmt)
    b_zero = is_zero(bits_b, fmt)
    if a_inf or b_inf:
        if a_zero or b_zero:
            return fmt.quiet_nan
        return pack(sign, fmt.exponent_mask, 0, fmt)
    if a_zero or b_zero:
        return sign << (fmt.width - 1)
    _, sig_a, exp_a = split_finite(bits_a, fmt)
    _, sig_b, exp_b = split_finite(bits_b, fmt)
    if sig_mul is None:
        product = sig_a * sig_b
    else:
        product = sig_mul(sig_a, sig_b)
    if product == 0:
        return sign << (fmt.width - 1)
    return round_to_format(sign, product, exp_a + exp_b, fmt)


def add_half(bits_a: int, bits_b: int) -> int:
    """Correctly rounded binary16 sum of two bit patterns."""
    return _add_core(bits_a, bits_b, BINARY16)


def mul_half(bits_a: int, bits_b: int) -> int:
    """Correctly rounded binary16 product of two bit patterns."""
    return _mul_core(bits_a, bits_b, BINARY16)


def add_single(bits_a: int, bits_b: int) -> int:
    """Correctly rounded binary32 sum of two bit patterns."""
    return _add_core(bits_a, bits_b, BINARY32)


def mul_single(bits_a: int, bits_b: int) -> int:
    """Correctly rounded binary32 product of two bit patterns."""
    return _mul_core(bits_a, bits_b, BINARY32)
