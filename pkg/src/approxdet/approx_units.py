"""Approximate significand units and the binary16 operations built on them.

Two hardware-inspired units operate on the 11-bit significand (10
fraction bits plus the hidden bit):

  * an adder that never forwards the carry from the low half of the
    operands into the high half;
  * a multiplier composed of four half-width blocks, where the three
    blocks touching a low half are built recursively from 2x2
    underdesigned cells and only the high-high block is exact.

``add_approx``/``mul_approx`` run the regular binary16 datapath from
``softfloat`` with these units spliced in; sign, exponent, alignment,
normalization and rounding are untouched.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from . import softfloat as sf

SIGNIFICAND_WIDTH = 11  # 10 fraction bits + hidden bit


def _load_udm_table() -> tuple[tuple[int, ...], ...]:
    raw = resources.files("approxdet").joinpath("data/udm2x2_table.json")
    data = json.loads(raw.read_text())
    return tuple(tuple(row) for row in data["table"])


UDM2X2_TABLE = _load_udm_table()


@dataclass(frozen=True)
class ApproxAdderSpec:
    """Carry-truncated adder: low half is the floor(width/2) low bits."""

    width: int = SIGNIFICAND_WIDTH

    def __post_init__(self):
        if self.width < 2:
            raise ValueError("adder width must be at least 2")

    @property
    def low_width(self) -> int:
        return self.width // 2


@dataclass(frozen=True)
class ApproxMultiplierSpec:
    """Block-composed multiplier; only the high-high block is exact.

    Odd widths are zero-extended to the next even width before halving.
    """

    width: int = SIGNIFICAND_WIDTH

    def __post_init__(self):
        if self.width < 2:
            raise ValueError("multiplier width must be at least 2")

    @property
    def padded_width(self) -> int:
        return self.width + (self.width & 1)

    @property
    def half_width(self) -> int:
        return self.padded_width // 2


def approx_add_significand(a: int, b: int, width: int = SIGNIFICAND_WIDTH):
    """Add two ``width``-bit values without the low-to-high carry.

    Returns ``(result, carry_out)``. The result equals the exact sum
    minus ``c_low * 2**(width//2)`` whenever the low halves generate a
    carry ``c_low``; the high half is the exact sum of the high halves.
    """
    low = width // 2
    low_mask = (1 << low) - 1
    low_sum = (a & low_mask) + (b & low_mask)
    high_sum = (a >> low) + (b >> low)
    full = (high_sum << low) | (low_sum & low_mask)
    return full & ((1 << width) - 1), full >> width


def udm2x2(a: int, b: int) -> int:
    """2x2 underdesigned multiplier cell (3-bit output)."""
    if not (0 <= a <= 3 and 0 <= b <= 3):
        raise ValueError("udm2x2 operands must be 2-bit values")
    return UDM2X2_TABLE[a][b]


@lru_cache(maxsize=None)
def _udm_mul(a: int, b: int, width: int) -> int:
    """Multiplier block built entirely from udm2x2 cells.

    Memoized: widths only shrink during recursion and block operands are
    bounded by the half width, so the cache stays small.
    """
    if width <= 2:
        return udm2x2(a, b)
    half = (width + (width & 1)) // 2
    mask = (1 << half) - 1
    al, ah = a & mask, a >> half
    bl, bh = b & mask, b >> half
    ll = _udm_mul(al, bl, half)
    hl = _udm_mul(ah, bl, half)
    lh = _udm_mul(al, bh, half)
    hh = _udm_mul(ah, bh, half)
    return ll + ((hl + lh) << half) + (hh << (2 * half))


def approx_mul_significand(a: int, b: int, width: int = SIGNIFICAND_WIDTH) -> int:
    """Block-composed product of two ``width``-bit values.

    The operands are split at half the (even-padded) width; the low-low
    and the two cross blocks are udm2x2 compositions, the high-high
    block is exact, and the four partial products are summed exactly.
    """
    half = (width + (width & 1)) // 2
    mask = (1 << half) - 1
    al, ah = a & mask, a >> half
    bl, bh = b & mask, b >> half
    ll = _udm_mul(al, bl, half)
    hl = _udm_mul(ah, bl, half)
    lh = _udm_mul(al, bh, half)
    hh = ah * bh
    return ll + ((hl + lh) << half) + (hh << (2 * half))


def _sig_add_full(a: int, b: int) -> int:
    result, carry = approx_add_significand(a, b, SIGNIFICAND_WIDTH)
    return (carry << SIGNIFICAND_WIDTH) | result


def add_approx(bits_a: int, bits_b: int) -> int:
    """binary16 addition with the carry-truncated significand adder."""
    return sf._add_core(bits_a, bits_b, sf.BINARY16, sig_add=_sig_add_full)


def mul_approx(bits_a: int, bits_b: int) -> int:
    """binary16 multiplication with the block-composed significand unit."""
    return sf._mul_core(bits_a, bits_b, sf.BINARY16, sig_mul=approx_mul_significand)
