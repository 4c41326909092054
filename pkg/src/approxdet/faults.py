"""Stochastic single-bit corruption of arithmetic results.

Models aggressive low-voltage operation: with probability ``p_faulty``
per produced result, one uniformly chosen mantissa bit of the stored
result is inverted. Sign and exponent bits are never touched.

Randomness comes from a counter-based hash (splitmix64 finalizer) keyed
by ``(seed, *stream)``, so any worker can own an independent substream
and replay it exactly: the same seed and operation stream always yield
the same fault pattern, independent of scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError
from .softfloat import BINARY16, FloatFormat

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def _mix_key(parts) -> int:
    h = 0
    for p in parts:
        h = _splitmix64(h ^ (int(p) & _MASK64))
    return h


@dataclass(frozen=True)
class FaultModel:
    """Per-result fault probability and the seed of the fault stream."""

    p_faulty: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_faulty <= 1.0:
            raise ConfigError(f"p_faulty must be in [0, 1], got {self.p_faulty}")


@dataclass
class FaultStats:
    """Counters accumulated by injectors; merge is plain addition."""

    results_produced: int = 0
    faults_injected: int = 0
    bit_flip_counts: list = field(default_factory=lambda: [0] * 10)

    def merge(self, other: "FaultStats") -> None:
        self.results_produced += other.results_produced
        self.faults_injected += other.faults_injected
        for i, c in enumerate(other.bit_flip_counts):
            self.bit_flip_counts[i] += c

    def to_dict(self) -> dict:
        return {
            "results_produced": self.results_produced,
            "faults_injected": self.faults_injected,
            "bit_flip_counts": list(self.bit_flip_counts),
        }


def flip_mantissa_bit(bits: int, index: int, fmt: FloatFormat = BINARY16) -> int:
    """Invert one mantissa bit (index 0 = least significant)."""
    if not 0 <= index < fmt.mantissa_bits:
        raise ValueError(f"mantissa bit index out of range: {index}")
    return bits ^ (1 << index)


class FaultInjector:
    """Applies the fault model to a stream of results.

    ``stream`` identifies the substream (e.g. a kernel invocation and an
    output-cell index) so parallel tiles stay reproducible; ``stats`` may
    be shared between injectors to aggregate counts.
    """

    def __init__(
        self,
        model: FaultModel,
        stream: tuple = (),
        fmt: FloatFormat = BINARY16,
        stats: FaultStats | None = None,
    ):
        self.model = model
        self.fmt = fmt
        self.stats = stats if stats is not None else FaultStats()
        self._base = _mix_key((model.seed, *stream))
        self._counter = 0

    def maybe_corrupt(self, bits: int) -> tuple[int, bool]:
        """Return the (possibly corrupted) result and whether it faulted."""
        self.stats.results_produced += 1
        n = self._counter
        self._counter = n + 1
        p = self.model.p_faulty
        if p == 0.0:
            return bits, False
        draw = (_splitmix64(self._base ^ (2 * n)) >> 11) * 2.0**-53
        if draw >= p:
            return bits, False
        index = _splitmix64(self._base ^ (2 * n + 1)) % self.fmt.mantissa_bits
        self.stats.faults_injected += 1
        self.stats.bit_flip_counts[index] += 1
        return bits ^ (1 << index), True


def wrap_arithmetic(add, mul, injector: FaultInjector):
    """Wrap an add/mul operator pair so every result may be corrupted.

    Corruption happens after rounding, on the stored result.
    """

    def faulty_add(a: int, b: int) -> int:
        return injector.maybe_corrupt(add(a, b))[0]

    def faulty_mul(a: int, b: int) -> int:
        return injector.maybe_corrupt(mul(a, b))[0]

    return faulty_add, faulty_mul
