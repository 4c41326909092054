"""Statistical and structural checks of the fault injector.

Interval bounds and critical values come from scipy at test time rather
than being hand-entered.
"""

import numpy as np
import pytest
from scipy import stats as sps

from approxdet import softfloat as sf
from approxdet.errors import ConfigError
from approxdet.faults import (
    FaultInjector,
    FaultModel,
    FaultStats,
    flip_mantissa_bit,
    wrap_arithmetic,
)

RNG = np.random.default_rng(0xFA171)


class TestModel:
    def test_rejects_bad_probability(self):
        with pytest.raises(ConfigError):
            FaultModel(p_faulty=1.5)
        with pytest.raises(ConfigError):
            FaultModel(p_faulty=-0.1)

    def test_stats_merge(self):
        a = FaultStats(5, 2, [1, 0, 0, 0, 0, 0, 0, 1, 0, 0])
        b = FaultStats(3, 1, [0, 0, 0, 0, 0, 0, 0, 0, 0, 1])
        a.merge(b)
        assert a.results_produced == 8
        assert a.faults_injected == 3
        assert sum(a.bit_flip_counts) == 3


class TestMaybeCorrupt:
    def test_p_zero_is_identity(self):
        inj = FaultInjector(FaultModel(0.0, seed=7))
        for bits in RNG.integers(0, 1 << 16, 10_000).tolist():
            out, faulted = inj.maybe_corrupt(bits)
            assert out == bits and not faulted
        assert inj.stats.faults_injected == 0
        assert inj.stats.results_produced == 10_000

    def test_forced_flip_of_top_mantissa_bit(self):
        assert flip_mantissa_bit(0x3C00, 9) == 0x3E00
        assert sf.decode_half(0x3E00) == 1.5

    def test_p_one_always_flips_exactly_one_mantissa_bit(self):
        inj = FaultInjector(FaultModel(1.0, seed=3))
        for bits in RNG.integers(0, 1 << 16, 20_000).tolist():
            out, faulted = inj.maybe_corrupt(bits)
            assert faulted
            diff = out ^ bits
            assert bin(diff).count("1") == 1
            assert diff & ~0x03FF == 0  # mantissa field only

    def test_fault_rate_binomial_interval(self):
        n, p = 1_000_000, 1e-3
        inj = FaultInjector(FaultModel(p, seed=11))
        count = sum(inj.maybe_corrupt(0x3C00)[1] for _ in range(n))
        lo, hi = sps.binom.interval(0.999, n, p)
        assert lo <= count <= hi
        assert inj.stats.faults_injected == count
        assert sum(inj.stats.bit_flip_counts) == count

    @pytest.mark.parametrize("p", [1e-6, 1e-5, 1e-4])
    def test_fault_rate_binomial_interval_sweep(self, p):
        n = 1_000_000
        inj = FaultInjector(FaultModel(p, seed=23))
        count = sum(inj.maybe_corrupt(0x0000)[1] for _ in range(n))
        lo, hi = sps.binom.interval(0.999, n, p)
        assert lo <= count <= hi

    def test_bit_index_uniformity_chi_square(self):
        n = 100_000
        inj = FaultInjector(FaultModel(1.0, seed=5))
        for _ in range(n):
            inj.maybe_corrupt(0x0000)
        observed = np.array(inj.stats.bit_flip_counts, dtype=float)
        assert observed.sum() == n
        expected = n / 10.0
        chi2 = float(((observed - expected) ** 2 / expected).sum())
        assert chi2 < sps.chi2.ppf(0.999, df=9)

    def test_determinism_same_seed_same_stream(self):
        runs = []
        for _ in range(2):
            inj = FaultInjector(FaultModel(0.01, seed=42), stream=(3, 9))
            runs.append(
                [inj.maybe_corrupt(b)[0] for b in range(0, 1 << 16, 7)]
            )
        assert runs[0] == runs[1]

    def test_distinct_streams_differ(self):
        outs = []
        for stream in [(0,), (1,)]:
            inj = FaultInjector(FaultModel(0.5, seed=42), stream=stream)
            outs.append([inj.maybe_corrupt(0x1234)[0] for _ in range(64)])
        assert outs[0] != outs[1]


class TestWrapArithmetic:
    def test_degenerate_model_matches_exact_add(self):
        inj = FaultInjector(FaultModel(0.0, seed=0))
        fadd, fmul = wrap_arithmetic(sf.add_half, sf.mul_half, inj)
        a = RNG.integers(0, 1 << 16, 100_000, dtype=np.uint16)
        b = RNG.integers(0, 1 << 16, 100_000, dtype=np.uint16)
        for x, y in zip(a.tolist(), b.tolist()):
            assert fadd(x, y) == sf.add_half(x, y)
            assert fmul(x, y) == sf.mul_half(x, y)

    def test_p_one_wrapped_mul_differs_in_one_mantissa_bit(self):
        from approxdet.approx_units import mul_approx

        inj = FaultInjector(FaultModel(1.0, seed=1))
        _, fmul = wrap_arithmetic(sf.add_half, mul_approx, inj)
        a = RNG.integers(0, 1 << 16, 5_000, dtype=np.uint16)
        b = RNG.integers(0, 1 << 16, 5_000, dtype=np.uint16)
        for x, y in zip(a.tolist(), b.tolist()):
            base = mul_approx(x, y)
            out = fmul(x, y)
            diff = out ^ base
            assert bin(diff).count("1") == 1 and diff & ~0x03FF == 0

    def test_sign_exponent_fields_never_touched(self):
        inj = FaultInjector(FaultModel(1.0, seed=9))
        fadd, _ = wrap_arithmetic(sf.add_half, sf.mul_half, inj)
        a = RNG.integers(0, 1 << 16, 5_000, dtype=np.uint16)
        b = RNG.integers(0, 1 << 16, 5_000, dtype=np.uint16)
        for x, y in zip(a.tolist(), b.tolist()):
            base = sf.add_half(x, y)
            out = fadd(x, y)
            assert (out ^ base) & 0xFC00 == 0
