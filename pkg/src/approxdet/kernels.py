"""Matrix multiply and 2-D convolution over the emulated arithmetic.

Kernels run every addition and multiplication through one of four
arithmetic lanes, so approximation and fault effects propagate through
layered computation the way they would inside a convolutional network:

  * ``32full``    - binary32, exact software emulation
  * ``16full``    - binary16, exact (inputs quantized on entry)
  * ``16approx``  - binary16 with the approximate significand units
  * ``16appfault``- ``16approx`` plus stochastic mantissa bit flips

Dot products accumulate left to right and round after every operation.
Fault substreams are keyed by (kernel invocation, output cell), so a
serial run and any tiled parallel run would produce identical bits.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

from . import approx_units as au
from . import softfloat as sf
from .errors import ConfigError, DataError, ShapeError
from .faults import FaultInjector, FaultModel, FaultStats, wrap_arithmetic


class Setup(enum.Enum):
    EXACT32 = "32full"
    EXACT16 = "16full"
    APPROX16 = "16approx"
    APPROX16_FAULT = "16appfault"


SETUP_NAMES = {s.value: s for s in Setup}


@dataclass(frozen=True)
class ArithmeticConfig:
    """Which arithmetic lane kernels run on, plus fault parameters."""

    setup: Setup
    p_faulty: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_faulty <= 1.0:
            raise ConfigError(f"p_faulty must be in [0, 1], got {self.p_faulty}")
        if self.setup is not Setup.APPROX16_FAULT and self.p_faulty != 0.0:
            raise ConfigError(f"{self.setup.value} does not take p_faulty")

    @classmethod
    def from_name(
        cls, name: str, p_faulty: float = 0.0, seed: int = 0
    ) -> "ArithmeticConfig":
        if name not in SETUP_NAMES:
            raise ConfigError(
                f"unknown setup {name!r}; expected one of {sorted(SETUP_NAMES)}"
            )
        return cls(setup=SETUP_NAMES[name], p_faulty=p_faulty, seed=seed)


@dataclass
class Tensor:
    """Dense tensor of binary32 payloads with an explicit shape."""

    shape: tuple
    data: np.ndarray  # flat float32

    def __post_init__(self):
        self.shape = tuple(int(d) for d in self.shape)
        self.data = np.asarray(self.data, dtype=np.float32).reshape(-1)
        expected = int(np.prod(self.shape)) if self.shape else 1
        if self.data.size != expected:
            raise ShapeError(
                f"data length {self.data.size} does not match shape {self.shape}"
            )

    @classmethod
    def from_array(cls, array) -> "Tensor":
        arr = np.asarray(array, dtype=np.float32)
        return cls(shape=arr.shape, data=arr.reshape(-1))

    @classmethod
    def zeros(cls, shape) -> "Tensor":
        shape = tuple(int(d) for d in shape)
        return cls(shape=shape, data=np.zeros(int(np.prod(shape)), dtype=np.float32))

    def as_array(self) -> np.ndarray:
        return self.data.reshape(self.shape)


def save_tensor(tensor: Tensor, path) -> None:
    """One-line JSON shape header followed by raw little-endian float32."""
    header = json.dumps({"shape": list(tensor.shape), "dtype": "float32"})
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii") + b"\n")
        fh.write(tensor.data.astype("<f4").tobytes())


def load_tensor(path) -> Tensor:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line)
            shape = tuple(int(d) for d in header["shape"])
            if header.get("dtype", "float32") != "float32":
                raise DataError(f"unsupported tensor dtype {header['dtype']!r}")
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataError(f"bad tensor header in {path}: {exc}") from exc
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != int(np.prod(shape)):
        raise DataError(f"tensor payload size mismatch in {path}")
    return Tensor(shape=shape, data=data.copy())


class _Lane:
    """Bit-level encode/decode plus the per-cell operator pair."""

    def __init__(self, cfg: ArithmeticConfig, invocation: int, stats: FaultStats):
        self.cfg = cfg
        self.stats = stats
        self._invocation = invocation
        setup = cfg.setup
        if setup is Setup.EXACT32:
            self.fmt = sf.BINARY32
            self._base_ops = (sf.add_single, sf.mul_single)
        elif setup is Setup.EXACT16:
            self.fmt = sf.BINARY16
            self._base_ops = (sf.add_half, sf.mul_half)
        else:
            self.fmt = sf.BINARY16
            self._base_ops = (au.add_approx, au.mul_approx)
        self._model = (
            FaultModel(cfg.p_faulty, cfg.seed)
            if setup is Setup.APPROX16_FAULT
            else None
        )

    def encode(self, value: float) -> int:
        return sf.float_to_bits(value, self.fmt)

    def decode(self, bits: int) -> float:
        return sf.decode_bits(bits, self.fmt)

    def cell_ops(self, cell_index: int):
        if self._model is None:
            return self._base_ops
        injector = FaultInjector(
            self._model,
            stream=(self._invocation, cell_index),
            fmt=self.fmt,
            stats=self.stats,
        )
        return wrap_arithmetic(*self._base_ops, injector)


def arithmetic_lane(
    cfg: ArithmeticConfig, invocation: int = 0, stats: FaultStats | None = None
) -> _Lane:
    """Standalone lane for scalar arithmetic outside the kernels."""
    return _Lane(cfg, invocation, stats if stats is not None else FaultStats())


def _check_no_nan(tensor: Tensor, name: str) -> None:
    if np.isnan(tensor.data).any():
        raise DataError(f"{name} tensor contains NaN on kernel entry")


def gemm(
    a: Tensor,
    b: Tensor,
    cfg: ArithmeticConfig,
    *,
    invocation: int = 0,
    fault_stats: FaultStats | None = None,
) -> Tensor:
    """Matrix product with per-cell dot products on the configured lane.

    Each output cell accumulates ``sum_k a[i,k] * b[k,j]`` strictly left
    to right, rounding after every multiply and add.
    """
    if len(a.shape) != 2 or len(b.shape) != 2:
        raise ShapeError(f"gemm needs 2-D operands, got {a.shape} x {b.shape}")
    m, k = a.shape
    k2, n = b.shape
    if k != k2 or k == 0:
        raise ShapeError(f"gemm shapes do not conform: {a.shape} x {b.shape}")
    _check_no_nan(a, "lhs")
    _check_no_nan(b, "rhs")
    stats = fault_stats if fault_stats is not None else FaultStats()
    lane = _Lane(cfg, invocation, stats)
    a_bits = [lane.encode(float(x)) for x in a.data]
    b_bits = [lane.encode(float(x)) for x in b.data]
    out = np.empty(m * n, dtype=np.float32)
    for i in range(m):
        row = a_bits[i * k : (i + 1) * k]
        for j in range(n):
            add, mul = lane.cell_ops(i * n + j)
            acc = mul(row[0], b_bits[j])
            for kk in range(1, k):
                acc = add(acc, mul(row[kk], b_bits[kk * n + j]))
            out[i * n + j] = lane.decode(acc)
    return Tensor(shape=(m, n), data=out)


def im2col(
    input_tensor: Tensor, kernel_shape, stride: int = 1, padding: int = 0
) -> Tensor:
    """Unfold (C, H, W) input into a (C*KH*KW, H_out*W_out) patch matrix.

    Column order is (c, kh, kw); zero padding. This fixes the
    accumulation order of the convolution.
    """
    c, h, w = input_tensor.shape
    kc, kh, kw = kernel_shape
    if kc != c:
        raise ShapeError(f"kernel channels {kc} != input channels {c}")
    h_out = (h + 2 * padding - kh) // stride + 1
    w_out = (w + 2 * padding - kw) // stride + 1
    if h_out <= 0 or w_out <= 0:
        raise ShapeError("kernel does not fit the padded input")
    img = input_tensor.as_array()
    if padding:
        img = np.pad(img, ((0, 0), (padding, padding), (padding, padding)))
    cols = np.empty((c * kh * kw, h_out * w_out), dtype=np.float32)
    row = 0
    for ci in range(c):
        for ki in range(kh):
            for kj in range(kw):
                patch = img[
                    ci,
                    ki : ki + h_out * stride : stride,
                    kj : kj + w_out * stride : stride,
                ]
                cols[row] = patch.reshape(-1)
                row += 1
    return Tensor(shape=cols.shape, data=cols.reshape(-1))


def conv2d(
    input_tensor: Tensor,
    kernel: Tensor,
    cfg: ArithmeticConfig,
    *,
    stride: int = 1,
    padding: int = 0,
    invocation: int = 0,
    fault_stats: FaultStats | None = None,
) -> Tensor:
    """2-D convolution of a (C, H, W) input with an (O, C, KH, KW) kernel.

    Implemented as im2col followed by ``gemm``, so it is bit-identical
    to a direct nested loop using the same (c, kh, kw) accumulation
    order and the same per-output-cell fault substreams.
    """
    if len(input_tensor.shape) != 3 or len(kernel.shape) != 4:
        raise ShapeError(
            f"conv2d needs (C,H,W) x (O,C,KH,KW), got "
            f"{input_tensor.shape} x {kernel.shape}"
        )
    o, kc, kh, kw = kernel.shape
    cols = im2col(input_tensor, (kc, kh, kw), stride=stride, padding=padding)
    weights = Tensor(shape=(o, kc * kh * kw), data=kernel.data)
    flat = gemm(
        weights, cols, cfg, invocation=invocation, fault_stats=fault_stats
    )
    c, h, w = input_tensor.shape
    h_out = (h + 2 * padding - kh) // stride + 1
    w_out = (w + 2 * padding - kw) // stride + 1
    return Tensor(shape=(o, h_out, w_out), data=flat.data)


@dataclass(frozen=True)
class LayerSpec:
    """One layer of a declarative workload."""

    kind: str  # "gemm" or "conv"
    out_dim: int = 0  # gemm output width
    out_channels: int = 0  # conv output channels
    kernel_size: int = 3
    stride: int = 1
    padding: int = 0


@dataclass
class Workload:
    """Layered chain of kernels with seeded random weights and input."""

    input_shape: tuple
    layers: list
    seed: int = 0
    low: float = 0.1
    high: float = 2.0

    def to_dict(self) -> dict:
        return {
            "input_shape": list(self.input_shape),
            "seed": self.seed,
            "low": self.low,
            "high": self.high,
            "layers": [
                {k: v for k, v in vars(spec).items()} for spec in self.layers
            ],
        }


def load_workload(path) -> Workload:
    try:
        with open(path) as fh:
            raw = json.load(fh)
        layers = [LayerSpec(**entry) for entry in raw["layers"]]
        return Workload(
            input_shape=tuple(raw["input_shape"]),
            layers=layers,
            seed=int(raw.get("seed", 0)),
            low=float(raw.get("low", 0.1)),
            high=float(raw.get("high", 2.0)),
        )
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"bad workload file {path}: {exc}") from exc


def _workload_tensors(workload: Workload):
    """Deterministic input and per-layer weights for a workload."""
    rng = np.random.default_rng(workload.seed)

    def draw(shape):
        return Tensor.from_array(
            rng.uniform(workload.low, workload.high, size=shape).astype(np.float32)
        )

    x = draw(workload.input_shape)
    weights = []
    shape = workload.input_shape
    for spec in workload.layers:
        if spec.kind == "gemm":
            if len(shape) != 2:
                raise ShapeError("gemm layer needs a 2-D running tensor")
            w = draw((spec.out_dim, shape[0]))
            shape = (spec.out_dim, shape[1])
        elif spec.kind == "conv":
            if len(shape) != 3:
                raise ShapeError("conv layer needs a (C,H,W) running tensor")
            w = draw((spec.out_channels, shape[0], spec.kernel_size, spec.kernel_size))
            c, h, wd = shape
            shape = (
                spec.out_channels,
                (h + 2 * spec.padding - spec.kernel_size) // spec.stride + 1,
                (wd + 2 * spec.padding - spec.kernel_size) // spec.stride + 1,
            )
        else:
            raise ConfigError(f"unknown layer kind {spec.kind!r}")
        weights.append(w)
    return x, weights


def run_workload(
    workload: Workload,
    cfg: ArithmeticConfig,
    *,
    input_override: Tensor | None = None,
) -> tuple[list, FaultStats]:
    """Run the chain, returning every layer's output tensor and fault stats."""
    x, weights = _workload_tensors(workload)
    if input_override is not None:
        if input_override.shape != x.shape:
            raise ShapeError("input override shape does not match workload")
        x = input_override
    stats = FaultStats()
    outputs = []
    for index, (spec, w) in enumerate(zip(workload.layers, weights)):
        if spec.kind == "gemm":
            x = gemm(w, x, cfg, invocation=index, fault_stats=stats)
        else:
            x = conv2d(
                x,
                w,
                cfg,
                stride=spec.stride,
                padding=spec.padding,
                invocation=index,
                fault_stats=stats,
            )
        outputs.append(x)
    return outputs, stats


def error_propagation_report(
    cfg_a: ArithmeticConfig,
    cfg_b: ArithmeticConfig,
    workload: Workload,
    *,
    input_override_a: Tensor | None = None,
) -> dict:
    """Per-layer deviation of lane ``a`` relative to lane ``b``.

    Reports, for every layer, the max and mean relative deviation and
    the fraction of cells that differ at all, which exposes how a
    perturbation spreads wide while its per-cell intensity shrinks.
    """
    outs_a, stats_a = run_workload(workload, cfg_a, input_override=input_override_a)
    outs_b, stats_b = run_workload(workload, cfg_b)
    layers = []
    for index, (ta, tb) in enumerate(zip(outs_a, outs_b)):
        ref = tb.data.astype(np.float64)
        dev = np.abs(ta.data.astype(np.float64) - ref)
        denom = np.maximum(np.abs(ref), np.finfo(np.float64).tiny)
        rel = dev / denom
        layers.append(
            {
                "layer": index,
                "cells": int(ta.data.size),
                "affected_cells": int(np.count_nonzero(dev)),
                "max_rel_deviation": float(rel.max()),
                "mean_rel_deviation": float(rel.mean()),
            }
        )
    return {
        "config_a": cfg_a.setup.value,
        "config_b": cfg_b.setup.value,
        "layers": layers,
        "fault_stats_a": stats_a.to_dict(),
        "fault_stats_b": stats_b.to_dict(),
    }
