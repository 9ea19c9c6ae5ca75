"""Reproducible generators for the planted and pure-noise regression models.

Randomness discipline: every instance is a pure function of its
``ModelParams``. The 64-bit seed feeds a ``SeedSequence`` that is split
into three fixed child streams (support selection, design matrix, noise),
each driving a counter-based Philox generator. Because the streams are
keyed only by the seed and the stream index, the noise/response stream in
pure-noise mode does not depend on the ambient dimension ``p``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from ._io import atomic_write_bytes, atomic_write_text

# child-stream indices under the instance seed
_STREAM_SUPPORT = 0
_STREAM_DESIGN = 1
_STREAM_NOISE = 2

_MAGIC = b"BSRI"
_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ModelParams:
    """Parameters (p, k, n, sigma2) of the regression model plus the seed.

    All logarithms derived from these fields elsewhere in the package are
    natural logarithms.
    """

    p: int
    k: int
    n: int
    sigma2: float
    seed: int

    def __post_init__(self) -> None:
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if not 1 <= self.k <= self.p:
            raise ValueError(f"k must satisfy 1 <= k <= p={self.p}, got {self.k}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.sigma2 < 0:
            raise ValueError(f"sigma2 must be >= 0, got {self.sigma2}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.sigma2))


@dataclass(frozen=True)
class Instance:
    """One realization of the model: design X, support of b*, noise W, response Y.

    Planted case: ``response == design @ b* + noise`` exactly, where b* is
    the indicator vector of ``planted_support``. Pure-noise case:
    ``planted_support`` is empty and ``response`` is drawn independently of
    ``design``. Arrays are read-only; instances are safe to share across
    threads.
    """

    params: ModelParams
    design: np.ndarray
    planted_support: tuple[int, ...]
    noise: np.ndarray
    response: np.ndarray

    @property
    def is_pure_noise(self) -> bool:
        return len(self.planted_support) == 0

    def reconstructed_response(self) -> np.ndarray:
        """Recompute X b* + W with the same operations used at generation time."""
        y = _column_sum(self.design, self.planted_support)
        return y + self.noise


def _column_sum(design: np.ndarray, support) -> np.ndarray:
    """Sum of the selected design columns (the fit X b for binary b)."""
    idx = np.asarray(support, dtype=np.intp)
    if idx.size == 0:
        return np.zeros(design.shape[0])
    return design[:, idx].sum(axis=1)


def _streams(seed: int) -> tuple[Generator, Generator, Generator]:
    children = SeedSequence(seed).spawn(3)
    return (
        Generator(Philox(children[_STREAM_SUPPORT])),
        Generator(Philox(children[_STREAM_DESIGN])),
        Generator(Philox(children[_STREAM_NOISE])),
    )


def _freeze(*arrays: np.ndarray) -> None:
    for a in arrays:
        a.setflags(write=False)


def generate_instance(params: ModelParams) -> Instance:
    """Draw a planted instance: X i.i.d. N(0,1), W i.i.d. N(0, sigma2), Y = X b* + W.

    The planted support is the first k entries of a seeded uniform
    permutation of [0, p). Deterministic in ``params``.
    """
    rng_support, rng_design, rng_noise = _streams(params.seed)
    support = tuple(sorted(int(i) for i in rng_support.permutation(params.p)[: params.k]))
    design = np.ascontiguousarray(rng_design.standard_normal((params.n, params.p)))
    noise = params.sigma * rng_noise.standard_normal(params.n)
    response = _column_sum(design, support) + noise
    _freeze(design, noise, response)
    return Instance(params, design, support, noise, response)


def generate_pure_noise(params: ModelParams) -> Instance:
    """Draw a pure-noise instance: X i.i.d. N(0,1) and Y i.i.d. N(0, sigma2), independent.

    Y comes from the noise stream, which is keyed by the seed alone, so
    changing ``p`` (or regenerating X at all) leaves Y untouched.
    """
    _, rng_design, rng_noise = _streams(params.seed)
    design = np.ascontiguousarray(rng_design.standard_normal((params.n, params.p)))
    noise = params.sigma * rng_noise.standard_normal(params.n)
    response = noise.copy()
    _freeze(design, noise, response)
    return Instance(params, design, (), noise, response)


# ---------------------------------------------------------------------------
# Serialization: self-describing binary container + JSON sidecar.
#
# Layout (all integers little-endian):
#   magic "BSRI" | version u8 | pad u8*3 | p u64 | k u64 | n u64
#   | support_len u64 | seed u64 | sigma2 f64
#   | support u64*support_len | X f64*(n*p) row-major | W f64*n | Y f64*n
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<4sB3xQQQQQd")


def sidecar_path(path: str) -> str:
    return path + ".json"


def save_instance(instance: Instance, path: str) -> None:
    """Write the binary container at ``path`` and a JSON params sidecar at ``path + '.json'``."""
    p = instance.params
    support = np.asarray(instance.planted_support, dtype="<u8")
    header = _HEADER.pack(
        _MAGIC, _FORMAT_VERSION, p.p, p.k, p.n, len(instance.planted_support), p.seed, p.sigma2
    )
    payload = b"".join(
        [
            header,
            support.tobytes(),
            np.ascontiguousarray(instance.design, dtype="<f8").tobytes(),
            np.ascontiguousarray(instance.noise, dtype="<f8").tobytes(),
            np.ascontiguousarray(instance.response, dtype="<f8").tobytes(),
        ]
    )
    atomic_write_bytes(path, payload)
    sidecar = {
        "p": p.p,
        "k": p.k,
        "n": p.n,
        "sigma2": p.sigma2,
        "seed": p.seed,
        "pure_noise": instance.is_pure_noise,
        "format": {"magic": _MAGIC.decode("ascii"), "version": _FORMAT_VERSION},
    }
    atomic_write_text(sidecar_path(path), json.dumps(sidecar, indent=2) + "\n")


def load_instance(path: str) -> Instance:
    """Read an instance written by :func:`save_instance` (bit-exact round trip)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise ValueError(f"truncated instance file: {path}")
    magic, version, p, k, n, support_len, seed, sigma2 = _HEADER.unpack_from(blob)
    if magic != _MAGIC:
        raise ValueError(f"bad magic bytes in {path}: {magic!r}")
    if version != _FORMAT_VERSION:
        raise ValueError(f"unsupported container version {version} in {path}")
    params = ModelParams(p=int(p), k=int(k), n=int(n), sigma2=float(sigma2), seed=int(seed))
    off = _HEADER.size
    expected = off + 8 * (support_len + n * p + 2 * n)
    if len(blob) != expected:
        raise ValueError(f"instance file {path} has {len(blob)} bytes, expected {expected}")

    def take(count: int, dtype: str) -> np.ndarray:
        nonlocal off
        arr = np.frombuffer(blob, dtype=dtype, count=count, offset=off).copy()
        off += 8 * count
        return arr

    support = tuple(int(i) for i in take(int(support_len), "<u8"))
    design = np.ascontiguousarray(take(int(n * p), "<f8").reshape(int(n), int(p)))
    noise = take(int(n), "<f8")
    response = take(int(n), "<f8")
    if any(not 0 <= i < p for i in support):
        raise ValueError(f"support index out of range in {path}")
    _freeze(design, noise, response)
    return Instance(params, design, support, noise, response)
