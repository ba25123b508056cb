"""Deterministic random streams.

Every stochastic routine in the package draws from a `Stream`, a small wrapper
around an MRG32k3a state vector.  MRG32k3a does all of its arithmetic on
integers below 2**53 stored in float64, so the same source code produces the
same draw sequence in pure Python and inside compiled kernels.

Streams are derived, not split: a 64-bit key is hashed (splitmix64, computed
with unbounded Python ints) from ``(seed, label, index)``, and the six state
words come from the hash chain.  Replications, paths and graphs each get their
own derived stream, which makes results independent of how work is chunked
across processes.
"""

from __future__ import annotations

import numpy as np

from . import _kernels

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# MRG32k3a moduli
_M1 = 4294967087
_M2 = 4294944443


def _splitmix64(x: int) -> tuple[int, int]:
    """One splitmix64 step: returns (next state, output word)."""
    x = (x + _GOLDEN) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x, (z ^ (z >> 31)) & _MASK64


def _fnv1a64(s: str) -> int:
    h = 0xCBF29CE484222325
    for byte in s.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & _MASK64
    return h


def _mix(*parts: int) -> int:
    """Hash a tuple of 64-bit ints down to one well-stirred key."""
    x = 0x8E1327C62F702C73
    for p in parts:
        x ^= p & _MASK64
        x, _ = _splitmix64(x)
        x, h = _splitmix64(x)
        x ^= h
    return x & _MASK64


def _state_from_key(key: int) -> np.ndarray:
    """Fill the six MRG32k3a words from a splitmix64 chain off `key`.

    Words land in [1, m-1], so neither recurrence starts from an all-zero
    triple.
    """
    out = np.empty(6, dtype=np.float64)
    x = key
    for j in range(6):
        x, h = _splitmix64(x)
        m = _M1 if j < 3 else _M2
        out[j] = float(1 + h % (m - 1))
    return out


class Stream:
    """A deterministic random stream with cheap derived sub-streams."""

    __slots__ = ("key", "state")

    def __init__(self, key: int):
        self.key = key & _MASK64
        self.state = _state_from_key(self.key)

    @classmethod
    def derive(cls, seed: int, label: str = "", index: int = 0) -> "Stream":
        return cls(_mix(seed, _fnv1a64(label), index * _GOLDEN + 1))

    def substream(self, index: int) -> "Stream":
        return Stream(_mix(self.key, 0xD1B54A32D192ED03, index * _GOLDEN + 1))

    # -- scalar draws (thin wrappers over the kernel module; hot loops should
    #    pass .state into kernels directly) --

    def u01(self) -> float:
        """Uniform draw in (0, 1]."""
        return _kernels.mrg_next(self.state)

    def uniforms(self, m: int) -> np.ndarray:
        out = np.empty(m, dtype=np.float64)
        _kernels.fill_uniforms(self.state, out)
        return out

    def exponential(self, rate: float = 1.0) -> float:
        return -np.log(_kernels.mrg_next(self.state)) / rate

    def exponentials(self, rates: np.ndarray) -> np.ndarray:
        rates = np.asarray(rates, dtype=np.float64)
        out = np.empty(rates.shape[0], dtype=np.float64)
        _kernels.fill_exponentials(self.state, rates, out)
        return out

    def poisson(self, lam: float) -> int:
        return int(_kernels.rng_poisson(self.state, lam))

    def __repr__(self) -> str:  # pragma: no cover
        return f"Stream(key=0x{self.key:016x})"
