"""SplitMix64, a small 64-bit generator that is easy to reproduce anywhere.

State update and output (all arithmetic modulo 2**64)::

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    return z ^ (z >> 31)

Uniform floats in [0, 1) are ``(next() >> 11) * 2**-53``. Sub-seeds for the
``k``-th child stream are the first output of a generator seeded with
``seed ^ mix(k)``, where ``mix`` is one output step applied to ``k``.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK
        return _mix(self.state)

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()


def sub_seed(seed: int, *path: int) -> int:
    """Derive an independent seed for the stream addressed by ``path``."""
    s = seed & _MASK
    for k in path:
        s = SplitMix64(s ^ _mix((k + _GAMMA) & _MASK)).next_u64()
    return s
