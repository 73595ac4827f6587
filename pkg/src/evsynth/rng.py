"""Counter-based deterministic random substreams.

Every stochastic draw in the simulator comes from a splitmix64 stream keyed
by (master seed, pixel index, interval index).  Results are therefore
independent of pixel partitioning and worker scheduling, and the compiled
kernel reproduces the pure-Python stream bit for bit (both sides perform the
same 64-bit integer arithmetic and call the same libm).
"""

import math

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GAMMA = 0x9E3779B97F4A7C15
_INV_2_53 = 1.0 / 9007199254740992.0  # 2**-53, exact
_TWO_PI = 6.283185307179586


def mix64(z: int) -> int:
    """splitmix64 finalizer: full-avalanche 64-bit bijection."""
    z &= _MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & _MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return z


def substream_state(seed: int, pixel: int, interval: int) -> int:
    """Initial stream state for one (seed, pixel, interval) triple."""
    h = mix64(seed & _MASK64)
    h = mix64(h ^ (pixel & _MASK64))
    h = mix64(h ^ (interval & _MASK64))
    return h


def next_uniform(state: int) -> tuple[float, int]:
    """Advance the stream; returns (u, new_state) with u in (0, 1]."""
    state = (state + _GAMMA) & _MASK64
    x = mix64(state)
    return ((x >> 11) + 1) * _INV_2_53, state


def next_normal(state: int) -> tuple[float, int]:
    """Standard normal via Box-Muller (consumes two uniforms)."""
    u1, state = next_uniform(state)
    u2, state = next_uniform(state)
    r = math.sqrt(-2.0 * math.log(u1))
    return r * math.cos(_TWO_PI * u2), state


class SubstreamRNG:
    """Stateful view over one counter-keyed substream.

    Convenience wrapper for the scalar sampling APIs; the hot kernels
    thread the raw integer state instead.
    """

    __slots__ = ("state",)

    def __init__(self, seed: int, pixel: int = 0, interval: int = 0):
        self.state = substream_state(seed, pixel, interval)

    def uniform(self) -> float:
        u, self.state = next_uniform(self.state)
        return u

    def normal(self) -> float:
        z, self.state = next_normal(self.state)
        return z
