"""Counter-based random streams.

Every replica draws from Philox4x64-10 keyed by ``(master_seed, stream_index)``.
The Python-side :class:`RngStream` wraps numpy's ``Philox`` bit generator; the
jitted kernels carry their own copy of the block function so the hot loop never
leaves nopython mode. Both produce the same uint64 sequence (checked in the
test suite), and both convert to doubles as ``(x >> 11) * 2**-53``.
"""

import numba as nb
import numpy as np

RNG_ALGORITHM = "philox4x64-10; key=(master_seed, stream_index); counter pre-incremented; u=(x>>11)*2^-53"

MASK64 = (1 << 64) - 1
_INV_2_53 = 1.0 / 9007199254740992.0

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_MASK32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_ONE = np.uint64(1)


class RngExhausted(RuntimeError):
    """Raised when a stream is asked for more variates than its configured budget."""


def _check_u64(value, name):
    value = int(value)
    if not 0 <= value <= MASK64:
        raise ValueError(f"{name} must fit in an unsigned 64-bit integer, got {value}")
    return value


class RngStream:
    """A reproducible stream of uniforms in [0, 1).

    ``limit`` caps the number of variates; exceeding it raises
    :class:`RngExhausted`, which in practice means the step cap of the run was
    misconfigured.
    """

    def __init__(self, master_seed, stream_index=0, limit=None):
        self.master_seed = _check_u64(master_seed, "master_seed")
        self.stream_index = _check_u64(stream_index, "stream_index")
        self.limit = limit
        self.drawn = 0
        self._bitgen = np.random.Philox(key=self.master_seed | (self.stream_index << 64))

    def next_raw(self):
        if self.limit is not None and self.drawn >= self.limit:
            raise RngExhausted(
                f"stream ({self.master_seed}, {self.stream_index}) exhausted after {self.drawn} draws"
            )
        self.drawn += 1
        return int(self._bitgen.random_raw())

    def uniform(self):
        return (self.next_raw() >> 11) * _INV_2_53

    @property
    def counter(self):
        return self._bitgen.state["state"]["counter"].copy()

    def __repr__(self):
        return f"RngStream(master_seed={self.master_seed}, stream_index={self.stream_index}, drawn={self.drawn})"


@nb.njit(cache=True, inline="always")
def _mulhilo(a, b):
    a_lo = a & _MASK32
    a_hi = a >> _S32
    b_lo = b & _MASK32
    b_hi = b >> _S32
    ll = a_lo * b_lo
    lh = a_lo * b_hi
    hl = a_hi * b_lo
    hh = a_hi * b_hi
    mid = (ll >> _S32) + (lh & _MASK32) + (hl & _MASK32)
    hi = hh + (lh >> _S32) + (hl >> _S32) + (mid >> _S32)
    return a * b, hi


@nb.njit(cache=True)
def philox_block(c0, c1, c2, c3, k0, k1, out):
    """Ten Philox4x64 rounds on counter (c0..c3) and key (k0, k1); writes 4 words to ``out``."""
    for r in range(10):
        if r > 0:
            k0 = k0 + _W0
            k1 = k1 + _W1
        lo0, hi0 = _mulhilo(_M0, c0)
        lo1, hi1 = _mulhilo(_M1, c2)
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
    out[0] = c0
    out[1] = c1
    out[2] = c2
    out[3] = c3


@nb.njit(cache=True)
def new_kernel_stream(seed, stream):
    """State array for an in-kernel stream: [k0, k1, c0, c1, buf0..buf3, pos]."""
    st = np.zeros(9, dtype=np.uint64)
    st[0] = seed
    st[1] = stream
    st[8] = np.uint64(4)
    return st


@nb.njit(cache=True)
def reset_kernel_stream(st, seed, stream):
    st[0] = seed
    st[1] = stream
    st[2] = np.uint64(0)
    st[3] = np.uint64(0)
    st[8] = np.uint64(4)


@nb.njit(cache=True)
def kernel_raw(st):
    pos = st[8]
    if pos >= np.uint64(4):
        # 128-bit counter is plenty: 2**128 blocks cannot be consumed.
        st[2] = st[2] + _ONE
        if st[2] == np.uint64(0):
            st[3] = st[3] + _ONE
        philox_block(st[2], st[3], np.uint64(0), np.uint64(0), st[0], st[1], st[4:8])
        pos = np.uint64(0)
    value = st[4 + np.int64(pos)]
    st[8] = pos + _ONE
    return value


@nb.njit(cache=True)
def kernel_uniform(st):
    return np.float64(kernel_raw(st) >> _S11) * _INV_2_53
