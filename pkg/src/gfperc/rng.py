"""Counter-based random numbers.

Every random quantity in the package is a pure function of integer keys,
so results never depend on call order, window size or worker count.
"""
import numpy as np
from scipy.special import ndtri

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def _mix_int(z):
    z &= _MASK
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


def derive_seed(*keys):
    """Combine integer keys into one 64-bit seed (order sensitive)."""
    h = 0x243F6A8885A308D3
    for k in keys:
        if isinstance(k, str):
            k = int.from_bytes(k.encode(), "little")
        h = _mix_int(h ^ _mix_int((int(k) + _GOLDEN) & _MASK))
    return h


def _mix(z):
    # vectorised splitmix64 finaliser, uint64 arithmetic wraps silently
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_M1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def _as_u64(a):
    a = np.asarray(a, dtype=np.int64)
    return a.astype(np.uint64)


def hash_uniform(seed, ix, iy):
    """Uniform (0, 1) variates keyed by ``(seed, ix, iy)``.

    ``ix`` and ``iy`` broadcast against each other.
    """
    s = np.uint64(derive_seed(seed))
    hx = _mix(s ^ (_as_u64(ix) * np.uint64(_GOLDEN)))
    h = _mix(hx ^ (_as_u64(iy) * np.uint64(_M2) + np.uint64(_GOLDEN)))
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def lattice_normals(seed, ix, iy):
    """Standard normals on the lattice points ``iy[:, None], ix[None, :]``."""
    ix = np.asarray(ix)
    iy = np.asarray(iy)
    u = hash_uniform(seed, ix[None, :], iy[:, None])
    return ndtri(u)


def stream_uniform(seed, n, offset=0):
    """``n`` uniforms from a one-dimensional keyed stream."""
    idx = np.arange(offset, offset + n, dtype=np.int64)
    return hash_uniform(seed, idx, 0x5EED)


def stream_normal(seed, n, offset=0):
    return ndtri(stream_uniform(seed, n, offset))


def uniform_int(seed, upper):
    """Integer uniform on ``{0, ..., upper}``."""
    return int(derive_seed(seed, 0x6B) % (int(upper) + 1))
