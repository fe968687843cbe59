"""Counter-based random numbers keyed by simulation coordinates.

Every random decision is a pure function of ``(seed, shot, period, channel,
site)``, so results do not depend on evaluation order, skipped work (inactive
regions are never drawn for), or how shots are split across workers.
"""
import numpy as np
from numba import njit

_U64 = np.uint64
_GAMMA = _U64(0x9E3779B97F4A7C15)
_M1 = _U64(0xBF58476D1CE4E5B9)
_M2 = _U64(0x94D049BB133111EB)
_SITE_OFFSET = 1 << 32
_INV53 = 1.0 / 9007199254740992.0

# channel ids inside one period
CH_GATE = 0  # + layer (0..3)
CH_RESET = 4
CH_DETECT = 5
CH_INJECT = 6
CH_NOISE = 7
N_CHANNELS = 8


@njit(cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> _U64(30))) * _M1
    z = (z ^ (z >> _U64(27))) * _M2
    return z ^ (z >> _U64(31))


@njit(cache=True, nogil=True)
def key_hash(seed, shot, period, channel, site):
    h = _mix(_U64(seed) + _GAMMA)
    h = _mix(h ^ (_U64(shot) + _GAMMA))
    h = _mix(h ^ (_U64(period * N_CHANNELS + channel) + _GAMMA))
    h = _mix(h ^ (_U64(site + _SITE_OFFSET) + _GAMMA))
    return h


@njit(cache=True, nogil=True)
def key_uniform(seed, shot, period, channel, site):
    """Uniform double in [0, 1) for one event coordinate."""
    return (key_hash(seed, shot, period, channel, site) >> _U64(11)) * _INV53


def derive_seed(seed, label):
    """Derive an independent 63-bit sub-seed from ``seed`` and a string label."""
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), *label.encode()])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
