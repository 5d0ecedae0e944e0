"""Hot loops over dense amplitude arrays.

Every kernel has a numba implementation and a numpy implementation with the
same signature. The public names dispatch on :data:`BACKEND`, which is
``"numba"`` unless numba is missing or ``GSTATEPREP_DISABLE_NUMBA`` is set.
Kernels mutate their array argument in place; callers own the copies.
"""

import numpy as np

from ._accel import HAS_NUMBA, njit

BACKEND = "numba" if HAS_NUMBA else "numpy"


# --------------------------------------------------------------------------
# numba kernels
# --------------------------------------------------------------------------

@njit(cache=True)
def _grover_iterate_numba(amps, mask, t):
    n = amps.shape[0]
    inv_n = 1.0 / n
    for _ in range(t):
        # oracle sign flip fused with a Kahan-compensated mean
        sr = 0.0
        cr = 0.0
        si = 0.0
        ci = 0.0
        for i in range(n):
            v = amps[i]
            if mask[i]:
                v = -v
                amps[i] = v
            y = v.real - cr
            s = sr + y
            cr = (s - sr) - y
            sr = s
            y = v.imag - ci
            s = si + y
            ci = (s - si) - y
            si = s
        two_mr = 2.0 * sr * inv_n
        two_mi = 2.0 * si * inv_n
        for i in range(n):
            v = amps[i]
            amps[i] = complex(two_mr - v.real, two_mi - v.imag)
    return amps


@njit(cache=True)
def _masked_sum_numba(amps, mask, want):
    sr = 0.0
    cr = 0.0
    si = 0.0
    ci = 0.0
    count = 0
    for i in range(amps.shape[0]):
        if mask[i] == want:
            v = amps[i]
            y = v.real - cr
            s = sr + y
            cr = (s - sr) - y
            sr = s
            y = v.imag - ci
            s = si + y
            ci = (s - si) - y
            si = s
            count += 1
    return complex(sr, si), count


# --------------------------------------------------------------------------
# numpy kernels
# --------------------------------------------------------------------------

def _grover_iterate_numpy(amps, mask, t):
    # np.sum uses pairwise summation, which keeps the mean accurate at 2^26
    n = amps.shape[0]
    for _ in range(t):
        np.negative(amps, out=amps, where=mask)
        two_mean = 2.0 * amps.sum() / n
        np.subtract(two_mean, amps, out=amps)
    return amps


def _masked_sum_numpy(amps, mask, want):
    sel = mask == want
    return complex(amps[sel].sum()), int(np.count_nonzero(sel))


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------

def grover_iterate(amps, mask, t, backend=None):
    """Apply ``t`` rounds of oracle sign flip + inversion about the mean.

    ``amps`` must be a contiguous complex128 array, ``mask`` a boolean array
    of the same length. Returns ``amps`` (modified in place).
    """
    backend = backend or BACKEND
    if t <= 0:
        return amps
    if backend == "numba":
        if not HAS_NUMBA:
            raise RuntimeError("numba backend requested but numba is not active")
        return _grover_iterate_numba(amps, mask, int(t))
    return _grover_iterate_numpy(amps, mask, int(t))


def masked_sum(amps, mask, want=True, backend=None):
    """Sum of amplitudes where ``mask == want`` and the number of such entries."""
    backend = backend or BACKEND
    if backend == "numba":
        if not HAS_NUMBA:
            raise RuntimeError("numba backend requested but numba is not active")
        return _masked_sum_numba(amps, mask, bool(want))
    return _masked_sum_numpy(amps, mask, bool(want))
