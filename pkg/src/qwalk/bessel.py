"""Integer-order Bessel functions of the first kind.

All orders ``0..nmax`` are produced at once by Miller's backward recurrence,
normalised with ``J_0 + 2 * sum_k J_2k = 1``. Tiny arguments use the power
series instead, where the recurrence coefficients ``2k/x`` would overflow.
"""

import math

import numpy as np

_SERIES_CUTOFF = 1e-3
_RESCALE_AT = 1e200


def _start_order(nmax, xmax):
    m = max(nmax, int(math.ceil(xmax))) + 30 + int(12 * xmax ** (1 / 3))
    return m + (m % 2)


def _series(nmax, x):
    # J_n(x) = sum_k (-1)^k (x/2)^(2k+n) / (k! (n+k)!); |x| < 1e-3 so 5 terms suffice
    out = np.zeros((nmax + 1,) + x.shape)
    half = x / 2.0
    lead = np.ones_like(half)  # (x/2)^n / n!, built up so it underflows instead of overflowing
    for n in range(nmax + 1):
        if n:
            lead = lead * half / n
        term = lead
        acc = term.copy()
        for k in range(1, 6):
            term = -term * half * half / (k * (n + k))
            acc += term
        out[n] = acc
    return out


def bessel_j_orders(nmax, x):
    """Return ``J_n(x)`` for ``n = 0..nmax``.

    Args:
        nmax: highest order (non-negative integer).
        x: real scalar or array of arguments (any sign).

    Returns:
        Array of shape ``(nmax + 1,) + np.shape(x)``.
    """
    nmax = int(nmax)
    if nmax < 0:
        raise ValueError("nmax must be non-negative")
    x = np.asarray(x, dtype=float)
    shape = x.shape
    flat = x.ravel()
    ax = np.abs(flat)
    out = np.zeros((nmax + 1, flat.size))

    small = ax < _SERIES_CUTOFF
    if small.any():
        out[:, small] = _series(nmax, ax[small])

    big = ~small
    if big.any():
        xb = ax[big]
        m = _start_order(nmax, float(xb.max()))
        inv = 2.0 / xb
        jp1 = np.zeros_like(xb)
        jk = np.full_like(xb, 1e-300)
        norm = np.zeros_like(xb)
        vals = np.zeros((nmax + 1, xb.size))
        # rescalings applied to each column so far, and at the time each order was stored
        nscale = np.zeros(xb.size, dtype=int)
        stored_at = np.zeros((nmax + 1, xb.size), dtype=int)
        if m <= nmax:
            vals[m] = jk
        for k in range(m, 0, -1):
            jm1 = k * inv * jk - jp1
            jp1, jk = jk, jm1
            if (k - 1) % 2 == 0 and k - 1 > 0:
                norm += 2.0 * jk
            huge = np.abs(jk) > _RESCALE_AT
            if huge.any():
                jk[huge] /= _RESCALE_AT
                jp1[huge] /= _RESCALE_AT
                norm[huge] /= _RESCALE_AT
                nscale[huge] += 1
            if k - 1 <= nmax:
                vals[k - 1] = jk
                stored_at[k - 1] = nscale
        norm += jk
        lag = nscale[None, :] - stored_at
        with np.errstate(under="ignore"):
            factor = np.where(lag > 0, _RESCALE_AT ** (-np.minimum(lag, 2).astype(float)), 1.0)
        out[:, big] = vals * factor / norm

    # J_n(-x) = (-1)^n J_n(x)
    neg = flat < 0
    if neg.any():
        odd = np.arange(nmax + 1) % 2 == 1
        out[np.ix_(odd, neg)] *= -1.0
    return out.reshape((nmax + 1,) + shape)


def bessel_j(n, x):
    """``J_n(x)`` for integer order ``n`` (scalar or array, any sign).

    ``n`` and ``x`` broadcast against each other.
    """
    n = np.asarray(n)
    if not np.issubdtype(n.dtype, np.integer):
        if not np.all(np.equal(np.mod(n, 1), 0)):
            raise ValueError("only integer orders are supported")
        n = n.astype(int)
    x = np.asarray(x, dtype=float)
    nb, xb = np.broadcast_arrays(n, x)
    absn = np.abs(nb)
    nmax = int(absn.max()) if absn.size else 0
    table = bessel_j_orders(nmax, xb)
    flat_idx = np.arange(xb.size)
    vals = table.reshape(nmax + 1, -1)[absn.ravel(), flat_idx].reshape(xb.shape)
    sign = np.where((nb < 0) & (absn % 2 == 1), -1.0, 1.0)
    res = vals * sign
    return res if res.ndim else float(res)
