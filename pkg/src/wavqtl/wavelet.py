"""Orthonormal Haar wavelet transform.

Coefficients are stored in a flat array of length ``B = 2**J`` ordered by
scale, coarse to fine::

    index 0                      -> scale 0 (scaling coefficient, sum / 2**(J/2))
    index 1                      -> scale 1, location 1
    index 2**(s-1) + (l - 1)     -> scale s, location l  (s >= 1)

Scales and locations are 1-based in the public helpers, matching the
conventional (s, l) labelling.  All transforms operate along the last axis,
so a stack of signals (individuals x bases) is transformed in one call.
"""

import numpy as np

from ._errors import InvalidInputError

MAX_LEVEL = 20


def n_levels(B):
    """Return J such that ``B == 2**J``; raise if B is not a power of two >= 2."""
    B = int(B)
    if B < 2 or B & (B - 1):
        raise InvalidInputError(f"length must be a power of 2 (>= 2), got {B}")
    return B.bit_length() - 1


def coeff_index(s, l, B):
    """Flat array index of coefficient (s, l) for a length-B signal."""
    J = n_levels(B)
    if s == 0:
        if l != 1:
            raise InvalidInputError(f"scale 0 has a single location, got l={l}")
        return 0
    if not 1 <= s <= J:
        raise InvalidInputError(f"scale {s} outside 0..{J}")
    if not 1 <= l <= 2 ** (s - 1):
        raise InvalidInputError(f"location {l} outside 1..{2 ** (s - 1)} at scale {s}")
    return 2 ** (s - 1) + (l - 1)


def coeff_scales(B):
    """Scale label of every flat coefficient index, shape (B,)."""
    J = n_levels(B)
    scales = np.zeros(B, dtype=np.intp)
    for s in range(1, J + 1):
        scales[2 ** (s - 1):2 ** s] = s
    return scales


def coeff_labels(B):
    """List of (s, l) pairs in flat index order."""
    J = n_levels(B)
    labels = [(0, 1)]
    for s in range(1, J + 1):
        labels.extend((s, l) for l in range(1, 2 ** (s - 1) + 1))
    return labels


def dwt(signal):
    """Haar DWT of ``signal`` along its last axis (O(B) pyramid).

    Parameters
    ----------
    signal : array_like, shape (..., B)
        B must be a power of two.

    Returns
    -------
    ndarray, shape (..., B)
        Coefficients in scale order (see module docstring).
    """
    x = np.asarray(signal, dtype=float)
    J = n_levels(x.shape[-1])
    out = np.empty_like(x)
    approx = x
    for s in range(J, 0, -1):
        even = approx[..., 0::2]
        odd = approx[..., 1::2]
        out[..., 2 ** (s - 1):2 ** s] = (even - odd) / np.sqrt(2.0)
        approx = (even + odd) / np.sqrt(2.0)
    out[..., 0] = approx[..., 0]
    return out


def idwt(coeffs):
    """Inverse of :func:`dwt` along the last axis."""
    y = np.asarray(coeffs, dtype=float)
    J = n_levels(y.shape[-1])
    approx = y[..., 0:1]
    for s in range(1, J + 1):
        detail = y[..., 2 ** (s - 1):2 ** s]
        nxt = np.empty(y.shape[:-1] + (2 ** s,))
        nxt[..., 0::2] = (approx + detail) / np.sqrt(2.0)
        nxt[..., 1::2] = (approx - detail) / np.sqrt(2.0)
        approx = nxt
    return approx


def wc_support(s, l, B):
    """1-based inclusive base interval on which row (s, l) of W is nonzero."""
    coeff_index(s, l, B)
    J = n_levels(B)
    if s == 0:
        return 1, B
    width = 2 ** (J - s + 1)
    return (l - 1) * width + 1, l * width


def dwt_matrix(J):
    """Explicit B x B orthonormal Haar matrix, rows in flat coefficient order.

    Row (s, l) for s >= 1 is ``+2**(-(J-s+1)/2)`` on the first half of its
    support and the negative of that on the second half; row (0, 1) is the
    constant ``2**(-J/2)``.
    """
    if isinstance(J, bool) or not isinstance(J, (int, np.integer)) or not 1 <= J <= MAX_LEVEL:
        raise InvalidInputError(f"J must be an integer in 1..{MAX_LEVEL}, got {J!r}")
    B = 2 ** J
    W = np.zeros((B, B))
    W[0, :] = 2.0 ** (-J / 2)
    for s in range(1, J + 1):
        width = 2 ** (J - s + 1)
        half = width // 2
        mag = 2.0 ** (-(J - s + 1) / 2)
        for l in range(1, 2 ** (s - 1) + 1):
            row = 2 ** (s - 1) + (l - 1)
            start = (l - 1) * width
            W[row, start:start + half] = mag
            W[row, start + half:start + width] = -mag
    return W


def support_sums(values):
    """Sum of ``values`` over the support of every coefficient.

    ``values`` has shape (..., B); the result has the same shape, in flat
    coefficient order.  Used by the low-count filter.
    """
    x = np.asarray(values, dtype=float)
    J = n_levels(x.shape[-1])
    out = np.empty_like(x)
    block = x
    # block holds sums over aligned windows of width 2**(J-s+1) before the halving step
    for s in range(J, 0, -1):
        block = block[..., 0::2] + block[..., 1::2]
        out[..., 2 ** (s - 1):2 ** s] = block
    out[..., 0] = block[..., 0]
    return out
