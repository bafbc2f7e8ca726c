"""From raw count profiles to normalized, covariate-corrected wavelet coefficients."""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata

from . import wavelet
from ._errors import DegenerateInputError, InvalidInputError

log = logging.getLogger(__name__)


@dataclass
class SiteData:
    """Raw per-individual counts over one region.

    counts : int array, shape (N, B)
    library_sizes : total mapped reads per individual, shape (N,)
    """

    counts: np.ndarray
    library_sizes: np.ndarray
    site_id: str = "site"

    def __post_init__(self):
        self.counts = np.asarray(self.counts)
        self.library_sizes = np.asarray(self.library_sizes)
        if self.counts.ndim != 2:
            raise InvalidInputError("counts must be a 2-D array (individuals x bases)")
        wavelet.n_levels(self.counts.shape[1])
        if self.library_sizes.shape != (self.counts.shape[0],):
            raise InvalidInputError(
                f"library_sizes has shape {self.library_sizes.shape}, "
                f"expected ({self.counts.shape[0]},)")
        if np.any(self.counts < 0):
            raise InvalidInputError("counts must be nonnegative")
        if np.any(self.library_sizes <= 0):
            raise InvalidInputError("library sizes must be positive")

    @property
    def n(self):
        return self.counts.shape[0]

    @property
    def B(self):
        return self.counts.shape[1]


@dataclass
class TransformedSite:
    """Per-coefficient normal scores ready for association testing.

    z has shape (B, N), one row per coefficient in flat scale order; rows of
    masked coefficients are NaN.  raw_wc is the (N, B) DWT of the
    standardized counts, kept for diagnostics and effect rescaling.
    """

    z: np.ndarray
    mask: np.ndarray
    raw_wc: np.ndarray
    site_id: str = "site"
    scales: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.scales = wavelet.coeff_scales(self.z.shape[0])

    @property
    def n(self):
        return self.z.shape[1]

    @property
    def B(self):
        return self.z.shape[0]

    @property
    def n_scales(self):
        return wavelet.n_levels(self.B) + 1

    def unmasked(self):
        """(z rows, scale labels) of the unmasked coefficients."""
        keep = ~self.mask
        return self.z[keep], self.scales[keep]


def standardize(site):
    """Counts divided by each individual's library size, shape (N, B)."""
    S = np.asarray(site.library_sizes, dtype=float)
    if np.any(S <= 0):
        raise InvalidInputError("library sizes must be positive")
    return np.asarray(site.counts, dtype=float) / S[:, None]


def _blom(v):
    v = np.asarray(v, dtype=float)
    n = v.shape[-1]
    ranks = rankdata(v, axis=-1)
    return ndtri((ranks - 0.375) / (n + 0.25))


def quantile_normalize(v):
    """Map values to standard-normal Blom scores of their (average) ranks.

    Parameters
    ----------
    v : array_like, shape (N,)
        N >= 3 values, not all identical.

    Returns
    -------
    ndarray, shape (N,)
        ``Phi^-1((r - 0.375) / (N + 0.25))`` with ``r`` the average rank.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise InvalidInputError("quantile_normalize expects a 1-D vector")
    if v.size < 3:
        raise InvalidInputError(f"need at least 3 values, got {v.size}")
    if np.ptp(v) == 0:
        raise DegenerateInputError("cannot quantile-normalize a constant vector")
    return _blom(v)


def _design(C, n):
    if C is None:
        return np.ones((n, 1))
    C = np.asarray(C, dtype=float)
    if C.ndim == 1:
        C = C[:, None]
    if C.shape[0] != n:
        raise InvalidInputError(f"covariates have {C.shape[0]} rows, expected {n}")
    if not np.all(np.isfinite(C)):
        raise InvalidInputError("covariates contain non-finite values")
    X = np.column_stack([np.ones(n), C])
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise InvalidInputError("design [1, C] is rank deficient")
    return X


def regress_out(v, C=None):
    """Residuals of an OLS fit of v on an intercept plus the columns of C.

    v may be (N,) or (N, P); columns are regressed independently.
    """
    v = np.asarray(v, dtype=float)
    X = _design(C, v.shape[0])
    Q, _ = np.linalg.qr(X)
    return v - Q @ (Q.T @ v)


def low_count_mask(site, threshold_per_individual=2.0):
    """Boolean mask per coefficient; True where the raw counts in the support are too few.

    A coefficient is masked when the total raw count over its support,
    summed across individuals, is strictly below ``threshold * N``.
    """
    per_base = np.asarray(site.counts, dtype=float).sum(axis=0)
    totals = wavelet.support_sums(per_base)
    return totals < threshold_per_individual * site.counts.shape[0]


def prepare_site(site, C=None, threshold_per_individual=2.0):
    """Full per-coefficient pipeline for one site.

    DWT of standardized counts -> quantile normalize across individuals ->
    regress out covariates -> quantile normalize again.  Coefficients under
    the low-count threshold, or constant across individuals, are masked.
    """
    if site.n < 3:
        raise InvalidInputError(f"need at least 3 individuals, got {site.n}")
    X = _design(C, site.n)
    raw_wc = wavelet.dwt(standardize(site))
    mask = low_count_mask(site, threshold_per_individual)

    Y = raw_wc.T  # (B, N)
    constant = np.ptp(Y, axis=1) == 0
    if np.any(constant & ~mask):
        log.warning("%s: masking %d constant coefficient(s)", site.site_id,
                    int(np.sum(constant & ~mask)))
    mask = mask | constant

    z = np.full(Y.shape, np.nan)
    keep = ~mask
    if np.any(keep):
        q = _blom(Y[keep])
        Q, _ = np.linalg.qr(X)
        resid = q - (q @ Q) @ Q.T
        # residuals can only be constant if q lies in span(X)
        flat = np.ptp(resid, axis=1) <= 1e-12 * np.abs(resid).max(axis=1, initial=1.0)
        if np.any(flat):
            log.warning("%s: masking %d coefficient(s) explained by covariates",
                        site.site_id, int(flat.sum()))
            idx = np.flatnonzero(keep)
            mask[idx[flat]] = True
            resid = resid[~flat]
            keep = ~mask
        z[keep] = _blom(resid)
    return TransformedSite(z=z, mask=mask, raw_wc=raw_wc, site_id=site.site_id)
