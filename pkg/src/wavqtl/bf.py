"""Limiting Bayes factors for a single coefficient vs one genotype.

Model: z_i = mu + beta * g_i + e_i, e_i ~ N(0, sigma^2), with
beta | sigma^2 ~ N(0, sigma_beta^2 sigma^2) and the limiting (flat) priors on
mu and sigma^2.  Integrating mu out under its flat prior is equivalent to
centering z and g, which gives the closed form used here::

    log BF = -1/2 log(1 + sigma_beta^2 Sgg)
             - N/2 log(1 - Sgz^2 / ((Sgg + sigma_beta^-2) Szz))

with Szz, Sgg, Sgz the centered sums of squares and cross products.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ._errors import InvalidInputError, NumericalDegeneracyError

log = logging.getLogger(__name__)

DEFAULT_GRID = (0.05, 0.1, 0.2, 0.4)


@dataclass
class Genotype:
    """Dosages (0..2 copies of the minor allele) for one variant."""

    id: str
    dosages: np.ndarray
    position: int = 0
    chromosome: str = ""

    def __post_init__(self):
        self.dosages = np.asarray(self.dosages, dtype=float)
        if self.dosages.ndim != 1:
            raise InvalidInputError(f"{self.id}: dosages must be 1-D")
        if not np.all(np.isfinite(self.dosages)):
            raise InvalidInputError(f"{self.id}: non-finite dosage")
        if np.any((self.dosages < 0) | (self.dosages > 2)):
            raise InvalidInputError(f"{self.id}: dosages must lie in [0, 2]")

    @property
    def is_constant(self):
        return np.ptp(self.dosages) == 0


def _check_grid(grid):
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.size == 0 or np.any(~(grid > 0)):
        raise InvalidInputError("effect prior grid must be nonempty and strictly positive")
    return grid


def _dosages(g):
    return g.dosages if isinstance(g, Genotype) else np.asarray(g, dtype=float)


def log_bf_from_stats(Szz, Sgz, Sgg, n, sigma_beta):
    """Vectorized limiting log BF from centered sufficient statistics.

    Arguments broadcast against each other; ``sigma_beta`` may carry an extra
    trailing grid axis supplied by the caller.
    """
    Szz = np.asarray(Szz, dtype=float)
    Sgg = np.asarray(Sgg, dtype=float)
    sb2 = np.asarray(sigma_beta, dtype=float) ** 2
    shrink = Sgg + 1.0 / sb2
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = Sgz ** 2 / (shrink * Szz)
    # 1 - frac = M1 / M0
    return -0.5 * np.log1p(sb2 * Sgg) - 0.5 * n * np.log1p(-frac)


def _centered_stats(z, g):
    z = np.asarray(z, dtype=float)
    g = _dosages(g)
    if z.shape != g.shape or z.ndim != 1:
        raise InvalidInputError(f"z and g must be 1-D of equal length, got {z.shape} and {g.shape}")
    n = z.size
    if n < 3:
        raise InvalidInputError(f"need at least 3 individuals, got {n}")
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("z contains non-finite values")
    zc = z - z.mean()
    gc = g - g.mean()
    return zc @ zc, zc @ gc, gc @ gc, n


def single_log_bf(z, g, sigma_beta):
    """Natural log of :func:`single_bf`."""
    if not sigma_beta > 0:
        raise InvalidInputError(f"sigma_beta must be positive, got {sigma_beta}")
    Szz, Sgz, Sgg, n = _centered_stats(z, g)
    if Sgg == 0:
        return 0.0
    if not Szz > 0:
        raise NumericalDegeneracyError("null residual sum of squares is not positive")
    M_ratio = 1.0 - Sgz ** 2 / ((Sgg + sigma_beta ** -2) * Szz)
    if not M_ratio > 0:
        raise NumericalDegeneracyError("alternative residual sum of squares is not positive")
    return float(log_bf_from_stats(Szz, Sgz, Sgg, n, sigma_beta))


def single_bf(z, g, sigma_beta):
    """Limiting Bayes factor for association of z with g at one prior scale.

    Parameters
    ----------
    z : array_like, shape (N,)
        Normalized coefficient values across individuals.
    g : Genotype or array_like, shape (N,)
    sigma_beta : float
        Prior standard deviation of the effect, in units of the residual sd.

    Returns
    -------
    float
        ``sqrt(N det(Omega)/sigma_beta^2) * (M0/M1)**(N/2)``.  Exactly 1.0 for
        a constant genotype.
    """
    return float(np.exp(single_log_bf(z, g, sigma_beta)))


def averaged_log_bf(z, g, grid=DEFAULT_GRID):
    grid = _check_grid(grid)
    terms = [single_log_bf(z, g, sb) for sb in grid]
    if all(t == 0.0 for t in terms):
        return 0.0
    return float(logsumexp(terms) - np.log(grid.size))


def averaged_bf(z, g, grid=DEFAULT_GRID):
    """Bayes factor averaged uniformly over the ``sigma_beta`` grid."""
    return float(np.exp(averaged_log_bf(z, g, grid)))


def log_bf_grid_batch(Z, G, grid=DEFAULT_GRID):
    """Per-grid-value log BFs for many coefficients against many genotype vectors.

    Parameters
    ----------
    Z : ndarray, shape (U, N)
        Coefficient rows (finite).
    G : ndarray, shape (K, N)
        Genotype rows; constant rows give log BF 0.

    Returns
    -------
    ndarray, shape (K, U, len(grid))
    """
    grid = _check_grid(grid)
    Z = np.asarray(Z, dtype=float)
    G = np.asarray(G, dtype=float)
    n = Z.shape[1]
    Zc = Z - Z.mean(axis=1, keepdims=True)
    Gc = G - G.mean(axis=1, keepdims=True)
    Szz = np.einsum("ij,ij->i", Zc, Zc)
    Sgg = np.einsum("ij,ij->i", Gc, Gc)
    Sgz = Gc @ Zc.T  # (K, U)
    out = log_bf_from_stats(Szz[None, :, None], Sgz[:, :, None], Sgg[:, None, None], n, grid)
    out[Sgg == 0] = 0.0
    return out


def log_bf_batch(Z, G, grid=DEFAULT_GRID):
    """Grid-averaged log BFs, shape (K, U).  See :func:`log_bf_grid_batch`."""
    lg = log_bf_grid_batch(Z, G, grid)
    return logsumexp(lg, axis=-1) - np.log(lg.shape[-1])


def site_log_bfs(site, g, grid=DEFAULT_GRID):
    """Grid-averaged log BF for every coefficient of a prepared site.

    Masked coefficients get log BF 0 (BF = 1).  Coefficients whose BF is not
    finite are also set to 0 with a warning.
    """
    g = _dosages(g)
    if g.shape != (site.n,):
        raise InvalidInputError(f"genotype has {g.shape} entries, site has {site.n} individuals")
    out = np.zeros(site.B)
    keep = ~site.mask
    if np.any(keep):
        vals = log_bf_batch(site.z[keep], g[None, :], grid)[0]
        bad = ~np.isfinite(vals)
        if np.any(bad):
            log.warning("%s: %d coefficient(s) numerically degenerate, BF set to 1",
                        site.site_id, int(bad.sum()))
            vals[bad] = 0.0
        out[keep] = vals
    return out


def site_bfs(site, g, grid=DEFAULT_GRID):
    """BF per coefficient in flat order (masked -> exactly 1)."""
    return np.exp(site_log_bfs(site, g, grid))
