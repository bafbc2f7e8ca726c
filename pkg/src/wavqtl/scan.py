"""Multi-variant site testing: max statistic, permutation p-values, q-values."""

import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np

from . import bf as bfmod
from . import hiermodel
from ._errors import InvalidInputError, NoTestableVariantError

log = logging.getLogger(__name__)

PERM_CHUNK = 250
# relative slack when comparing permuted to observed statistics; both come from
# the same code path but batch shapes differ, so allow for last-bit noise
TIE_RTOL = 1e-10


@dataclass
class ScanConfig:
    cis_window: int = 2000
    n_permutations: int = 10000
    seed: int = 0
    adaptive_stop_exceedances: int | None = 100
    grid: tuple = bfmod.DEFAULT_GRID

    def __post_init__(self):
        if self.n_permutations < 1:
            raise InvalidInputError("n_permutations must be >= 1")
        if self.cis_window < 0:
            raise InvalidInputError("cis_window must be >= 0")
        if self.adaptive_stop_exceedances is not None and self.adaptive_stop_exceedances < 1:
            raise InvalidInputError("adaptive_stop_exceedances must be >= 1 or None")


@dataclass
class SiteResult:
    site_id: str
    statistic: float
    best_variant: str
    p_value: float
    n_perms_used: int
    n_exceed: int
    per_variant: dict = field(default_factory=dict)
    method: str = "wavelet"

    @property
    def log_lambda_max(self):
        return self.statistic

    @property
    def n_variants_tested(self):
        return len(self.per_variant)


# -- permutations ---------------------------------------------------------

def site_seed_sequence(seed, site_id):
    """Seed sequence for one site, derived from the global seed and the site id."""
    digest = hashlib.sha256(str(site_id).encode()).digest()
    words = np.frombuffer(digest[:16], dtype="<u4").tolist()
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *words])


def permutation_chunks(seed_seq, n, n_perm, chunk=PERM_CHUNK):
    """Yield (start, perms) with perms of shape (R, n); chunk k uses its own child stream."""
    n_chunks = -(-n_perm // chunk)
    for k, child in enumerate(seed_seq.spawn(n_chunks)):
        start = k * chunk
        R = min(chunk, n_perm - start)
        rng = np.random.default_rng(child)
        yield start, rng.permuted(np.tile(np.arange(n), (R, 1)), axis=1)


def permutation_test(stat_fn, G, n_perm, seed_seq, adaptive_stop=None, chunk=PERM_CHUNK):
    """Permutation calibration of a max-over-variants statistic.

    Parameters
    ----------
    stat_fn : callable
        Maps an array of genotype rows (K, N) to K statistics; larger is more
        extreme.
    G : ndarray, shape (P, N)
    n_perm : int
        Number of replicates M.  Replicate j applies one permutation of the
        individuals to every variant.
    adaptive_stop : int, optional
        Stop once this many replicates reach the observed maximum.

    Returns
    -------
    observed : (P,) per-variant statistics
    n_exceed : int
    n_used : int
    """
    G = np.asarray(G, dtype=float)
    P, n = G.shape
    observed = np.asarray(stat_fn(G), dtype=float)
    obs_max = observed.max()
    thresh = obs_max - TIE_RTOL * max(1.0, abs(obs_max))
    n_exceed = 0
    n_used = 0
    for start, perms in permutation_chunks(seed_seq, n, n_perm, chunk):
        R = perms.shape[0]
        Gp = G[:, perms]  # (P, R, N)
        stats = np.asarray(stat_fn(Gp.transpose(1, 0, 2).reshape(R * P, n)), dtype=float)
        hits = stats.reshape(R, P).max(axis=1) >= thresh
        if adaptive_stop is not None and n_exceed + hits.sum() >= adaptive_stop:
            cum = n_exceed + np.cumsum(hits)
            stop = int(np.argmax(cum >= adaptive_stop))
            return observed, int(cum[stop]), start + stop + 1
        n_exceed += int(hits.sum())
        n_used = start + R
    return observed, n_exceed, n_used


def pick_best(variants, stats):
    """Index of the max statistic; near-ties go to lowest position, then id."""
    stats = np.asarray(stats, dtype=float)
    top = stats.max()
    cand = np.flatnonzero(stats >= top - TIE_RTOL * max(1.0, abs(top)))
    return min(cand, key=lambda i: (variants[i].position, variants[i].id))


def testable_variants(variants, n, site_id=""):
    out = []
    for v in variants:
        if v.dosages.shape != (n,):
            raise InvalidInputError(f"{v.id}: {v.dosages.size} dosages, site has {n} individuals")
        if v.is_constant:
            log.warning("%s: skipping constant variant %s", site_id, v.id)
            continue
        out.append(v)
    if not out:
        raise NoTestableVariantError(f"{site_id}: no testable variant")
    return out


# -- wavelet statistic ----------------------------------------------------

class WaveletStatistic:
    """log Lambda-hat for genotype rows against one prepared site.

    Masked coefficients are dropped: a BF of exactly 1 leaves both the
    likelihood and its maximizer unchanged.  The per-scale maximization uses
    the exact concave solver rather than EM iterations (same maximum, and
    EM needs thousands of steps when pi-hat sits near 0, which is the usual
    case under permutation).
    """

    def __init__(self, site, grid=bfmod.DEFAULT_GRID):
        self.Z, self.scales = site.unmasked()
        self.n_scales = site.n_scales
        self.grid = grid

    def __call__(self, G):
        G = np.atleast_2d(G)
        if self.Z.shape[0] == 0:
            return np.zeros(G.shape[0])
        lbf = bfmod.log_bf_batch(self.Z, G, self.grid)
        lbf[~np.isfinite(lbf)] = 0.0
        _, loglik = hiermodel.max_loglik_batch(lbf, self.scales, self.n_scales)
        return loglik


def lambda_max(site, variants, grid=bfmod.DEFAULT_GRID):
    """Max over variants of log Lambda-hat.

    Returns
    -------
    (log_lambda_max, best_variant_id, {variant_id: log_lambda_hat})
    """
    vs = sorted(testable_variants(variants, site.n, site.site_id), key=lambda v: (v.position, v.id))
    stat = WaveletStatistic(site, grid)
    vals = stat(np.stack([v.dosages for v in vs]))
    best = pick_best(vs, vals)
    return float(vals[best]), vs[best].id, {v.id: float(x) for v, x in zip(vs, vals)}


def run_permutation_scan(site_id, n, variants, stat_fn, config, method):
    """Shared driver for the wavelet and window scans."""
    vs = sorted(testable_variants(variants, n, site_id), key=lambda v: (v.position, v.id))
    G = np.stack([v.dosages for v in vs])
    seq = site_seed_sequence(config.seed, site_id)
    observed, k, m = permutation_test(stat_fn, G, config.n_permutations, seq,
                                      config.adaptive_stop_exceedances)
    best = pick_best(vs, observed)
    return SiteResult(
        site_id=site_id,
        statistic=float(observed[best]),
        best_variant=vs[best].id,
        p_value=(k + 1) / (m + 1),
        n_perms_used=m,
        n_exceed=k,
        per_variant={v.id: float(x) for v, x in zip(vs, observed)},
        method=method,
    )


def permutation_pvalue(site, variants, config=None):
    """Permutation p-value of log Lambda-hat_max for one prepared site.

    p = (#{j : stat_j >= stat_obs} + 1) / (M + 1), with M the number of
    replicates actually run (fewer than requested under adaptive stopping).
    """
    config = config or ScanConfig()
    stat = WaveletStatistic(site, config.grid)
    return run_permutation_scan(site.site_id, site.n, variants, stat, config, "wavelet")


# -- FDR ------------------------------------------------------------------

def storey_pi0(p, lam=0.5):
    p = np.asarray(p, dtype=float)
    return min(1.0, np.sum(p > lam) / ((1.0 - lam) * p.size))


def estimate_fdr(p_values, lam=0.5, pi0=None):
    """Storey q-values.

    Parameters
    ----------
    p_values : array_like
        Values in (0, 1].
    lam : float
        Tuning point for the null-proportion estimate.
    pi0 : float, optional
        Fix the null proportion instead of estimating it; ``pi0=1`` gives
        Benjamini-Hochberg adjusted p-values.
    """
    p = np.asarray(p_values, dtype=float)
    if p.size == 0:
        raise InvalidInputError("no p-values given")
    if np.any(~(p > 0) | (p > 1)):
        raise InvalidInputError("p-values must lie in (0, 1]")
    if pi0 is None:
        pi0 = storey_pi0(p, lam)
        if pi0 == 0:
            log.warning("no p-values above lambda=%g; using pi0 = 1", lam)
            pi0 = 1.0
    n = p.size
    order = np.argsort(p, kind="stable")
    ps = p[order]
    # rank with ties sharing the largest rank
    rank = np.searchsorted(ps, ps, side="right")
    q_sorted = pi0 * n * ps / rank
    q_sorted = np.minimum.accumulate(q_sorted[::-1])[::-1]
    q = np.empty(n)
    q[order] = np.minimum(q_sorted, 1.0)
    return q
