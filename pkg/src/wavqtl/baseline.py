"""Fixed-window linear-regression association with min-p permutation calibration."""

import logging

import numpy as np
from scipy import stats

from . import preprocess
from .bf import _dosages
from ._errors import DegenerateInputError, InvalidInputError
from .scan import ScanConfig, run_permutation_scan

log = logging.getLogger(__name__)

STANDARD_B = 1024


def make_windows(B, mode="nonoverlap", window=None, step=None):
    """Window list as 1-based inclusive (start, end) pairs.

    ``nonoverlap``: nine 100bp windows and a final 124bp one (B must be 1024).
    ``shifted``: those ten plus nine 100bp windows shifted right by 50bp.
    ``generic``: windows of width ``window`` every ``step`` bases; a trailing
    partial window is merged into the previous one.
    """
    if mode in ("nonoverlap", "shifted"):
        if B != STANDARD_B:
            raise InvalidInputError(f"{mode} windows are defined for B={STANDARD_B}, got {B}")
        wins = [(100 * k + 1, 100 * k + 100) for k in range(9)] + [(901, 1024)]
        if mode == "shifted":
            wins += [(100 * k + 51, 100 * k + 150) for k in range(9)]
        return wins
    if mode != "generic":
        raise InvalidInputError(f"unknown window mode {mode!r}")
    if window is None or step is None or window < 1 or step < 1 or window > B:
        raise InvalidInputError("generic mode needs 1 <= window <= B and step >= 1")
    wins = []
    start = 1
    while start + window - 1 <= B:
        wins.append((start, start + window - 1))
        start += step
    if wins and wins[-1][1] < B and step == window:
        wins[-1] = (wins[-1][0], B)
    return wins


def window_phenotypes(site, C, windows):
    """Normalized, covariate-corrected window phenotypes, shape (N, n_windows).

    Columns with a constant phenotype are NaN.
    """
    d = preprocess.standardize(site)
    out = np.full((site.n, len(windows)), np.nan)
    for j, (lo, hi) in enumerate(windows):
        if not 1 <= lo <= hi <= site.B:
            raise InvalidInputError(f"window {(lo, hi)} outside [1, {site.B}]")
        ph = d[:, lo - 1:hi].sum(axis=1)
        try:
            q = preprocess.quantile_normalize(ph)
            r = preprocess.regress_out(q, C)
            out[:, j] = preprocess.quantile_normalize(r)
        except DegenerateInputError:
            log.warning("%s: constant phenotype in window %s, p set to 1", site.site_id, (lo, hi))
    return out


def _abs_t(Y, G):
    """|t| of the OLS slope for every (genotype row, phenotype column) pair.

    Y : (N, W) with NaN columns for untestable windows; G : (K, N).
    Returns (K, W); NaN columns give 0.
    """
    n = Y.shape[0]
    ok = np.all(np.isfinite(Y), axis=0)
    Yc = Y - Y.mean(axis=0)
    Yc[:, ~ok] = 0.0
    Gc = G - G.mean(axis=1, keepdims=True)
    syy = np.einsum("ij,ij->j", Yc, Yc)
    sgg = np.einsum("ij,ij->i", Gc, Gc)
    # column by column so a window's value never depends on which other windows are present
    sgy = np.column_stack([Gc @ Yc[:, j] for j in range(Yc.shape[1])])
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = sgy ** 2 / (sgg[:, None] * syy[None, :])
        r2 = np.clip(r2, 0.0, 1.0)
        t = np.sqrt((n - 2) * r2 / (1.0 - r2))
    t[~np.isfinite(t) & (r2 >= 1.0)] = np.inf
    t[:, ~ok] = 0.0
    t[sgg == 0] = 0.0
    return t


def t_to_p(t, n):
    return 2.0 * stats.t.sf(np.abs(t), n - 2)


def window_pvalue(site, C, g, window):
    """Two-sided OLS slope p-value for one window phenotype against one genotype."""
    g = _dosages(g)
    K = 0 if C is None else np.atleast_2d(np.asarray(C).T).shape[0]
    if site.n < K + 3:
        raise InvalidInputError(f"need at least {K + 3} individuals, got {site.n}")
    if np.ptp(g) == 0:
        raise DegenerateInputError("constant genotype")
    Y = window_phenotypes(site, C, [window])
    if not np.all(np.isfinite(Y)):
        return 1.0
    t = _abs_t(Y, g[None, :])[0, 0]
    return float(t_to_p(t, site.n))


class WindowStatistic:
    """max |t| over windows, per genotype row.  Monotone in -log(min p)."""

    def __init__(self, Y):
        self.Y = Y

    def __call__(self, G):
        return _abs_t(self.Y, np.atleast_2d(G)).max(axis=1)


def min_p_scan(site, C, variants, windows, config=None):
    """Permutation-calibrated min-p over windows x variants.

    The returned ``statistic`` is P_min; ``per_variant`` holds each
    variant's min p over windows.
    """
    config = config or ScanConfig()
    if isinstance(windows, str):
        windows = make_windows(site.B, windows)
    Y = window_phenotypes(site, C, windows)
    res = run_permutation_scan(site.site_id, site.n, variants, WindowStatistic(Y),
                               config, "window")
    res.statistic = float(t_to_p(res.statistic, site.n))
    res.per_variant = {k: float(t_to_p(v, site.n)) for k, v in res.per_variant.items()}
    return res
