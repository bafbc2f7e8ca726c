"""Per-scale mixture proportions by EM and the resulting likelihood ratio.

Everything is carried in log-BF space so that very large Bayes factors do
not overflow.  The EM works on a batch of independent problems at once
(one row per genotype vector); each row stops at its own convergence point,
so a row's result does not depend on what else is in the batch.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import wavelet
from ._errors import InvalidInputError


@dataclass
class ScaleMixtureFit:
    pi_hat: np.ndarray
    log_lambda_hat: float
    phi: np.ndarray
    log_bfs: np.ndarray
    iterations: int
    converged: bool
    loglik_trace: list = field(default_factory=list, repr=False)

    @property
    def bfs(self):
        return np.exp(self.log_bfs)


def _scale_setup(log_bfs, scales, n_scales):
    log_bfs = np.asarray(log_bfs, dtype=float)
    if scales is None:
        scales = wavelet.coeff_scales(log_bfs.shape[-1])
    scales = np.asarray(scales, dtype=np.intp)
    if scales.shape != log_bfs.shape[-1:]:
        raise InvalidInputError("scales must label every coefficient")
    if n_scales is None:
        n_scales = int(scales.max()) + 1 if scales.size else 1
    if scales.size and (scales.min() < 0 or scales.max() >= n_scales):
        raise InvalidInputError("scale label out of range")
    return log_bfs, scales, n_scales


def _terms(log_pi, log_1mpi, log_bfs, scales):
    """Per-coefficient log(pi_s BF + 1 - pi_s) and phi; broadcast over leading axes."""
    a = log_pi[..., scales] + log_bfs
    b = log_1mpi[..., scales]
    with np.errstate(invalid="ignore"):
        return np.logaddexp(a, b), expit(a - b)


def _logs(pi):
    with np.errstate(divide="ignore"):
        return np.log(pi), np.log1p(-pi)


def log_lr(pi, log_bfs, scales=None, n_scales=None):
    """``sum_{s,l} log(pi_s BF_sl + 1 - pi_s)``.

    ``log_bfs`` is the natural log of the per-coefficient Bayes factors in
    flat order; ``scales`` labels each coefficient (defaults to the Haar
    layout for a full length-2**J vector).
    """
    log_bfs, scales, n_scales = _scale_setup(log_bfs, scales, n_scales)
    pi = np.asarray(pi, dtype=float)
    if pi.shape[-1] != n_scales:
        raise InvalidInputError(f"pi has {pi.shape[-1]} entries, expected {n_scales}")
    if np.any((pi < 0) | (pi > 1)) or np.any(np.isnan(pi)):
        raise InvalidInputError("mixture proportions must lie in [0, 1]")
    lt, _ = _terms(*_logs(pi), log_bfs, scales)
    return lt.sum(axis=-1)


def em_batch(log_bfs, scales, n_scales, tol=1e-8, max_iter=5000, pi0=0.5, trace=False, polish=True):
    """EM over a batch of independent problems.

    EM slows to a sublinear crawl when a scale's optimum sits on a flat
    ridge or near the boundary.  With ``polish`` the iterate is finally
    replaced by the exact per-scale maximizer of the same likelihood,
    accepted only where it does not lower the log-likelihood.

    Parameters
    ----------
    log_bfs : ndarray, shape (K, U)
        Log BFs; columns must be sorted by scale label.
    scales : ndarray, shape (U,)
        Nondecreasing scale labels in 0..n_scales-1.

    Returns
    -------
    pi : (K, n_scales), loglik : (K,), iterations : (K,), converged : (K,) bool
    and, if ``trace``, a list of per-iteration loglik arrays.
    """
    log_bfs = np.atleast_2d(np.asarray(log_bfs, dtype=float))
    scales = np.asarray(scales, dtype=np.intp)
    K, U = log_bfs.shape
    if U and np.any(np.diff(scales) < 0):
        raise InvalidInputError("coefficients must be sorted by scale")
    counts = np.bincount(scales, minlength=n_scales).astype(float)
    present = np.flatnonzero(counts)
    starts = np.searchsorted(scales, present)

    pi = np.full((K, n_scales), float(pi0))
    iters = np.zeros(K, dtype=np.intp)
    converged = np.zeros(K, dtype=bool)
    ll, phi = _terms(*_logs(pi), log_bfs, scales)
    loglik = ll.sum(axis=1)
    history = [loglik.copy()] if trace else None
    active = np.arange(K)

    for it in range(1, max_iter + 1):
        if active.size == 0 or present.size == 0:
            break
        # phi rows track the active set
        new_pi = pi[active]
        new_pi[:, present] = np.add.reduceat(phi, starts, axis=1) / counts[present]
        sub_bf = log_bfs if active.size == K else log_bfs[active]
        ll, phi_new = _terms(*_logs(new_pi), sub_bf, scales)
        new_ll = ll.sum(axis=1)
        gain = new_ll - loglik[active]
        pi[active] = new_pi
        loglik[active] = new_ll
        iters[active] = it
        if trace:
            history.append(loglik.copy())
        done = gain < tol
        converged[active[done]] = True
        active = active[~done]
        phi = phi_new[~done]
    if present.size == 0:
        converged[:] = True
    elif max_iter > 0:
        # pi_s = 0 is feasible: drop any scale whose contribution ended below zero
        ll, _ = _terms(*_logs(pi), log_bfs, scales)
        per_scale = np.add.reduceat(ll, starts, axis=1)
        neg = per_scale < 0
        if np.any(neg):
            rows, cols = np.nonzero(neg)
            pi[rows, present[cols]] = 0.0
            per_scale[neg] = 0.0
            loglik = per_scale.sum(axis=1)
        if polish:
            exact_pi, exact_ll = max_loglik_batch(log_bfs, scales, n_scales)
            better = exact_ll >= loglik
            # exactly flat scales keep the EM value (any pi is optimal there)
            flat = np.maximum.reduceat(np.abs(log_bfs), starts, axis=1) == 0
            take = better[:, None] & ~flat
            sub = pi[:, present]
            sub[take] = exact_pi[:, present][take]
            pi[:, present] = sub
            loglik = np.where(better, exact_ll, loglik)
            if trace:
                history.append(loglik.copy())
    return (pi, loglik, iters, converged, history) if trace else (pi, loglik, iters, converged)


def em_fit(log_bfs, scales=None, n_scales=None, tol=1e-8, max_iter=5000, trace=False):
    """Maximum-likelihood per-scale proportions for one BF vector.

    E-step ``phi = pi_s BF / (pi_s BF + 1 - pi_s)``; M-step ``pi_s = mean phi``
    over the coefficients at scale s.  Starts from ``pi_s = 0.5`` and stops
    when the log-likelihood gain drops below ``tol``.  Scales with no
    coefficients keep the starting value.

    Parameters
    ----------
    log_bfs : array_like, shape (U,)
        Natural-log Bayes factors.
    scales : array_like of int, optional
        Scale label per coefficient; defaults to the full Haar layout.
    n_scales : int, optional
        Number of proportions to fit (J + 1 for a full site).
    """
    log_bfs, scales, n_scales = _scale_setup(log_bfs, scales, n_scales)
    if log_bfs.ndim != 1:
        raise InvalidInputError("em_fit takes a single BF vector; use em_batch for batches")
    order = np.argsort(scales, kind="stable")
    res = em_batch(log_bfs[order][None, :], scales[order], n_scales, tol, max_iter, trace=trace)
    pi = res[0][0]
    _, phi = _terms(*_logs(pi), log_bfs, scales)
    fit = ScaleMixtureFit(
        pi_hat=pi,
        log_lambda_hat=float(res[1][0]),
        phi=phi,
        log_bfs=log_bfs,
        iterations=int(res[2][0]),
        converged=bool(res[3][0]),
    )
    if trace:
        fit.loglik_trace = [float(h[0]) for h in res[4]]
    return fit


def max_loglik_batch(log_bfs, scales, n_scales, xtol=1e-13, max_iter=100):
    """Exact per-scale maximizer of the mixture likelihood.

    Each scale's log-likelihood ``sum_l log(1 + pi (BF_l - 1))`` is concave in
    ``pi``, so the maximum is at 0, at 1, or at the root of its derivative.
    The root is found by Newton steps kept inside a bisection bracket.  Gives
    the same maximum EM converges to, in a handful of iterations.

    Same layout and return order as :func:`em_batch` (pi, loglik).
    """
    log_bfs = np.atleast_2d(np.asarray(log_bfs, dtype=float))
    scales = np.asarray(scales, dtype=np.intp)
    K, U = log_bfs.shape
    pi = np.full((K, n_scales), 0.5)
    if U == 0:
        return pi, np.zeros(K)
    if np.any(np.diff(scales) < 0):
        raise InvalidInputError("coefficients must be sorted by scale")
    counts = np.bincount(scales, minlength=n_scales)
    present = np.flatnonzero(counts)
    starts = np.searchsorted(scales, present)
    with np.errstate(divide="ignore", over="ignore"):
        c = 1.0 / np.expm1(log_bfs)  # slope term is 1 / (pi + c)

    def grad(p):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = 1.0 / (p[:, scales] + c)
        t[~np.isfinite(c)] = 0.0  # BF == 1 carries no information
        return np.add.reduceat(t, starts, axis=1), np.add.reduceat(t * t, starts, axis=1)

    # (K, n_present) problems
    g0, _ = grad(np.zeros((K, n_scales)))
    g1, _ = grad(np.ones((K, n_scales)))
    x = np.full((K, present.size), 0.5)
    x[g0 <= 0] = 0.0
    x[(g1 >= 0) & (g0 > 0)] = 1.0
    interior = (g0 > 0) & (g1 < 0)
    lo = np.zeros_like(x)
    hi = np.ones_like(x)
    full = np.zeros((K, n_scales))
    for _ in range(max_iter):
        if not interior.any():
            break
        full[:, present] = x
        d1, d2 = grad(full)
        up = interior & (d1 > 0)
        down = interior & (d1 < 0)
        lo[up] = x[up]
        hi[down] = x[down]
        with np.errstate(divide="ignore", invalid="ignore"):
            step = d1 / d2
        newton = x + step
        bad = ~((newton > lo) & (newton < hi))
        newton[bad] = 0.5 * (lo[bad] + hi[bad])
        moved = np.abs(newton - x)
        x = np.where(interior, newton, x)
        interior = interior & (moved > xtol) & (hi - lo > xtol)
    pi[:, present] = x
    ll, _ = _terms(*_logs(pi), log_bfs, scales)
    return pi, ll.sum(axis=1)
