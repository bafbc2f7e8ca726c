"""Posterior effect sizes in wavelet space and their image over bases."""

from dataclasses import dataclass, replace

import numpy as np

from . import bf as bfmod
from . import wavelet
from ._errors import InvalidInputError


@dataclass
class SlabPosterior:
    """Three-parameter t: location ``a``, squared scale ``b``, ``nu`` dof."""

    a: float
    b: float
    nu: float

    @property
    def mean(self):
        return self.a

    @property
    def var(self):
        return self.b * self.nu / (self.nu - 2)


@dataclass
class EffectPosterior:
    """Per-coefficient mixture posteriors plus base-level summaries.

    Arrays indexed by coefficient have shape (B,) in flat scale order; the
    grid arrays ``a``, ``b`` and ``weights`` have shape (B, n_grid).
    """

    phi: np.ndarray
    a: np.ndarray
    b: np.ndarray
    nu: float
    weights: np.ndarray
    mean_beta: np.ndarray
    var_beta: np.ndarray
    mean_alpha: np.ndarray | None = None
    var_alpha: np.ndarray | None = None

    @property
    def B(self):
        return self.phi.shape[0]


def _slab_stats(Szz, Sgz, Sgg, n, sigma_beta):
    shrink = Sgg + sigma_beta ** -2.0
    a = Sgz / shrink
    m1 = Szz - Sgz ** 2 / shrink
    b = m1 / (shrink * n)
    return a, b


def slab_posterior(z, g, sigma_beta):
    """Posterior on the effect given that the coefficient is associated.

    Parameters
    ----------
    z : array_like, shape (N,)
    g : Genotype or array_like, shape (N,)
    sigma_beta : float

    Returns
    -------
    SlabPosterior
        ``a = B2``, ``b = Omega22 * (z'z - B' Omega^-1 B) / N``, ``nu = N``
        in the flat-prior limit.
    """
    z = np.asarray(z, dtype=float)
    if z.size <= 2:
        raise InvalidInputError(f"need more than 2 individuals, got {z.size}")
    Szz, Sgz, Sgg, n = bfmod._centered_stats(z, g)
    a, b = _slab_stats(Szz, Sgz, Sgg, n, float(sigma_beta))
    return SlabPosterior(a=float(a), b=float(b), nu=float(n))


def mixture_posterior(site, g, fit, grid=bfmod.DEFAULT_GRID):
    """Spike-and-slab posterior on every coefficient's effect.

    The slab mixes the per-grid t posteriors with weights proportional to
    each grid value's BF.  ``phi`` comes from the grid-averaged BF and the
    fitted per-scale proportions; masked coefficients get ``phi = 0``.
    """
    grid = bfmod._check_grid(grid)
    g = bfmod._dosages(g)
    B, n = site.B, site.n
    if n <= 2:
        raise InvalidInputError("need more than 2 individuals")
    keep = ~site.mask
    a = np.zeros((B, grid.size))
    b = np.zeros((B, grid.size))
    weights = np.full((B, grid.size), 1.0 / grid.size)
    phi = np.zeros(B)
    if np.any(keep) and np.ptp(g) > 0:
        Z = site.z[keep]
        Zc = Z - Z.mean(axis=1, keepdims=True)
        gc = g - g.mean()
        Szz = np.einsum("ij,ij->i", Zc, Zc)
        Sgz = Zc @ gc
        Sgg = gc @ gc
        a_k, b_k = _slab_stats(Szz[:, None], Sgz[:, None], Sgg, n, grid[None, :])
        lbf_k = bfmod.log_bf_from_stats(Szz[:, None], Sgz[:, None], Sgg, n, grid[None, :])
        w = np.exp(lbf_k - lbf_k.max(axis=1, keepdims=True))
        w /= w.sum(axis=1, keepdims=True)
        lbf = np.log(np.mean(np.exp(lbf_k - lbf_k.max(axis=1, keepdims=True)), axis=1)) \
            + lbf_k.max(axis=1)
        pi = np.asarray(fit.pi_hat)[site.scales[keep]]
        with np.errstate(divide="ignore"):
            num = np.log(pi) + lbf
            den = np.logaddexp(num, np.log1p(-pi))
        phi[keep] = np.exp(num - den)
        a[keep], b[keep], weights[keep] = a_k, b_k, w
    elif np.any(keep):
        # constant genotype: every slab sits at zero with the null residual scale
        Z = site.z[keep]
        Zc = Z - Z.mean(axis=1, keepdims=True)
        b[keep] = (np.einsum("ij,ij->i", Zc, Zc)[:, None] * grid[None, :] ** 2) / n
        pi = np.asarray(fit.pi_hat)[site.scales[keep]]
        phi[keep] = pi
    nu = float(n)
    v = b * nu / (nu - 2)
    slab_mean = np.sum(weights * a, axis=1)
    slab_m2 = np.sum(weights * (v + a ** 2), axis=1)
    mean_beta = phi * slab_mean
    var_beta = np.maximum(phi * slab_m2 - mean_beta ** 2, 0.0)
    return EffectPosterior(phi=phi, a=a, b=b, nu=nu, weights=weights,
                           mean_beta=mean_beta, var_beta=var_beta)


def rescale_coefficients(posterior, scale):
    """Multiply each coefficient's effect by ``scale`` (e.g. the raw-WC sd).

    Used to report effects on an approximate raw-coefficient scale instead of
    the normal-score scale.  Base-level summaries are dropped.
    """
    scale = np.asarray(scale, dtype=float)
    if scale.shape != posterior.phi.shape:
        raise InvalidInputError("one scale factor per coefficient required")
    return replace(
        posterior,
        a=posterior.a * scale[:, None],
        b=posterior.b * scale[:, None] ** 2,
        mean_beta=posterior.mean_beta * scale,
        var_beta=posterior.var_beta * scale ** 2,
        mean_alpha=None,
        var_alpha=None,
    )


def effect_in_data_space(posterior, W=None):
    """Pointwise posterior mean and variance of the per-base effect.

    ``E(alpha_b) = sum w_{sl,b} E(beta_sl)``,
    ``Var(alpha_b) = sum w_{sl,b}^2 Var(beta_sl)``, treating coefficients as
    a posteriori independent.  Also stores the result on ``posterior``.
    """
    B = posterior.B
    if W is None:
        W = wavelet.dwt_matrix(wavelet.n_levels(B))
    W = np.asarray(W, dtype=float)
    if W.shape != (B, B):
        raise InvalidInputError(f"W has shape {W.shape}, posterior has {B} coefficients")
    mean = W.T @ posterior.mean_beta
    var = (W ** 2).T @ posterior.var_beta
    posterior.mean_alpha = mean
    posterior.var_alpha = var
    return mean, var


def sample_effect(posterior, n_samples, seed=None):
    """Draw per-base effect profiles from the posterior, shape (n_samples, B)."""
    rng = np.random.default_rng(seed)
    B, K = posterior.a.shape
    active = rng.random((n_samples, B)) < posterior.phi
    cum = np.cumsum(posterior.weights, axis=1)
    cum[:, -1] = 1.0
    u = rng.random((n_samples, B, 1))
    comp = np.minimum((u >= cum[None, :, :]).sum(axis=2), K - 1)
    cols = np.arange(B)[None, :]
    a = posterior.a[cols, comp]
    b = posterior.b[cols, comp]
    t = rng.standard_t(posterior.nu, size=(n_samples, B))
    beta = np.where(active, a + np.sqrt(b) * t, 0.0)
    return wavelet.idwt(beta)
