"""Synthetic sites with known genotype effects, for calibration and power checks."""

from dataclasses import dataclass, field, replace

import numpy as np

from ._errors import InvalidInputError
from .bf import Genotype
from .preprocess import SiteData

KINDS = ("null", "narrow_strong", "broad_modest", "opposite_pair")

# (regions, multiplier) per kind for B = 1024; regions are 1-based inclusive.
# opposite_pair: first region is multiplied, second divided.  The pair is
# placed so a 50bp-shifted window holds each half whole while every
# non-overlapping window sees at most half of one side.
_DEFAULTS = {
    "null": ((), 1.0),
    "narrow_strong": (((455, 464),), 3.0),
    "broad_modest": (((376, 625),), 1.3),
    "opposite_pair": (((376, 450), (451, 525)), 1.5),
}


@dataclass
class Scenario:
    kind: str = "null"
    n: int = 70
    B: int = 1024
    maf: float = 0.3
    depth: float = 2000.0
    effect_multiplier: float | None = None
    effect_regions: tuple | None = None
    seed: int = 0
    library_size: int = 1
    site_id: str = "sim"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown scenario kind {self.kind!r}")
        if not 0 < self.maf <= 0.5:
            raise InvalidInputError("maf must be in (0, 0.5]")
        if not self.depth > 0:
            raise InvalidInputError("depth must be positive")
        if self.B < 2 or self.B & (self.B - 1):
            raise InvalidInputError("B must be a power of 2")
        regions, mult = _DEFAULTS[self.kind]
        if self.effect_regions is None:
            if regions and self.B != 1024:
                # rescale the default placement to other region lengths
                f = self.B / 1024
                regions = tuple((max(1, round((lo - 1) * f) + 1), max(1, round(hi * f)))
                                for lo, hi in regions)
            self.effect_regions = regions
        if self.kind == "null":
            self.effect_regions = ()
        self.effect_regions = tuple(tuple(int(x) for x in r) for r in self.effect_regions)
        for lo, hi in self.effect_regions:
            if not 1 <= lo <= hi <= self.B:
                raise InvalidInputError(f"effect region {(lo, hi)} outside [1, {self.B}]")
        if self.kind == "opposite_pair" and len(self.effect_regions) != 2:
            raise InvalidInputError("opposite_pair needs exactly two regions")
        if self.effect_multiplier is None:
            self.effect_multiplier = mult


@dataclass
class SimulatedSite:
    site: SiteData
    genotype: Genotype
    truth: Scenario
    intensity: np.ndarray = field(repr=False, default=None)


def baseline_intensity(B, depth):
    """Smooth unimodal bump over the region, summing to ``depth``."""
    b = np.arange(B) + 0.5
    lam = 0.25 + np.exp(-0.5 * ((b - B / 2) / (B / 6)) ** 2)
    return depth * lam / lam.sum()


def effect_profile(sc, g):
    """Per-individual multiplicative intensity factors, shape (N, B)."""
    fold = np.ones((g.size, sc.B))
    mult = float(sc.effect_multiplier)
    for k, (lo, hi) in enumerate(sc.effect_regions):
        sign = -1.0 if (sc.kind == "opposite_pair" and k == 1) else 1.0
        fold[:, lo - 1:hi] *= mult ** (sign * g)[:, None]
    return fold


def simulate_genotype(rng, n, maf):
    """Sum of two Bernoulli(maf) draws per individual; redrawn if constant."""
    while True:
        g = rng.binomial(1, maf, size=(n, 2)).sum(axis=1).astype(float)
        if np.ptp(g) > 0:
            return g


def simulate_site(sc):
    """Draw one site: genotype, Poisson counts with the scenario's effect."""
    rng = np.random.default_rng(sc.seed)
    g = simulate_genotype(rng, sc.n, sc.maf)
    lam = baseline_intensity(sc.B, sc.depth)[None, :] * effect_profile(sc, g)
    counts = rng.poisson(lam)
    site = SiteData(counts=counts, library_sizes=np.full(sc.n, sc.library_size),
                    site_id=sc.site_id)
    geno = Genotype(id=f"{sc.site_id}_v1", dosages=g, position=sc.B // 2)
    return SimulatedSite(site=site, genotype=geno, truth=sc, intensity=lam)


def replicate_scenarios(base, n_rep, seed):
    """``n_rep`` copies of ``base`` with independent derived seeds and ids."""
    seeds = np.random.SeedSequence(seed).generate_state(n_rep, dtype=np.uint64)
    return [replace(base, seed=int(s), site_id=f"{base.site_id}{i:04d}")
            for i, s in enumerate(seeds)]
