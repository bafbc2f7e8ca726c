"""
Wavelets against fixed windows
==============================

At low read depth a ten-base effect is diluted inside a 100bp window,
while the wavelet model can pick it up at a fine scale.  An effect that
raises one half of a region and lowers the other cancels out in a window
that straddles both halves.
"""

from wavqtl import baseline, preprocess, scan, simulate

N_REP = 30
ALPHA = 0.01
cfg = scan.ScanConfig(n_permutations=199, seed=1, adaptive_stop_exceedances=3)

for kind in ("narrow_strong", "broad_modest", "opposite_pair"):
    hits = {"wavelet": 0, "nonoverlap": 0, "shifted": 0}
    for sc in simulate.replicate_scenarios(simulate.Scenario(kind=kind, depth=20), N_REP, seed=7):
        sim = simulate.simulate_site(sc)
        ts = preprocess.prepare_site(sim.site)
        hits["wavelet"] += scan.permutation_pvalue(ts, [sim.genotype], cfg).p_value <= ALPHA
        for mode in ("nonoverlap", "shifted"):
            res = baseline.min_p_scan(sim.site, None, [sim.genotype], mode, cfg)
            hits[mode] += res.p_value <= ALPHA
    print(f"{kind:14s}", "  ".join(f"{k} {v}/{N_REP}" for k, v in hits.items()))
