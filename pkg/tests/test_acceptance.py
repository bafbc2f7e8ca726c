"""End-to-end acceptance checks, one test per criterion."""

import time

import numpy as np
import pytest
from scipy import stats

from oracles import golden_max, haar_matrix_kron, log_bf_quadrature
from power import power
from wavqtl import bf, cli, effects, hiermodel, preprocess, scan, simulate, wavelet
from wavqtl.bf import Genotype

pytestmark = pytest.mark.slow


def test_1_wavelet_round_trip(criterion):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst_rt = worst_orth = worst_kron = 0.0
    for J in range(1, 11):
        B = 2 ** J
        X = rng.normal(size=(100, B))
        worst_rt = max(worst_rt, np.abs(wavelet.idwt(wavelet.dwt(X)) - X).max())
        W = wavelet.dwt_matrix(J)
        worst_orth = max(worst_orth, np.abs(W @ W.T - np.eye(B)).max())
        if J <= 8:
            worst_kron = max(worst_kron, np.abs(W - haar_matrix_kron(J)).max())
    elapsed = time.perf_counter() - t0
    ok = worst_rt < 1e-10 and worst_orth < 1e-12 and worst_kron < 1e-12 and elapsed < 5
    criterion(1, ok, f"round trip {worst_rt:.1e}, |WW'-I| {worst_orth:.1e}, {elapsed:.2f}s")
    assert ok


def test_2_bayes_factor_oracle(criterion):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(50):
        n = (10, 20, 50)[i % 3]
        sb = float(rng.choice(bf.DEFAULT_GRID + (0.8,)))
        g = rng.binomial(2, rng.uniform(0.15, 0.5), size=n).astype(float)
        while np.ptp(g) == 0:
            g = rng.binomial(2, 0.4, size=n).astype(float)
        z = rng.normal(size=n) + rng.normal(0, 0.4) * g
        exact = bf.single_log_bf(z, g, sb)
        ref = log_bf_quadrature(z, g, sb)
        worst = max(worst, abs(exact - ref) / max(abs(ref), 1e-300))
    const = [bf.averaged_bf(rng.normal(size=n), np.full(n, c)) for n in (10, 20, 50) for c in (0, 1, 2)]
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-3 and all(c == 1.0 for c in const) and elapsed < 120
    criterion(2, ok, f"max rel err {worst:.1e}, constant g BF = 1: {all(c == 1.0 for c in const)}, "
                     f"{elapsed:.1f}s")
    assert ok


def test_3_em_correctness(criterion):
    rng = np.random.default_rng(3)
    worst_step = 0.0
    worst_pi = 0.0
    for _ in range(1000):
        S = int(rng.integers(1, 6))
        scales = np.repeat(np.arange(S), rng.integers(1, 30, size=S))
        lbf = rng.normal(rng.normal(-0.3, 1.0), rng.uniform(0.2, 2.5), size=scales.size)
        fit = hiermodel.em_fit(lbf, scales, S, tol=1e-15, max_iter=1_000_000, trace=True)
        worst_step = min(worst_step, np.diff(fit.loglik_trace).min(initial=0.0))
        for s in range(S):
            b = np.exp(lbf[scales == s])
            best = golden_max(lambda p: np.sum(np.log(p * b + 1 - p)), tol=1e-12)
            worst_pi = max(worst_pi, abs(fit.pi_hat[s] - best))
    fx = hiermodel.em_fit(np.log([4.0, 0.25]), [0, 0], 1)
    lam = float(np.exp(fx.log_lambda_hat))
    fixture_ok = abs(fx.pi_hat[0] - 0.5) <= 1e-12 and abs(lam - 1.5625) <= 1e-12
    ok = worst_step >= -1e-12 and worst_pi <= 1e-6 and fixture_ok
    criterion(3, ok, f"min loglik step {worst_step:.1e}, max |pi - golden| {worst_pi:.1e}, "
                     f"fixture pi={fx.pi_hat[0]!r} Lambda={lam!r}")
    assert ok


def test_4_null_calibration(criterion):
    cfg = scan.ScanConfig(n_permutations=200, seed=4, adaptive_stop_exceedances=None)
    base = simulate.Scenario(kind="null", n=70, B=1024, depth=2000, site_id="null")
    p = []
    for sc in simulate.replicate_scenarios(base, 500, seed=44):
        sim = simulate.simulate_site(sc)
        p.append(scan.permutation_pvalue(preprocess.prepare_site(sim.site), [sim.genotype], cfg).p_value)
    p = np.array(p)
    # one-sided distance: super-uniformity only forbids excess small p-values
    grid = np.arange(1, 202) / 201
    ks = np.max(np.mean(p[:, None] <= grid[None, :], axis=0) - grid)
    ks_two = stats.kstest(p, "uniform").statistic
    rate = np.mean(p <= 0.05)
    ok = ks < 0.1 and ks_two < 0.1 and 0.023 <= rate <= 0.086
    criterion(4, ok, f"KS {ks_two:.3f} (excess {ks:.3f}), type-I at 0.05 = {rate:.3f}")
    assert ok


def test_5_directional_power(criterion):
    res = {kind: power(simulate.Scenario(kind=kind, depth=20), n_rep=100)
           for kind in ("narrow_strong", "broad_modest", "opposite_pair")}
    ns, bm, op = res["narrow_strong"], res["broad_modest"], res["opposite_pair"]
    ok = (ns["wavelet"] > ns["nonoverlap"] and bm["wavelet"] > bm["nonoverlap"]
          and op["nonoverlap"] < op["shifted"] < op["wavelet"])
    criterion(5, ok, "rejections/100 (wavelet, nonoverlap, shifted): "
              + "; ".join(f"{k} {v['wavelet']},{v['nonoverlap']},{v['shifted']}" for k, v in res.items()))
    assert ok


def test_6_effect_sampling_oracle(criterion, associated_site):
    sim, ts = associated_site
    g = sim.genotype.dosages
    fit = hiermodel.em_fit(np.log(bf.site_bfs(ts, g)), ts.scales, ts.n_scales)
    post = effects.mixture_posterior(ts, g, fit)
    mean, var = effects.effect_in_data_space(post)
    n, chunk = 100_000, 10_000
    s1 = np.zeros(ts.B)
    s2 = np.zeros(ts.B)
    s4 = np.zeros(ts.B)
    for k in range(n // chunk):
        d = effects.sample_effect(post, chunk, seed=[6, k]) - mean
        s1 += d.sum(axis=0)
        s2 += (d ** 2).sum(axis=0)
        s4 += (d ** 4).sum(axis=0)
    # moments about the closed-form mean
    emp_mean = mean + s1 / n
    m2 = s2 / n
    emp_var = m2 - (s1 / n) ** 2
    se_mean = np.sqrt(var / n)
    se_var = np.sqrt(np.maximum(s4 / n - m2 ** 2, 0) / n)
    z_mean = np.abs(emp_mean - mean) / se_mean
    z_var = np.abs(emp_var - var) / se_var
    ok = bool(np.all(z_mean <= 4) and np.all(z_var <= 4))
    criterion(6, ok, f"max |z| mean {z_mean.max():.2f}, variance {z_var.max():.2f} over {ts.B} bases")
    assert ok


def test_7_low_count_filter(criterion):
    rng = np.random.default_rng(7)
    n, B = 70, 16
    counts = rng.poisson(50, size=(n, B))
    counts[:, 0:2] = 0
    # 139 reads over bases 1-2: the finest coefficient there has support total 139 < 2 * 70
    idx = rng.choice(n * 2, size=139, replace=True)
    flat = np.zeros(n * 2, dtype=int)
    np.add.at(flat, idx, 1)
    counts[:, 0:2] = flat.reshape(n, 2)
    # 140 reads over bases 3-4: exactly at the threshold, kept
    flat = np.zeros(n * 2, dtype=int)
    np.add.at(flat, rng.choice(n * 2, size=140, replace=True), 1)
    counts[:, 2:4] = flat.reshape(n, 2)
    site = preprocess.SiteData(counts, np.ones(n))
    ts = preprocess.prepare_site(site)
    k139 = wavelet.coeff_index(4, 1, B)
    k140 = wavelet.coeff_index(4, 2, B)
    g = rng.binomial(2, 0.4, size=n).astype(float)
    bfs = bf.site_bfs(ts, g)
    full = hiermodel.em_fit(np.log(bfs), ts.scales, ts.n_scales, tol=1e-14, max_iter=200_000)
    keep = ~ts.mask
    kept_scales = ts.scales[keep]
    reduced = hiermodel.em_fit(np.log(bfs[keep]), kept_scales, ts.n_scales, tol=1e-14, max_iter=200_000)
    _, ll_full = hiermodel.max_loglik_batch(np.log(bfs)[None], ts.scales, ts.n_scales)
    stat = scan.WaveletStatistic(ts)(g[None])[0]
    ok = (counts[:, 0:2].sum() == 139 and ts.mask[k139] and not ts.mask[k140] and bfs[k139] == 1.0
          and abs(full.log_lambda_hat - reduced.log_lambda_hat) < 1e-10
          and abs(ll_full[0] - stat) < 1e-12)
    criterion(7, ok, f"support 139 masked={ts.mask[k139]}, BF={bfs[k139]!r}, support 140 masked="
                     f"{ts.mask[k140]}, |dLambda| {abs(full.log_lambda_hat - reduced.log_lambda_hat):.1e}")
    assert ok


def test_8_thread_determinism(criterion, tmp_path):
    b = tmp_path / "bundle"
    assert cli.main(["simulate", "--kind", "broad_modest", "--n-sites", "12", "--n", "40",
                     "--depth", "200", "--seed", "8", "--out", str(b)]) == 0
    outs = []
    for threads in (1, 8):
        out = tmp_path / f"t{threads}.tsv"
        assert cli.main(["scan", "--bundle", str(b), "--permutations", "200", "--seed", "8",
                         "--threads", str(threads), "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    ok = outs[0] == outs[1]
    criterion(8, ok, f"threads 1 vs 8 identical: {ok} ({len(outs[0])} bytes)")
    assert ok
