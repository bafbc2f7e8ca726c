"""Command line entry point: ``wavqtl {simulate,scan,baseline,effects,fdr}``."""

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields

import numpy as np

from . import baseline, bf, effects, hiermodel, io, preprocess, scan, simulate
from ._errors import InvalidInputError, NoTestableVariantError, WavQTLError

log = logging.getLogger("wavqtl")

METHODS = ("wavelet", "window", "window-shifted")


# -- input assembly ---------------------------------------------------------

def _bundle_defaults(args):
    b = getattr(args, "bundle", None)
    if b:
        for attr, name in (("manifest", "manifest.tsv"), ("phenotype_dir", "phenotypes"),
                           ("library_sizes", "library_sizes.tsv"), ("genotypes", "genotypes.tsv")):
            if getattr(args, attr) is None:
                setattr(args, attr, os.path.join(b, name))
        cov = os.path.join(b, "covariates.tsv")
        if args.pc_file is None and os.path.exists(cov):
            args.pc_file = cov
    missing = [a for a in ("manifest", "phenotype_dir", "library_sizes", "genotypes")
               if getattr(args, a) is None]
    if missing:
        raise InvalidInputError("missing input(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))


def load_inputs(args):
    _bundle_defaults(args)
    ids, sizes = io.read_library_sizes(args.library_sizes)
    manifest = io.read_manifest(args.manifest)
    variants = io.read_genotypes(args.genotypes, n=len(ids))
    C = io.read_covariates(args.pc_file, ids) if args.pc_file else None
    if C is not None and C.shape[1] >= len(ids):
        raise InvalidInputError(f"{args.pc_file}: need fewer covariates than individuals")
    return ids, sizes, manifest, variants, C


def cis_variants(row, variants, cis_window):
    return [v for v in variants
            if v.chromosome == row.chromosome
            and row.start - cis_window <= v.position <= row.end + cis_window]


def load_site(args, row, sizes):
    path = io.phenotype_path(args.phenotype_dir, row.site_id)
    counts = io.read_phenotype(path, n=len(sizes))
    if counts.shape[1] != row.length:
        raise io.InputFileError(path, 0, f"{counts.shape[1]} bases but manifest region spans {row.length}")
    return preprocess.SiteData(counts=counts, library_sizes=sizes, site_id=row.site_id)


# -- scan -------------------------------------------------------------------

def _scan_one(job):
    site, C, variants, method, config = job
    try:
        if method == "wavelet":
            ts = preprocess.prepare_site(site, C)
            return scan.permutation_pvalue(ts, variants, config)
        mode = "nonoverlap" if method == "window" else "shifted"
        return baseline.min_p_scan(site, C, variants, mode, config)
    except NoTestableVariantError as e:
        log.warning("%s", e)
        return None


def _config(args):
    stop = args.adaptive_stop if args.adaptive_stop and args.adaptive_stop > 0 else None
    return scan.ScanConfig(cis_window=args.cis_window, n_permutations=args.permutations,
                           seed=args.seed, adaptive_stop_exceedances=stop)


def run_scan(args):
    """Test every manifest site; write one results row per site, in manifest order."""
    ids, sizes, manifest, variants, C = load_inputs(args)
    config = _config(args)
    jobs = [(load_site(args, row, sizes), C, cis_variants(row, variants, config.cis_window),
             args.method, config) for row in manifest]
    if args.threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(_scan_one, jobs))
    else:
        results = [_scan_one(j) for j in jobs]

    ok = [r for r in results if r is not None]
    q = scan.estimate_fdr([r.p_value for r in ok]) if ok else []
    qmap = {r.site_id: qq for r, qq in zip(ok, q)}
    stat_name = "log_lambda_max" if args.method == "wavelet" else "min_p"
    rows = []
    for row, r in zip(manifest, results):
        if r is None:
            r = scan.SiteResult(row.site_id, math.nan, "NA", math.nan, 0, 0, method=args.method)
        rows.append(r)
    io.write_results(args.out, rows, [qmap.get(r.site_id, math.nan) for r in rows], stat_name)
    return 0


# -- effects ----------------------------------------------------------------

def run_effects(args):
    """Posterior effect profile for one (site, variant) pair."""
    ids, sizes, manifest, variants, C = load_inputs(args)
    row = next((r for r in manifest if r.site_id == args.site), None)
    if row is None:
        raise InvalidInputError(f"unknown site id {args.site!r}")
    var = next((v for v in variants if v.id == args.variant), None)
    if var is None:
        raise InvalidInputError(f"unknown variant id {args.variant!r}")
    site = load_site(args, row, sizes)
    ts = preprocess.prepare_site(site, C)
    grid = bf.DEFAULT_GRID
    fit = hiermodel.em_fit(np.log(bf.site_bfs(ts, var, grid)), n_scales=ts.n_scales)
    post = effects.mixture_posterior(ts, var, fit, grid)
    if args.raw_scale:
        post = effects.rescale_coefficients(post, ts.raw_wc.std(axis=0, ddof=1))
    mean, var_a = effects.effect_in_data_space(post)
    io.write_effects(args.out, mean, np.sqrt(var_a))
    return 0


# -- simulate ---------------------------------------------------------------

_SCENARIO_FIELDS = {f.name for f in fields(simulate.Scenario)}


def run_simulate(args):
    """Write a synthetic input bundle that ``scan`` reads unchanged."""
    cfg = {}
    if args.config:
        with open(args.config) as fh:
            cfg = json.load(fh)
    n_sites = int(cfg.pop("n_sites", 1))
    for key in ("kind", "n", "maf", "depth"):
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
    if args.length is not None:
        cfg["B"] = args.length
    if args.multiplier is not None:
        cfg["effect_multiplier"] = args.multiplier
    if args.n_sites is not None:
        n_sites = args.n_sites
    unknown = set(cfg) - _SCENARIO_FIELDS
    if unknown:
        raise InvalidInputError(f"unknown scenario field(s): {', '.join(sorted(unknown))}")
    cfg.pop("seed", None)
    base = simulate.Scenario(**{**cfg, "site_id": cfg.get("site_id", "site")})
    scenarios = simulate.replicate_scenarios(base, n_sites, args.seed)

    out = args.out
    os.makedirs(os.path.join(out, "phenotypes"), exist_ok=True)
    ids = [f"ind{i + 1:03d}" for i in range(base.n)]
    manifest, geno = [], []
    for k, sc in enumerate(scenarios):
        sim = simulate.simulate_site(sc)
        start = 1 + k * 100_000
        manifest.append(io.ManifestRow(sc.site_id, "sim", start, start + sc.B - 1))
        v = sim.genotype
        v.chromosome = "sim"
        v.position = start + sc.B // 2
        geno.append(v)
        io.write_phenotype(io.phenotype_path(os.path.join(out, "phenotypes"), sc.site_id),
                           sim.site.counts)
    io.write_manifest(os.path.join(out, "manifest.tsv"), manifest)
    io.write_library_sizes(os.path.join(out, "library_sizes.tsv"), ids,
                           np.full(base.n, base.library_size))
    io.write_genotypes(os.path.join(out, "genotypes.tsv"), geno, ids)
    with open(os.path.join(out, "truth.tsv"), "w") as fh:
        fh.write("#site_id\tkind\teffect_multiplier\teffect_regions\tseed\n")
        for sc in scenarios:
            regions = ",".join(f"{lo}-{hi}" for lo, hi in sc.effect_regions) or "."
            fh.write(f"{sc.site_id}\t{sc.kind}\t{sc.effect_multiplier:g}\t{regions}\t{sc.seed}\n")
    return 0


# -- fdr --------------------------------------------------------------------

def run_fdr(args):
    """Recompute the q_value column of a results file."""
    header, rows = io.read_results(args.results)
    if header is None or "p_value" not in header or "q_value" not in header:
        raise InvalidInputError(f"{args.results}: missing p_value/q_value header")
    ip, iq = header.index("p_value"), header.index("q_value")
    idx = [k for k, r in enumerate(rows) if r[ip] not in ("NA", "nan")]
    try:
        p = [float(rows[k][ip]) for k in idx]
    except ValueError as e:
        raise InvalidInputError(f"{args.results}: {e}") from None
    q = scan.estimate_fdr(p, lam=args.lam, pi0=1.0 if args.bh else None) if p else []
    for k, qq in zip(idx, q):
        rows[k][iq] = f"{qq:.10g}"
    with open(args.out, "w") as fh:
        fh.write("#" + "\t".join(header) + "\n")
        for r in rows:
            fh.write("\t".join(r) + "\n")
    return 0


# -- parser -----------------------------------------------------------------

def _add_inputs(p):
    p.add_argument("--bundle", help="directory written by 'simulate'; supplies default input paths")
    p.add_argument("--manifest")
    p.add_argument("--phenotype-dir")
    p.add_argument("--library-sizes")
    p.add_argument("--genotypes")
    p.add_argument("--pc-file", help="covariates (e.g. principal components) per individual")


def _add_scan_opts(p, default_method):
    p.add_argument("--method", choices=METHODS, default=default_method)
    p.add_argument("--cis-window", type=int, default=2000)
    p.add_argument("--permutations", type=int, default=10000)
    p.add_argument("--adaptive-stop", type=int, default=100,
                   help="stop after this many exceedances (0 disables)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)


def build_parser():
    parser = argparse.ArgumentParser(prog="wavqtl", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", help="wavelet (or window) association scan with permutation p-values")
    _add_inputs(p)
    _add_scan_opts(p, "wavelet")
    p.set_defaults(func=run_scan)

    p = sub.add_parser("baseline", help="100bp window min-p scan")
    _add_inputs(p)
    _add_scan_opts(p, "window")
    p.set_defaults(func=run_scan)

    p = sub.add_parser("effects", help="posterior effect profile for one site and variant")
    _add_inputs(p)
    p.add_argument("--site", required=True)
    p.add_argument("--variant", required=True)
    p.add_argument("--raw-scale", action="store_true",
                   help="rescale coefficient effects by the raw WC sd (approximate)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_effects)

    p = sub.add_parser("simulate", help="write a synthetic input bundle")
    p.add_argument("--config", help="JSON file of scenario fields (plus n_sites)")
    p.add_argument("--kind", choices=simulate.KINDS)
    p.add_argument("--n-sites", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--length", type=int)
    p.add_argument("--maf", type=float)
    p.add_argument("--depth", type=float)
    p.add_argument("--multiplier", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_simulate)

    p = sub.add_parser("fdr", help="recompute q-values of a results file")
    p.add_argument("--results", required=True)
    p.add_argument("--lam", type=float, default=0.5)
    p.add_argument("--bh", action="store_true", help="Benjamini-Hochberg (pi0 = 1)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_fdr)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (WavQTLError, OSError) as e:
        print(f"error\t{type(e).__name__}\t{e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
