"""Tab-separated file formats read and written by the command line tools.

All files are TSV; lines starting with '#' are headers or comments.

manifest       site_id, chromosome, start, end            (end - start + 1 = B)
phenotype      one file per site, N rows x B integer counts
library sizes  individual_id, total_reads
genotypes      variant_id, chromosome, position, N dosages in [0, 2]
covariates     individual_id, K real columns
results        site_id, n_variants_tested, best_variant, <statistic>, p_value, q_value, n_perms
"""

import math
import os
from dataclasses import dataclass

import numpy as np

from ._errors import InvalidInputError
from .bf import Genotype


class InputFileError(InvalidInputError):
    def __init__(self, path, lineno, msg):
        where = f"{path}:{lineno}" if lineno else str(path)
        super().__init__(f"{where}: {msg}")


class InconsistentSamplesError(InvalidInputError):
    pass


@dataclass
class ManifestRow:
    site_id: str
    chromosome: str
    start: int
    end: int

    @property
    def length(self):
        return self.end - self.start + 1


def _rows(path):
    """Yield (lineno, fields) for the data lines of a TSV file."""
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            yield lineno, line.split("\t")


def _header(path):
    """Fields of the last '#' line before the data, or None."""
    last = None
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            last = line
    return None if last is None else last[1:].rstrip("\n").split("\t")


def _int(path, lineno, text, what):
    try:
        return int(text)
    except ValueError:
        raise InputFileError(path, lineno, f"cannot parse {what} {text!r} as integer") from None


def _float(path, lineno, text, what):
    try:
        v = float(text)
    except ValueError:
        raise InputFileError(path, lineno, f"cannot parse {what} {text!r} as number") from None
    if not math.isfinite(v):
        raise InputFileError(path, lineno, f"non-finite {what}")
    return v


def read_manifest(path):
    rows, seen = [], set()
    for lineno, f in _rows(path):
        if len(f) != 4:
            raise InputFileError(path, lineno, f"expected 4 fields, got {len(f)}")
        start = _int(path, lineno, f[2], "start")
        end = _int(path, lineno, f[3], "end")
        if start < 1 or end < start:
            raise InputFileError(path, lineno, "coordinates must be positive with end >= start")
        if f[0] in seen:
            raise InputFileError(path, lineno, f"duplicate site id {f[0]!r}")
        seen.add(f[0])
        rows.append(ManifestRow(f[0], f[1], start, end))
    return rows


def write_manifest(path, rows):
    with open(path, "w") as fh:
        fh.write("#site_id\tchromosome\tstart\tend\n")
        for r in rows:
            fh.write(f"{r.site_id}\t{r.chromosome}\t{r.start}\t{r.end}\n")


def read_library_sizes(path):
    """Return (individual ids, total reads)."""
    ids, sizes = [], []
    for lineno, f in _rows(path):
        if len(f) != 2:
            raise InputFileError(path, lineno, f"expected 2 fields, got {len(f)}")
        s = _int(path, lineno, f[1], "total_reads")
        if s <= 0:
            raise InputFileError(path, lineno, "library size must be positive")
        ids.append(f[0])
        sizes.append(s)
    if len(set(ids)) != len(ids):
        raise InputFileError(path, 0, "duplicate individual ids")
    return ids, np.array(sizes, dtype=np.int64)


def write_library_sizes(path, ids, sizes):
    with open(path, "w") as fh:
        fh.write("#individual_id\ttotal_reads\n")
        for i, s in zip(ids, sizes):
            fh.write(f"{i}\t{int(s)}\n")


def read_phenotype(path, n=None, B=None):
    rows = []
    for lineno, f in _rows(path):
        if B is not None and len(f) != B:
            raise InputFileError(path, lineno, f"expected {B} counts, got {len(f)}")
        try:
            vals = [int(x) for x in f]
        except ValueError:
            raise InputFileError(path, lineno, "counts must be integers") from None
        if min(vals) < 0:
            raise InputFileError(path, lineno, "negative count")
        rows.append(vals)
    if not rows:
        raise InputFileError(path, 0, "no data rows")
    if len({len(r) for r in rows}) != 1:
        raise InputFileError(path, 0, "rows have different lengths")
    if n is not None and len(rows) != n:
        raise InconsistentSamplesError(
            f"{path} has {len(rows)} individuals but the library-size file has {n}")
    return np.array(rows, dtype=np.int64)


def write_phenotype(path, counts):
    with open(path, "w") as fh:
        fh.write(f"# {counts.shape[0]} individuals x {counts.shape[1]} bases\n")
        for row in counts:
            fh.write("\t".join(str(int(x)) for x in row) + "\n")


def phenotype_path(directory, site_id):
    return os.path.join(directory, f"{site_id}.tsv")


def read_genotypes(path, n=None):
    out = []
    for lineno, f in _rows(path):
        if len(f) < 4:
            raise InputFileError(path, lineno, "expected variant_id, chromosome, position, dosages")
        pos = _int(path, lineno, f[2], "position")
        dos = [_float(path, lineno, x, "dosage") for x in f[3:]]
        if n is not None and len(dos) != n:
            raise InconsistentSamplesError(
                f"{path}:{lineno} has {len(dos)} dosages but the library-size file has {n} individuals")
        try:
            out.append(Genotype(id=f[0], dosages=np.array(dos), position=pos, chromosome=f[1]))
        except InvalidInputError as e:
            raise InputFileError(path, lineno, str(e)) from None
    return out


def write_genotypes(path, variants, ids):
    with open(path, "w") as fh:
        fh.write("#variant_id\tchromosome\tposition\t" + "\t".join(ids) + "\n")
        for v in variants:
            fh.write(f"{v.id}\t{v.chromosome}\t{v.position}\t"
                     + "\t".join(f"{x:g}" for x in v.dosages) + "\n")


def read_covariates(path, ids):
    """Covariate matrix (N, K) reordered to match ``ids``."""
    by_id = {}
    width = None
    for lineno, f in _rows(path):
        vals = [_float(path, lineno, x, "covariate") for x in f[1:]]
        if width is None:
            width = len(vals)
        elif len(vals) != width:
            raise InputFileError(path, lineno, f"expected {width} covariates, got {len(vals)}")
        by_id[f[0]] = vals
    if len(by_id) != len(ids) or set(by_id) != set(ids):
        raise InconsistentSamplesError(
            f"{path} has {len(by_id)} individuals not matching the {len(ids)} in the library-size file")
    return np.array([by_id[i] for i in ids], dtype=float).reshape(len(ids), width or 0)


RESULT_COLUMNS = ("site_id", "n_variants_tested", "best_variant", "log_lambda_max",
                  "p_value", "q_value", "n_perms")


def write_results(path, results, q_values, statistic_name="log_lambda_max"):
    cols = list(RESULT_COLUMNS)
    cols[3] = statistic_name
    with open(path, "w") as fh:
        fh.write("#" + "\t".join(cols) + "\n")
        for r, q in zip(results, q_values):
            fh.write(f"{r.site_id}\t{r.n_variants_tested}\t{r.best_variant}\t"
                     f"{r.statistic:.10g}\t{r.p_value:.10g}\t{q:.10g}\t{r.n_perms_used}\n")


def read_results(path):
    header = _header(path)
    rows = [f for _, f in _rows(path)]
    return header, rows


def write_effects(path, mean, sd):
    lo = mean - 3 * sd
    hi = mean + 3 * sd
    flag = (lo > 0) | (hi < 0)
    with open(path, "w") as fh:
        fh.write("#base\tmean_alpha\tsd_alpha\tmean_minus_3sd\tmean_plus_3sd\tstrongest_region_flag\n")
        # full round-trip precision so the interval columns are exactly reproducible
        for b, row in enumerate(zip(mean.tolist(), sd.tolist(), lo.tolist(), hi.tolist())):
            fh.write(f"{b + 1}\t" + "\t".join(map(repr, row)) + f"\t{int(flag[b])}\n")
