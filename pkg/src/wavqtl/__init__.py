"""Wavelet-based association testing of count profiles against genotypes."""

from ._errors import (DegenerateInputError, InvalidInputError, NoTestableVariantError,
                      NumericalDegeneracyError, WavQTLError)
from .bf import DEFAULT_GRID, Genotype, averaged_bf, single_bf, site_bfs
from .hiermodel import ScaleMixtureFit, em_fit, log_lr
from .preprocess import SiteData, TransformedSite, prepare_site
from .scan import ScanConfig, SiteResult, estimate_fdr, lambda_max, permutation_pvalue
from .wavelet import dwt, dwt_matrix, idwt

__version__ = "0.1.0"
