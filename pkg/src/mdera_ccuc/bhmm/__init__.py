"""Bounded hetero-dimensional mixture models of DF records."""
from .em import EmConfig, EmState, FitResult, fit_bmggmm, select_component_count
from .ggd import Ggdc, ReducedSimplex, bounded_pdf, ggd_pdf_unbounded, mc_normalizer
from .grouping import DfDataset, GroupingConfig, Hfc, group_records, lift, reduce_dimension
from .model import Bhmm, Hpc, PdfValue, bhmm_mean, bhmm_pdf, fit_bhmm, load_models, save_models
from .sampling import SamplingError, sample_df

__all__ = [
    "Bhmm", "DfDataset", "EmConfig", "EmState", "FitResult", "Ggdc", "GroupingConfig", "Hfc", "Hpc",
    "PdfValue", "ReducedSimplex", "SamplingError", "bhmm_mean", "bhmm_pdf", "bounded_pdf",
    "fit_bhmm", "fit_bmggmm", "ggd_pdf_unbounded", "group_records", "lift", "load_models",
    "mc_normalizer", "reduce_dimension", "sample_df", "save_models", "select_component_count",
]
