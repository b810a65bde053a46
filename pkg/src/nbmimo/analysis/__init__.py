"""Complexity models, density estimation, reference curves and Monte Carlo runners."""

from .density import DensityCurve, kde, sample_delta, sample_skewness
from .flops import FlopCounter, FlopModel, counted_detect, flops_mf, flops_mmse
from .montecarlo import BerRecord, StopRule, records_to_csv, run_coded_ber, run_uncoded_ber
from .reference import siso_awgn_bpsk_ber, snr_at_ber
