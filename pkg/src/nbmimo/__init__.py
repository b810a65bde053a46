"""Matched-filter soft-output detection for NB-LDPC coded large MIMO links."""

from .gf256 import DEFAULT_FIELD, FieldParams, gf_add, gf_inv, gf_mul
from .mimo import (BPSK, ChannelRealization, Constellation, LinkConfig, apply_channel, ergodic_capacity,
                   generate_channel, make_constellation, map_codeword_to_signals, snr_to_noise_variance,
                   spectral_efficiency)
from .nbldpc import (DecodeResult, RepeatedCode, SparseParityCheck, build_regular_code, decode_fft_bp, encode,
                     multiplicative_repeat, wht256)
from .detect import (Detector, SoftEstimate, SoftEstimates, VarianceMode, detect_mf, detect_mf_simplified,
                     detect_mmse, detect_zf, hard_slice, likelihoods_to_symbol_priors, soft_output)

__version__ = "0.1.0"
