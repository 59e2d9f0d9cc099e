"""Saliency-aware macroblock bit allocation and its evaluation toolkit."""

from .errors import SalrateError
from .frames_io import (
    ComparisonRecord,
    FixationSet,
    Outcome,
    VideoSequence,
    read_comparisons,
    read_fixations_csv,
    read_pgm,
    read_qpmap,
    read_y4m,
    write_comparisons,
    write_pgm,
    write_qpmap,
    write_y4m,
)
from .saliency import center_prior, fixations_to_map, normalize, percentile, single_observer_map
from .postprocess import PostprocessParams, apply_postprocess, fit_postprocess
from .metrics import auc_judd, cc, ewssim, kl_div, nss, sim, ssim_map
from .qp_solver import (
    BitCostModel,
    analytic_bit_cost,
    build_qp_maps,
    calibrate_bit_cost,
    region_maps,
    solve_alpha_beta,
)
from .codec import decode_frame, encode_frame, encode_sequence, rate_search_base_qp
from .ranking import bootstrap_ci, build_matrix, filter_participants, thurstone_case_v

__version__ = "0.1.0"
