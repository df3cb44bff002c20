"""Statistics and spectra of high-dimensional random geometric graphs on the torus."""

__version__ = "0.1.0"

from .torus import (INFINITY, ModelConfig, build_rgg, circle_distance,
                    pair_distance, sample_gnp, sample_positions, sample_rgg)
from .calibration import (CoordinateMoments, ThresholdResult, calibrate,
                          calibrate_threshold_linf, calibrate_threshold_lq,
                          coordinate_moments, norm_cdf, norm_ppf, rescale)
from .cumulants import (CumulantIndex, CycleKappa, EdgeworthParams,
                        cycle_kappa, edgeworth_joint_leading,
                        edgeworth_marginal_density, joint_cumulant_from_moments,
                        marginal_density_oracle, sample_cumulant,
                        triangle_gamma_moment)
from .signed import (EdgePattern, StatReport, TriangleTestResult, chain_pattern,
                     cycle_pattern, estimate_pattern_mean, k2k_pattern,
                     power_sweep, signed_triangle_count, signed_weight_sample,
                     triangle_test)
from .spectral import (ArcVector, SpectrumReport, arc_vector_q,
                       arc_vectors_linf, center_adjacency, count_large_eigs,
                       gram_offdiag, rayleigh, spectrum)
from .tracemethod import (CoreReport, Multigraph, brute_walk_sum, contract_core,
                          empirical_trace_moment, trace_power,
                          walk_to_multigraph)
from .tvbound import TvBoundReport, gamma_xy, k2k_moment, tv_upper_bound
