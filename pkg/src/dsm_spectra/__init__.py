"""Numerical library and experiment harness for the spectral collapse
of doubly stochastic mixing operators: Sinkhorn generation, detail-
subspace diagnostics (sigma2, effective depth, transient growth),
LayerNorm geometry, concentration-bound verifiers, and layered
dynamics including residual identity stagnation.
"""

__version__ = "0.1.0"

from .concentration import (BoundCheckResult, Theorem1Bound, clopper_pearson,
                            laurent_massart_tail, levy_tail,
                            sphere_marginal_cdf, sphere_marginal_tail,
                            theorem1_bound, theorem1_floor, verify_levy,
                            verify_projected_norm_concentration,
                            verify_theorem1, wedin_sin_theta)
from .dsm import (SinkhornConfig, StochasticMatrix, entropy,
                  is_doubly_stochastic, is_primitive, matrix_from_csv,
                  matrix_to_csv, sinkhorn_balance, sinkhorn_generate)
from .dynamics import (LayerStackConfig, TrajectoryMetrics, angular_drift,
                       run_ln_pair, run_plain, run_residual)
from .errors import (BoundViolation, ConfigError, DegenerateInput,
                     DimensionMismatch, DsmSpectraError, HighSnr,
                     InvalidDimension, InvalidEpsilon, InvariantViolation,
                     IoError, NonFinite, NotPositive, NumericUnderflow,
                     ResampleExhausted, SnrTargetUnreachable,
                     SpectralMismatch, ZeroGap, ZeroNoise, ZeroVector)
from .geometry import (FeatureVector, NoiseModel, SnrResult, cosine,
                       layer_norm, layer_norm_affine, normalized_gap,
                       sample_noise, snr, uniform_sphere_sample)
from .harness import (ExperimentConfig, TrialRecord, TrialStreams,
                      derive_trial_stream, run_affine_ablation,
                      run_collapse_hist, run_residual_depth, run_sweep_temp,
                      run_verify_bounds)
from .linalg import (DenseMatrix, SvdResult, matrix_power_apply,
                     project_detail, spectral_norm, svd)
from .rng import Role, SplitMix64, derive_stream, mix64, pack_stream_word
from .spectral import (SpectralReport, TransientProfile, contraction_check,
                       effective_depth, perron_check, sigma2,
                       spectral_report, transient_growth)

__all__ = [name for name in dir() if not name.startswith("_")]
