"""Layered forward-pass simulators: plain mixing, LayerNorm-normalized
mixing, and residual blocks with a 1-Lipschitz activation.

Per-layer cosines to the initial direction are measured between detail
components, matching the angular-drift definition; cross-cosines for
paired runs are plain state cosines (states in normalized modes are
already zero-mean).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsm import StochasticMatrix
from .errors import (ConfigError, DegenerateInput, DimensionMismatch,
                     InvariantViolation)
from .geometry import FeatureVector, NoiseModel, layer_norm, layer_norm_affine, sample_noise
from .linalg import project_detail
from .rng import SplitMix64
from .spectral import sigma2 as spectral_sigma2

MODES = ("plain", "ln", "ln_affine", "residual", "residual_ln")
ACTIVATIONS = ("identity", "relu")
RESIDUAL_CONTRACT_SLACK = 1e-9


@dataclass(frozen=True)
class LayerStackConfig:
    depth: int
    mixing: StochasticMatrix
    noise: NoiseModel
    mode: str = "plain"
    activation: str = "identity"
    affine_gamma: float | np.ndarray = 1.0
    project_residual_to_detail: bool = True

    def __post_init__(self):
        if self.depth < 1:
            raise ConfigError(f"depth must be >= 1, got {self.depth}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(
                f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if self.mixing.n != self.noise.n:
            raise DimensionMismatch("mixing dimension and noise dimension differ")


@dataclass
class TrajectoryMetrics:
    """Per-layer measurements; index 0 of detail_norms is the initial
    state, the remaining lists have one entry per layer."""

    detail_norms: list
    rel_updates: list
    cos_to_init: list
    cross_cos: list | None = None


def _apply_activation(name: str, v: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(v, 0.0)
    return v


def _detail_cosine(a: np.ndarray, b: np.ndarray) -> float | None:
    da = project_detail(a)
    db = project_detail(b)
    na = np.linalg.norm(da)
    nb = np.linalg.norm(db)
    if na == 0 or nb == 0:
        return None
    return float(np.clip(np.dot(da, db) / (na * nb), -1.0, 1.0))


def _state_cosine(a: np.ndarray, b: np.ndarray) -> float | None:
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        return None
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def _is_zero_mean(x: np.ndarray) -> bool:
    return abs(float(x.mean())) <= 1e-12 * max(1.0, float(np.abs(x).max(initial=0.0)))


def run_plain(cfg: LayerStackConfig, x0: FeatureVector,
              rng: SplitMix64) -> TrajectoryMetrics:
    """Iterate x <- M x + xi; noise omitted when nu = 0.

    In the noiseless regime every layer is held to the contraction
    contract ||x_detail|| <= sigma2**layer * ||x0_detail|| + 1e-9."""
    if cfg.mode != "plain":
        raise ConfigError(f"run_plain requires mode 'plain', got {cfg.mode!r}")
    a = cfg.mixing.matrix.entries
    x = np.asarray(x0.values, dtype=np.float64)
    if x.shape[0] != cfg.mixing.n:
        raise DimensionMismatch("state dimension does not match mixing matrix")
    noiseless = cfg.noise.nu == 0
    s2 = spectral_sigma2(cfg.mixing) if noiseless else None
    init = x.copy()
    init_detail = float(np.linalg.norm(project_detail(x)))
    metrics = TrajectoryMetrics(
        detail_norms=[init_detail], rel_updates=[], cos_to_init=[])
    for layer in range(1, cfg.depth + 1):
        nxt = a @ x
        if not noiseless:
            nxt = nxt + sample_noise(cfg.noise, rng).values
        prev_norm = np.linalg.norm(x)
        metrics.rel_updates.append(
            float(np.linalg.norm(nxt - x) / prev_norm) if prev_norm > 0 else None)
        x = nxt
        detail = float(np.linalg.norm(project_detail(x)))
        if noiseless:
            limit = (s2 ** layer) * init_detail + RESIDUAL_CONTRACT_SLACK
            if detail > limit:
                raise InvariantViolation(
                    f"detail norm {detail:.12g} exceeds sigma2**{layer} "
                    f"* ||x0_detail|| + 1e-9 = {limit:.12g}")
        metrics.detail_norms.append(detail)
        metrics.cos_to_init.append(_detail_cosine(init, x))
    return metrics


def _normalize_state(cfg: LayerStackConfig, y: np.ndarray) -> np.ndarray:
    fv = FeatureVector.from_values(y)
    if cfg.mode == "ln_affine":
        return layer_norm_affine(fv, cfg.affine_gamma, 0.0).values
    return layer_norm(fv).values


def run_ln_pair(cfg: LayerStackConfig, x0: FeatureVector,
                x0_prime: FeatureVector, rng: SplitMix64,
                rng_prime: SplitMix64) -> tuple[TrajectoryMetrics, TrajectoryMetrics]:
    """Two trajectories x <- LN(M x + xi) under independent noise.

    The sides draw from separate streams (`rng` for x0's trajectory,
    `rng_prime` for x0_prime's) so the noise realizations are
    independent."""
    if cfg.mode not in ("ln", "ln_affine"):
        raise ConfigError(
            f"run_ln_pair requires mode 'ln' or 'ln_affine', got {cfg.mode!r}")
    a = cfg.mixing.matrix.entries
    states = [np.asarray(x0.values, dtype=np.float64).copy(),
              np.asarray(x0_prime.values, dtype=np.float64).copy()]
    streams = (rng, rng_prime)
    inits = [s.copy() for s in states]
    per_side = [TrajectoryMetrics(
        detail_norms=[float(np.linalg.norm(project_detail(s)))],
        rel_updates=[], cos_to_init=[], cross_cos=[]) for s in states]
    for _ in range(cfg.depth):
        for side in (0, 1):
            x = states[side]
            y = a @ x
            if cfg.noise.nu > 0:
                y = y + sample_noise(cfg.noise, streams[side]).values
            nxt = _normalize_state(cfg, y)
            prev_norm = np.linalg.norm(x)
            per_side[side].rel_updates.append(
                float(np.linalg.norm(nxt - x) / prev_norm) if prev_norm > 0 else None)
            states[side] = nxt
            per_side[side].detail_norms.append(
                float(np.linalg.norm(project_detail(nxt))))
            per_side[side].cos_to_init.append(_detail_cosine(inits[side], nxt))
        cross = _state_cosine(states[0], states[1])
        per_side[0].cross_cos.append(cross)
        per_side[1].cross_cos.append(cross)
    return per_side[0], per_side[1]


def run_residual(cfg: LayerStackConfig, x0: FeatureVector,
                 rng: SplitMix64) -> TrajectoryMetrics:
    """Residual block x <- x + phi(M z (+ xi)) with z = x, or
    z = LN(x) in residual_ln mode.

    In the proof regime (nu = 0, zero-mean mixing input) every layer is
    checked against the update contract
    ||phi(M z)|| <= sigma2 * ||z_detail|| + 1e-9; a violation raises,
    since it would falsify the contraction mechanism."""
    if cfg.mode not in ("residual", "residual_ln"):
        raise ConfigError(
            f"run_residual requires a residual mode, got {cfg.mode!r}")
    a = cfg.mixing.matrix.entries
    s2 = spectral_sigma2(cfg.mixing)
    x = np.asarray(x0.values, dtype=np.float64).copy()
    if x.shape[0] != cfg.mixing.n:
        raise DimensionMismatch("state dimension does not match mixing matrix")
    init = x.copy()
    metrics = TrajectoryMetrics(
        detail_norms=[float(np.linalg.norm(project_detail(x)))],
        rel_updates=[], cos_to_init=[])
    for layer in range(cfg.depth):
        if cfg.mode == "residual_ln":
            z = layer_norm(FeatureVector.from_values(x)).values
        else:
            z = x
        pre = a @ z
        if cfg.noise.nu > 0:
            pre = pre + sample_noise(cfg.noise, rng).values
        update = _apply_activation(cfg.activation, pre)
        if cfg.noise.nu == 0 and _is_zero_mean(z):
            z_detail = float(np.linalg.norm(project_detail(z)))
            limit = s2 * z_detail + RESIDUAL_CONTRACT_SLACK
            update_norm = float(np.linalg.norm(update))
            if update_norm > limit:
                raise InvariantViolation(
                    f"residual update norm {update_norm:.12g} exceeds "
                    f"sigma2 * ||z_detail|| + 1e-9 = {limit:.12g} at layer {layer}")
        if cfg.project_residual_to_detail:
            update = project_detail(update)
        nxt = x + update
        prev_norm = np.linalg.norm(x)
        metrics.rel_updates.append(
            float(np.linalg.norm(update) / prev_norm) if prev_norm > 0 else None)
        x = nxt
        metrics.detail_norms.append(float(np.linalg.norm(project_detail(x))))
        metrics.cos_to_init.append(_detail_cosine(init, x))
    return metrics


def angular_drift(metrics: TrajectoryMetrics) -> float:
    """Rotation in radians between the initial and final detail
    components: arccos of the final cosine-to-initial."""
    if metrics.detail_norms[0] == 0 or metrics.detail_norms[-1] == 0:
        raise DegenerateInput("angular drift undefined without detail content")
    final_cos = metrics.cos_to_init[-1]
    if final_cos is None:
        raise DegenerateInput("angular drift undefined without detail content")
    return float(np.arccos(np.clip(final_cos, -1.0, 1.0)))
