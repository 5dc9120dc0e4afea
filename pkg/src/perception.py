"""
Perception Module
Signal-level camera estimators: quantized bearing classification with a
not-visible class, sigma-clipped patch depth, and the linear temporal filter
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple
import logging

import numpy as np
from astropy.stats import sigma_clip

try:
    from .exceptions import AllClipped, OutOfFovLabel
except ImportError:
    from exceptions import AllClipped, OutOfFovLabel

logger = logging.getLogger(__name__)

IDEAL = "ideal"
MODELED = "modeled"
PERCEPTION_MODES = (IDEAL, MODELED)

SIGMA_CLIP_MAXITERS = 10


@dataclass(frozen=True)
class BearingClassifierModel:
    """
    The camera FOV [-psi_max, psi_max) split into n equal intervals.

    Labels 0..n-1 are in-FOV classes; label n means the leader is not visible.
    """
    n_classes_in_fov: int = 20
    psi_max: float = 0.5236
    misclass_rate: float = 0.0
    misclass_spread: int = 3
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_classes_in_fov < 1:
            raise ValueError(f"n_classes_in_fov must be positive, got {self.n_classes_in_fov}")
        if not 0.0 < self.psi_max < math.pi / 2:
            raise ValueError(f"psi_max must lie in (0, pi/2), got {self.psi_max}")
        if not 0.0 <= self.misclass_rate < 1.0:
            raise ValueError(f"misclass_rate must lie in [0, 1), got {self.misclass_rate}")
        if self.misclass_spread < 1:
            raise ValueError(f"misclass_spread must be >= 1, got {self.misclass_spread}")
        if self.rng_seed < 0:
            raise ValueError(f"rng_seed must be non-negative, got {self.rng_seed}")

    @property
    def class_width(self) -> float:
        return 2.0 * self.psi_max / self.n_classes_in_fov

    @property
    def not_visible_label(self) -> int:
        return self.n_classes_in_fov


@dataclass(frozen=True)
class DepthEstimatorModel:
    """Synthetic inner-box depth patch with background contamination"""
    patch_size: int = 64
    noise_sigma: float = 0.02
    outlier_rate: float = 0.1
    outlier_offset_range: Tuple[float, float] = (1.0, 4.0)
    sigma_clip_k: float = 2.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.patch_size < 4:
            raise ValueError(f"patch_size must be >= 4, got {self.patch_size}")
        if not self.sigma_clip_k > 0:
            raise ValueError(f"sigma_clip_k must be positive, got {self.sigma_clip_k}")
        if self.rng_seed < 0:
            raise ValueError(f"rng_seed must be non-negative, got {self.rng_seed}")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be non-negative, got {self.noise_sigma}")
        if not 0.0 <= self.outlier_rate < 1.0:
            raise ValueError(f"outlier_rate must lie in [0, 1), got {self.outlier_rate}")
        lo, hi = self.outlier_offset_range
        if not 0.0 <= lo <= hi:
            raise ValueError(f"outlier_offset_range must satisfy 0 <= lo <= hi, got {self.outlier_offset_range}")
        object.__setattr__(self, "outlier_offset_range", (float(lo), float(hi)))


@dataclass
class TemporalFilter:
    """First-order smoother: out = K_f raw + (1 - K_f) previous"""
    K_f: float = 0.55
    state: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.K_f < 1.0:
            raise ValueError(f"K_f must lie in (0, 1), got {self.K_f}")

    def update(self, raw: float) -> float:
        return filter_step(self, raw)


@dataclass(frozen=True)
class EstimateStream:
    """One camera frame worth of estimates; raw values are None while blind"""
    t: float
    phi_raw: Optional[float]
    phi_filtered: Optional[float]
    L_raw: Optional[float]
    L_filtered: Optional[float]
    visible: bool
    label: Optional[int] = None


def label_of(phi_true: float, model: BearingClassifierModel) -> int:
    """
    Class of a true bearing.

    Args:
        phi_true: Bearing in radians
        model: Classifier model

    Returns:
        Index k of the interval [-psi + k w, -psi + (k+1) w) containing
        phi_true, or the not-visible label outside [-psi, psi)
    """
    psi = model.psi_max
    if not -psi <= phi_true < psi:
        return model.not_visible_label
    k = int(math.floor((phi_true + psi) / model.class_width))
    return min(max(k, 0), model.n_classes_in_fov - 1)


def class_center(label: int, model: BearingClassifierModel) -> float:
    """
    Bearing reported for an in-FOV class.

    Raises:
        OutOfFovLabel: for the not-visible label or any index outside 0..n-1
    """
    if not 0 <= label < model.n_classes_in_fov:
        raise OutOfFovLabel(f"Label {label} has no bearing (in-FOV labels are 0..{model.n_classes_in_fov - 1})")
    return -model.psi_max + (label + 0.5) * model.class_width


def measure_bearing(
    phi_true: float,
    model: BearingClassifierModel,
    rng: np.random.Generator,
    visible: bool = True
) -> Tuple[int, Optional[float]]:
    """
    Simulated classifier output.

    With probability misclass_rate the label is shifted by a uniform nonzero
    integer in [-spread, spread], clipped to the in-FOV labels.

    Returns:
        (label, phi_hat); phi_hat is None with the not-visible label
    """
    if not visible:
        return model.not_visible_label, None

    label = label_of(phi_true, model)
    if label == model.not_visible_label:
        return label, None

    if model.misclass_rate > 0 and rng.random() < model.misclass_rate:
        offset = int(rng.integers(1, model.misclass_spread + 1)) * int(rng.choice((-1, 1)))
        label = min(max(label + offset, 0), model.n_classes_in_fov - 1)

    return label, class_center(label, model)


def sigma_clipped_mean(data: np.ndarray, k: float, maxiters: int = SIGMA_CLIP_MAXITERS) -> float:
    """
    Mean of the samples surviving iterative median-centered k-sigma clipping.

    Raises:
        AllClipped: if no sample survives
    """
    clipped = sigma_clip(
        np.asarray(data, dtype=float),
        sigma=k,
        maxiters=maxiters,
        cenfunc='median',
        stdfunc='std',
        masked=True,
    )
    survivors = clipped.compressed()
    if survivors.size == 0:
        raise AllClipped(f"Sigma clipping at k={k} rejected all {np.size(data)} samples")
    return float(survivors.mean())


def synthesize_patch(L_true: float, model: DepthEstimatorModel, rng: np.random.Generator) -> np.ndarray:
    """Target pixels at L_true plus noise, a random share replaced by farther background"""
    pixels = L_true + rng.normal(0.0, model.noise_sigma, model.patch_size)
    background = rng.random(model.patch_size) < model.outlier_rate
    lo, hi = model.outlier_offset_range
    pixels[background] = L_true + rng.uniform(lo, hi, int(background.sum()))
    return pixels


def measure_depth(L_true: float, model: DepthEstimatorModel, rng: np.random.Generator) -> float:
    """
    Depth estimate from one synthetic patch.

    Args:
        L_true: True distance (> 0)
        model: Depth model
        rng: Generator owned by the estimator

    Returns:
        Sigma-clipped mean of the patch

    Raises:
        AllClipped: if clipping rejects every pixel
    """
    if not L_true > 0:
        raise ValueError(f"L_true must be positive, got {L_true}")
    return sigma_clipped_mean(synthesize_patch(L_true, model, rng), model.sigma_clip_k)


def filter_step(f: TemporalFilter, raw: float) -> float:
    """Advance the filter; the first sample seeds the state"""
    if not math.isfinite(raw):
        raise ValueError(f"Filter input must be finite, got {raw}")
    if f.state is None:
        f.state = float(raw)
    else:
        f.state = f.K_f * raw + (1.0 - f.K_f) * f.state
    return f.state


def estimator_rng(*entropy: int) -> np.random.Generator:
    """Independent generator for one estimator stream"""
    return np.random.default_rng(np.random.SeedSequence([int(e) for e in entropy]))


class PairEstimator:
    """
    Bearing and depth estimation for one follower camera.

    In ideal mode estimates equal the truth while visible. In modeled mode
    the classifier and the depth patch feed one temporal filter each. Both
    modes freeze the filtered values while the leader is not visible.
    """

    def __init__(
        self,
        mode: str = MODELED,
        bearing: BearingClassifierModel = None,
        depth: DepthEstimatorModel = None,
        K_f: float = 0.55,
        stream_seed: int = 0
    ):
        if mode not in PERCEPTION_MODES:
            raise ValueError(f"Unknown perception mode '{mode}', expected one of {PERCEPTION_MODES}")
        self.mode = mode
        self.bearing = bearing or BearingClassifierModel()
        self.depth = depth or DepthEstimatorModel(rng_seed=self.bearing.rng_seed)
        self.phi_filter = TemporalFilter(K_f)
        self.L_filter = TemporalFilter(K_f)
        self.bearing_rng = estimator_rng(self.bearing.rng_seed, stream_seed, 0)
        self.depth_rng = estimator_rng(self.depth.rng_seed, stream_seed, 1)
        self.depth_rejections = 0

    def _blind(self, t: float) -> EstimateStream:
        return EstimateStream(
            t=t,
            phi_raw=None,
            phi_filtered=self.phi_filter.state,
            L_raw=None,
            L_filtered=self.L_filter.state,
            visible=False,
            label=self.bearing.not_visible_label,
        )

    def observe(self, t: float, L_true: float, phi_true: float, visible: bool) -> EstimateStream:
        """
        Process one camera frame.

        Args:
            t: Simulation time
            L_true: True distance
            phi_true: True bearing
            visible: Whether the leader is geometrically in view

        Returns:
            EstimateStream row
        """
        if not visible:
            return self._blind(t)

        if self.mode == IDEAL:
            self.phi_filter.state = phi_true
            self.L_filter.state = L_true
            return EstimateStream(t, phi_true, phi_true, L_true, L_true, True, label_of(phi_true, self.bearing))

        label, phi_hat = measure_bearing(phi_true, self.bearing, self.bearing_rng, visible=True)
        if phi_hat is None:
            return self._blind(t)

        try:
            L_hat = measure_depth(L_true, self.depth, self.depth_rng)
        except AllClipped as e:
            self.depth_rejections += 1
            logger.warning(f"Depth estimate rejected at t={t:.2f}: {e}")
            L_hat = None

        if L_hat is None and self.L_filter.state is None:
            return self._blind(t)

        phi_filtered = filter_step(self.phi_filter, phi_hat)
        L_filtered = filter_step(self.L_filter, L_hat) if L_hat is not None else self.L_filter.state
        return EstimateStream(t, phi_hat, phi_filtered, L_hat, L_filtered, True, label)


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)

    model = BearingClassifierModel()
    print(f"Class width: {math.degrees(model.class_width):.2f} deg")
    print(f"label_of(0.01) = {label_of(0.01, model)}, center = {class_center(10, model):.5f}")

    patch = np.array([2.0] * 12 + [7.9] * 4)
    print(f"Clipped mean of hand patch: {sigma_clipped_mean(patch, 2.0)}")

    estimator = PairEstimator(MODELED, BearingClassifierModel(misclass_rate=0.1), stream_seed=1)
    for step in range(5):
        print(estimator.observe(step * 0.05, 1.5, 0.2, True))
