"""End-to-end protocols shared by the ``reproduce`` command and the acceptance suite."""

from dataclasses import dataclass, field

import numpy as np

from .datasets import DEFAULT_MAX_PHASE, generate_dataset
from .diagnostics import (StarPattern, detect_discontinuities, extract_lwotf, lwotf_fidelity,
                          make_star, predict_null_radii, usable_radii)
from .evaluation import pcc
from .network import NetworkConfig, TrainConfig, build_network, train
from .optics import OpticalConfig, frequency_grid, linearized_forward, propagate, to_native
from .reconstructors import DEFAULT_EPS_LINEAR, NeuralReconstructor, tikhonov_inverse
from .registration import AffineParams, corner_error, register, warp_affine

__all__ = [
    "band_limited_phase",
    "oracle_relative_error",
    "weak_object_residual",
    "DomainModel",
    "train_domain_model",
    "lwotf_rmse",
    "lwotf_probe_phases",
    "StarNullReport",
    "star_null_report",
    "StarReconReport",
    "star_reconstruction_report",
    "RegistrationTrial",
    "registration_trials",
]


def band_limited_phase(optics: OpticalConfig, rng, max_phase=DEFAULT_MAX_PHASE, band=0.9):
    """Zero-mean random phase whose spectrum lies strictly inside the first WOTF lobe.

    Frequencies satisfy ``0 < rho < band / sqrt(lambda z)``, so the transfer
    function has no null on the support.  Scaled to peak ``|phase| = max_phase``.
    """
    u, v = frequency_grid(optics)
    rho = to_native(np.hypot(u, v))
    support = (rho > 0) & (rho < band / np.sqrt(optics.wavelength * optics.defocus))
    n = optics.grid_n
    spec = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) * support
    phase = np.fft.ifft2(spec).real
    return phase * (max_phase / np.max(np.abs(phase)))


def oracle_relative_error(phase, optics: OpticalConfig, eps=DEFAULT_EPS_LINEAR):
    """Relative L2 error of the regularized inverse on exactly linear measurements."""
    est = tikhonov_inverse(linearized_forward(phase, optics), optics, eps)
    return float(np.linalg.norm(est - phase) / np.linalg.norm(phase))


def weak_object_residual(phase, optics: OpticalConfig):
    """``||g_exact - g_linear|| / ||g_exact||`` for one phase object."""
    g = propagate(phase, optics)
    return float(np.linalg.norm(g - linearized_forward(phase, optics)) / np.linalg.norm(g))


@dataclass
class DomainModel:
    kind: str
    reconstructor: NeuralReconstructor
    manifest: object
    loss_history: list = field(default_factory=list)


def train_domain_model(kind, seed, optics: OpticalConfig, count=250,
                       net_cfg: NetworkConfig | None = None, train_cfg: TrainConfig | None = None,
                       max_phase=DEFAULT_MAX_PHASE, noise_sigma=0.0, data_seed=None,
                       checkpoint_dir=None, log=None) -> DomainModel:
    """Generate a ``kind`` dataset, train a network on it and fit the scale on validation.

    With the default 80/10/10 split, ``count=250`` gives 200 training images.
    """
    net_cfg = net_cfg or NetworkConfig(input_side=optics.grid_n)
    train_cfg = train_cfg or TrainConfig(seed=seed)
    manifest = generate_dataset(kind, seed if data_seed is None else data_seed, count,
                                optics.grid_n)
    net = build_network(net_cfg, seed=seed)
    result = train(net, manifest, optics, train_cfg, max_phase=max_phase,
                   checkpoint_dir=checkpoint_dir, noise_sigma=noise_sigma, log=log)
    rec = NeuralReconstructor(net, kind=kind)
    truths = manifest.phases("validation", max_phase)
    rec.calibrate(propagate(truths, optics), truths)
    return DomainModel(kind, rec, manifest, result.loss_history)


def lwotf_probe_phases(seed, grid_n, count=99, kinds=("texture", "glyph", "layout"),
                       max_phase=DEFAULT_MAX_PHASE):
    """Fresh probe phases for LWOTF extraction, split as evenly as possible across ``kinds``.

    A mixed probe keeps the estimate from favouring whichever domain a model was
    trained on.  The first ``count % len(kinds)`` kinds get one extra image.
    """
    if count < len(kinds):
        raise ValueError(f"need at least one probe image per kind, got count={count}")
    base, extra = divmod(count, len(kinds))
    return np.concatenate([
        generate_dataset(k, seed, base + (i < extra), grid_n, ratios=(0, 0, 1),
                         name=f"lwotf-probe-{k}").phases("test", max_phase)
        for i, k in enumerate(kinds)])


def lwotf_rmse(reconstructor, probe_phases, optics: OpticalConfig):
    """RMSE of a reconstructor's learned transfer function against theory below the first null."""
    lw = extract_lwotf(reconstructor, propagate(probe_phases, optics), optics)
    return lwotf_fidelity(lw, optics), lw


@dataclass
class StarNullReport:
    optics: OpticalConfig
    periods: int
    window: tuple
    predicted: list
    detected: list
    errors_px: list
    max_error_px: float
    excluded: list

    def to_dict(self):
        px = self.optics.pixel_pitch
        return {
            "defocus_m": self.optics.defocus,
            "grid_n": self.optics.grid_n,
            "periods": self.periods,
            "window_px": [w / px for w in self.window],
            "predicted": [{"k": k, "radius_px": r / px} for k, r in self.predicted],
            "detected_px": [d / px for d in self.detected],
            "errors_px": self.errors_px,
            "max_error_px": self.max_error_px,
            "excluded": self.excluded,
        }


def star_null_report(optics: OpticalConfig, periods=50, max_walkoff=0.3) -> StarNullReport:
    """Simulate a weak sinusoidal star and match detected fringe flips to predicted null radii.

    Only nulls inside the :func:`usable_radii` window are scored.  Predicted
    nulls outside it (but inside the grid) are listed in ``excluded`` with the
    nearest crossing found over the whole resolvable range, for transparency.
    """
    px = optics.pixel_pitch
    g = propagate(make_star(StarPattern(periods=periods), optics), optics)
    lo, hi = usable_radii(optics, periods, max_walkoff=max_walkoff)
    predicted = predict_null_radii(optics, periods, r_min=lo, r_max=hi)
    detected = detect_discontinuities(g, periods, optics, r_min=lo, r_max=hi)
    errors = [min(abs(d - r) for d in detected) / px if detected else float("inf")
              for _, r in predicted]
    r_res, _ = usable_radii(optics, periods, max_walkoff=np.inf)
    loose = detect_discontinuities(g, periods, optics, r_min=r_res, r_max=hi)
    excluded = []
    for k, r in predict_null_radii(optics, periods, r_min=r_res, r_max=hi):
        if r < lo:
            near = min(loose, key=lambda d: abs(d - r)) if loose else None
            excluded.append({"k": k, "radius_px": r / px,
                             "walkoff_ratio": 2 * np.pi * k / periods,
                             "nearest_detected_px": None if near is None else near / px})
    return StarNullReport(optics, periods, (lo, hi), predicted, detected, errors,
                          max(errors) if errors else float("nan"), excluded)


@dataclass
class StarReconReport:
    flips_measured: int
    flips_reconstructed: int
    pcc_band: float

    def to_dict(self):
        return dict(self.__dict__)


def star_reconstruction_report(reconstructor, optics: OpticalConfig, periods,
                               significance=0.05, min_period_px=2.5) -> StarReconReport:
    """Count fringe flips before and after reconstruction and score the resolved annulus.

    The annulus runs from a tangential fringe period of ``min_period_px``
    (0.4 cycles/px by default, where sampling on circles still resolves the
    fringes) out to the inscribed circle.  Flips in the measurement are
    detected on the intensity contrast.  ``pcc_band`` compares reconstruction
    and truth over the same annulus.
    """
    truth = make_star(StarPattern(periods=periods), optics)
    g = propagate(truth, optics)
    est = np.asarray(reconstructor(g), dtype=float)
    lo, hi = usable_radii(optics, periods, min_period_px=min_period_px, max_walkoff=np.inf)

    def flips(img):
        try:
            return len(detect_discontinuities(img, periods, optics, lo, hi, significance))
        except ValueError:
            return 0

    n = optics.grid_n
    yy, xx = np.mgrid[0:n, 0:n] - n // 2
    r = np.hypot(yy, xx) * optics.pixel_pitch
    band = (r >= lo) & (r <= hi)
    return StarReconReport(flips(g), flips(est), pcc(est[band], truth[band]))


@dataclass
class RegistrationTrial:
    planted: AffineParams
    recovered: AffineParams
    corner_error_px: float
    monotone: bool
    n_runs: int


def registration_trials(n_trials=10, seed=0, grid_n=64, max_shift=5.0, max_angle=3.0,
                        max_scale=0.02):
    """Plant random affine deformations on texture images and try to undo them.

    Shift directions are uniform with magnitude up to ``max_shift`` px (uniform
    over the disc); rotation and scale deviation are uniform in their ranges.
    ``monotone`` checks the best-vertex history of every simplex run.
    """
    rng = np.random.default_rng(seed)
    images = generate_dataset("texture", seed, n_trials, grid_n, ratios=(0, 0, 1)).images("test")
    out = []
    for img in images.astype(float):
        angle = rng.uniform(-max_angle, max_angle)
        scale = 1 + rng.uniform(-max_scale, max_scale)
        r, a = max_shift * np.sqrt(rng.uniform()), rng.uniform(0, 2 * np.pi)
        planted = AffineParams.from_geometry(angle, scale, (r * np.cos(a), r * np.sin(a)))
        trace = []
        rec = register(warp_affine(img, planted), img, trace=trace)
        mono = all(np.all(np.diff(t.history) <= 0) for t in trace)
        out.append(RegistrationTrial(planted, rec, corner_error(rec, planted, img.shape),
                                     mono, len(trace)))
    return out
