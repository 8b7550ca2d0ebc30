"""Phase reconstructors: a regularized inverse of the weak-object model and the trained network.

Both reconstructors map a stack of intensities (k, n, n) -- or a single
(n, n) image -- to phases of the same shape, so diagnostics and evaluation
can treat them interchangeably.
"""

from dataclasses import dataclass

import numpy as np

from .network import Network, forward
from .optics import OpticalConfig, delta_spectrum, to_native, wotf

__all__ = [
    "tikhonov_inverse",
    "neural_reconstruct",
    "fit_affine_scale",
    "LinearInverse",
    "NeuralReconstructor",
    "DEFAULT_EPS_NONLINEAR",
    "DEFAULT_EPS_LINEAR",
]

DEFAULT_EPS_NONLINEAR = 1e-3
DEFAULT_EPS_LINEAR = 1e-6


def tikhonov_inverse(g, optics: OpticalConfig, eps: float = DEFAULT_EPS_NONLINEAR):
    """Per-frequency Wiener/Tikhonov inverse ``F = 2W (G - delta) / ((2W)^2 + eps)``.

    The DC bin and every exact WOTF null come back as zero.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps!r}")
    g = np.asarray(g, dtype=float)
    if g.shape[-2:] != (optics.grid_n, optics.grid_n):
        raise ValueError(f"measurement shape {g.shape[-2:]} does not match grid_n={optics.grid_n}")
    two_w = 2.0 * to_native(wotf(optics))
    spectrum = np.fft.fft2(g) - delta_spectrum(optics)
    return np.fft.ifft2(two_w * spectrum / (two_w ** 2 + eps)).real


def neural_reconstruct(g, net: Network, affine=(1.0, 0.0)):
    """Network estimate followed by the scale correction ``a * f + b``."""
    g = np.asarray(g, dtype=float)
    single = g.ndim == 2
    batch = g[None, None] if single else g[:, None]
    out = forward(net, batch).data[:, 0].astype(float)
    a, b = affine
    out = a * out + b
    return out[0] if single else out


def fit_affine_scale(estimates, truths):
    """Least-squares ``(a, b)`` with ``truth ~ a * estimate + b`` pooled over all pixels."""
    est = np.asarray(estimates, dtype=float).ravel()
    tru = np.asarray(truths, dtype=float).ravel()
    if est.shape != tru.shape:
        raise ValueError(f"shape mismatch {np.shape(estimates)} vs {np.shape(truths)}")
    if np.asarray(estimates).ndim > 2 and np.shape(estimates)[0] < 2:
        raise ValueError("need at least two estimate/truth pairs")
    de = est - est.mean()
    var = de @ de
    if var <= 1e-300 * est.size:
        raise ValueError("estimates are constant; scale cannot be fitted")
    a = (de @ (tru - tru.mean())) / var
    return float(a), float(tru.mean() - a * est.mean())


@dataclass
class LinearInverse:
    optics: OpticalConfig
    eps: float = DEFAULT_EPS_NONLINEAR
    kind: str = "linear_inverse"
    affine: tuple = (1.0, 0.0)

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not np.all(np.isfinite(self.affine)):
            raise ValueError("affine correction must be finite")
        self.affine = (float(self.affine[0]), float(self.affine[1]))

    def __call__(self, g):
        a, b = self.affine
        return a * tikhonov_inverse(g, self.optics, self.eps) + b

    def calibrate(self, measurements, truths):
        """Fit the scale correction (chiefly restoring the mean phase the inverse cannot see)."""
        self.affine = fit_affine_scale(tikhonov_inverse(measurements, self.optics, self.eps), truths)
        return self.affine


@dataclass
class NeuralReconstructor:
    net: Network
    affine: tuple = (1.0, 0.0)
    kind: str = "neural"
    batch_size: int = 25

    def __post_init__(self):
        if not np.all(np.isfinite(self.affine)):
            raise ValueError("affine correction must be finite")
        self.affine = (float(self.affine[0]), float(self.affine[1]))

    def __call__(self, g):
        g = np.asarray(g, dtype=float)
        if g.ndim == 2:
            return neural_reconstruct(g, self.net, self.affine)
        return np.concatenate([neural_reconstruct(g[i:i + self.batch_size], self.net, self.affine)
                               for i in range(0, len(g), self.batch_size)])

    def calibrate(self, measurements, truths):
        """Fit and store the scale correction on validation pairs; returns ``(a, b)``."""
        raw = NeuralReconstructor(self.net, (1.0, 0.0), batch_size=self.batch_size)(measurements)
        self.affine = fit_affine_scale(raw, truths)
        return self.affine
