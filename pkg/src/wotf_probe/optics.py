"""Lensless weak-phase imaging: Fresnel forward model and its weak-object linearization.

Conventions
-----------
* All user-facing frequency grids are DC-centred (``np.fft.fftshift`` layout):
  for an even ``grid_n`` the DC sample sits at index ``grid_n // 2`` and index 0
  holds the negative Nyquist frequency ``-1 / (2 * pixel_pitch)``.
  Use :func:`to_native` / :func:`to_centered` to move between this layout and
  the layout ``np.fft.fft2`` produces.
* Transforms are unnormalized (``np.fft.fft2`` default), so the spectrum of a
  unit plane wave is a single DC bin of value ``grid_n ** 2``.  That bin is the
  discrete delta used by :func:`linearized_forward` and by the diagnostics.
* Boundaries are periodic (circular convolution).
"""

from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "OpticalConfig",
    "frequency_grid",
    "fresnel_transfer",
    "wotf",
    "propagate",
    "linearized_forward",
    "delta_spectrum",
    "to_native",
    "to_centered",
    "REFERENCE_FRESNEL_RATIO",
]

# lambda*z / (pitch^2 * N) of the reference setup: 633 nm, 100 mm, 20 um, 256 px
REFERENCE_FRESNEL_RATIO = 633e-9 * 0.1 / ((20e-6) ** 2 * 256)


@dataclass(frozen=True)
class OpticalConfig:
    """Geometry of the lensless imaging system.

    Parameters
    ----------
    wavelength : float
        Illumination wavelength [m].
    defocus : float
        Object-to-detector distance z [m].
    pixel_pitch : float
        Object and detector pixel size [m].
    grid_n : int
        Side of the square simulation grid (even, >= 8).
    """

    wavelength: float = 633e-9
    defocus: float = 0.1
    pixel_pitch: float = 20e-6
    grid_n: int = 64

    def __post_init__(self):
        for name in ("wavelength", "defocus", "pixel_pitch"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be a positive finite length, got {value!r}")
        if int(self.grid_n) != self.grid_n or self.grid_n < 8 or self.grid_n % 2:
            raise ValueError(f"grid_n must be an even integer >= 8, got {self.grid_n!r}")

    @property
    def fresnel_ratio(self) -> float:
        """Sampling ratio lambda*z / (pitch^2 * N); the reference setup sits near 0.62."""
        return self.wavelength * self.defocus / (self.pixel_pitch ** 2 * self.grid_n)

    @property
    def extent(self) -> float:
        """Physical side length of the grid [m]."""
        return self.grid_n * self.pixel_pitch

    def with_defocus(self, defocus: float) -> "OpticalConfig":
        return replace(self, defocus=defocus)

    @classmethod
    def full_size(cls, defocus: float = 0.1) -> "OpticalConfig":
        """Full-size reference geometry: 256 x 256 grid of 20 um pixels."""
        return cls(wavelength=633e-9, defocus=defocus, pixel_pitch=20e-6, grid_n=256)

    @classmethod
    def equivalent(cls, grid_n: int, defocus: float = 0.1, pixel_pitch: float = 20e-6,
                   wavelength: float = 633e-9) -> "OpticalConfig":
        """Smaller grid with the same Fresnel sampling ratio as a 256-pixel setup at ``defocus``.

        Pixel pitch and wavelength are kept; the distance shrinks in proportion to
        ``grid_n / 256`` so the number of WOTF nulls across the band is preserved.
        """
        return cls(wavelength=wavelength, defocus=defocus * grid_n / 256,
                   pixel_pitch=pixel_pitch, grid_n=grid_n)


def to_native(grid):
    """DC-centred layout -> ``np.fft`` layout (last two axes)."""
    return np.fft.ifftshift(grid, axes=(-2, -1))


def to_centered(grid):
    """``np.fft`` layout -> DC-centred layout (last two axes)."""
    return np.fft.fftshift(grid, axes=(-2, -1))


def frequency_grid(config: OpticalConfig):
    """DC-centred spatial-frequency coordinates ``(u, v)`` in cycles/m.

    ``u`` varies along columns (x), ``v`` along rows (y).  Spacing is
    ``1 / (grid_n * pixel_pitch)``; ``u[n//2, n//2] == v[n//2, n//2] == 0``.
    """
    n = config.grid_n
    f = (np.arange(n) - n // 2) / (n * config.pixel_pitch)
    v, u = np.meshgrid(f, f, indexing="ij")
    return u, v


def _chirp_argument(config):
    u, v = frequency_grid(config)
    return config.wavelength * config.defocus * (u ** 2 + v ** 2)


def fresnel_transfer(config: OpticalConfig):
    """Free-space transfer function ``exp(-i pi lambda z (u^2 + v^2))``, DC-centred."""
    return np.exp(-1j * np.pi * _chirp_argument(config))


def wotf(config: OpticalConfig):
    """Weak object transfer function ``sin(pi lambda z (u^2 + v^2))``, DC-centred."""
    return np.sin(np.pi * _chirp_argument(config))


def delta_spectrum(config: OpticalConfig):
    """Unnormalized spectrum of a unit plane wave in native layout."""
    d = np.zeros((config.grid_n, config.grid_n))
    d[0, 0] = config.grid_n ** 2
    return d


def propagate(phase, config: OpticalConfig):
    """Detector intensity ``|ifft(fft(exp(i f)) H)|^2`` for a pure phase object.

    Parameters
    ----------
    phase : ndarray, shape (grid_n, grid_n)
        Object phase in radians.  A leading batch axis is also accepted.
    config : OpticalConfig

    Returns
    -------
    ndarray
        Intensity with the same shape as ``phase``; a unit plane wave maps to 1.
    """
    phase = np.asarray(phase, dtype=float)
    if phase.shape[-2:] != (config.grid_n, config.grid_n):
        raise ValueError(
            f"grid shape {phase.shape[-2:]} does not match config grid_n={config.grid_n}")
    spectrum = np.fft.fft2(np.exp(1j * phase)) * to_native(fresnel_transfer(config))
    return np.abs(np.fft.ifft2(spectrum)) ** 2


def linearized_forward(phase, config: OpticalConfig):
    """Weak-object intensity: ``G = delta + 2 W F`` evaluated back in real space.

    Accurate to second order in the phase depth; keep ``max|phase|`` around 0.1 pi or below.
    """
    phase = np.asarray(phase, dtype=float)
    if phase.shape[-2:] != (config.grid_n, config.grid_n):
        raise ValueError(
            f"grid shape {phase.shape[-2:]} does not match config grid_n={config.grid_n}")
    spectrum = delta_spectrum(config) + 2.0 * to_native(wotf(config)) * np.fft.fft2(phase)
    return np.fft.ifft2(spectrum).real
