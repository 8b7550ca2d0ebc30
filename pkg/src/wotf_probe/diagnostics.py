"""What did a reconstructor learn about propagation?

* :func:`extract_lwotf` averages the transfer ratio ``(G - delta) / F_hat``
  over a test set.  For a perfect reconstructor on weak objects this equals
  ``2 sin(pi lambda z (u^2 + v^2))``.
* The star-pattern test images a radial grating whose local frequency sweeps
  with radius.  Each WOTF null flips the fringe sign at a predictable radius;
  a reconstructor that inverts the physics removes the flips.
"""

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from ._util import atomic_write_text
from .optics import OpticalConfig, delta_spectrum, frequency_grid, to_centered, wotf

__all__ = [
    "LwotfResult",
    "extract_lwotf",
    "theory_lwotf",
    "first_null_frequency",
    "diagonal_profile",
    "write_profile_csv",
    "lwotf_fidelity",
    "StarPattern",
    "make_star",
    "NullRadius",
    "predict_null_radii",
    "star_radial_response",
    "detect_discontinuities",
    "usable_radii",
    "write_radii_csv",
    "DEFAULT_MASK_THRESHOLD",
]

DEFAULT_MASK_THRESHOLD = 1e-6


# --------------------------------------------------------------------------
# learned transfer function

@dataclass
class LwotfResult:
    """Averaged transfer ratio on a DC-centred grid; invalid frequencies hold NaN."""

    grid: np.ndarray
    valid_mask: np.ndarray
    n_images: int
    counts: np.ndarray


def theory_lwotf(optics: OpticalConfig):
    """The exact weak-object transfer ratio ``2 W``, DC-centred."""
    return 2.0 * wotf(optics)


def first_null_frequency(optics: OpticalConfig) -> float:
    """Radial frequency [cycles/m] of the first WOTF zero past DC."""
    return 1.0 / np.sqrt(optics.wavelength * optics.defocus)


def extract_lwotf(reconstructor, measurements, optics: OpticalConfig,
                  mask_threshold: float = DEFAULT_MASK_THRESHOLD) -> LwotfResult:
    """Average ``(G_k - delta) / F_hat_k`` over images where ``|F_hat_k|`` is not negligible.

    Parameters
    ----------
    reconstructor : callable
        Maps a (k, n, n) intensity stack to a (k, n, n) phase stack.
    measurements : array_like, shape (k, n, n)
    optics : OpticalConfig
    mask_threshold : float
        A frequency of image k is used only where ``|F_hat_k|`` exceeds this
        fraction of the RMS of ``|F_hat_k|`` over the grid.
    """
    g = np.asarray(measurements, dtype=float)
    if g.ndim == 2:
        g = g[None]
    if len(g) < 1:
        raise ValueError("need at least one measurement")
    if g.shape[-2:] != (optics.grid_n, optics.grid_n):
        raise ValueError(f"measurement shape {g.shape[-2:]} does not match grid_n={optics.grid_n}")
    f_hat = np.fft.fft2(np.asarray(reconstructor(g), dtype=float).reshape(g.shape))
    numer = np.fft.fft2(g) - delta_spectrum(optics)
    rms = np.sqrt(np.mean(np.abs(f_hat) ** 2, axis=(1, 2), keepdims=True))
    use = np.abs(f_hat) > mask_threshold * rms
    use[:, 0, 0] = False
    ratio = np.zeros(g.shape, dtype=complex)
    np.divide(numer, f_hat, out=ratio, where=use)
    counts = use.sum(axis=0)
    valid = counts > 0
    mean = np.full(g.shape[1:], np.nan)
    mean[valid] = ratio.sum(axis=0).real[valid] / counts[valid]
    return LwotfResult(to_centered(mean), to_centered(valid), len(g), to_centered(counts))


def diagonal_profile(grid, optics: OpticalConfig | None = None, clip=(-3.0, 3.0), anti=False):
    """Samples along the main (or anti-) diagonal through DC, clipped to ``clip``.

    Returns ``(freq, values)``; ``freq`` is the signed radial frequency along the
    diagonal in cycles/m (in units of grid steps if ``optics`` is None).
    """
    grid = np.asarray(grid)
    n = grid.shape[0]
    if grid.ndim != 2 or grid.shape[1] != n:
        raise ValueError("diagonal profile needs a square grid")
    idx = np.arange(n)
    c = n // 2
    # the Nyquist row/column is shared by +/- frequencies, so (2c - i) % n stays on the diagonal
    values = grid[idx, (2 * c - idx) % n if anti else idx].astype(float)
    step = 1.0 if optics is None else 1.0 / (optics.grid_n * optics.pixel_pitch)
    freq = (idx - c) * np.sqrt(2.0) * step
    if clip is not None:
        values = np.clip(values, *clip)
    return freq, values


def write_profile_csv(path, freq, values):
    lines = ["freq_per_m,value"]
    lines += [f"{f:.9g},{'nan' if np.isnan(v) else format(v, '.12g')}"
              for f, v in zip(freq, values)]
    atomic_write_text(path, "\n".join(lines) + "\n")


def lwotf_fidelity(lwotf: LwotfResult, optics: OpticalConfig, band=None) -> float:
    """RMS deviation of the learned ratio from ``2 W`` over valid frequencies in ``band``.

    ``band`` is a ``(low, high)`` radial interval in cycles/m, ``low`` inclusive
    and ``high`` exclusive; the default is everything below the first null.
    DC is always excluded.
    """
    u, v = frequency_grid(optics)
    rho = np.hypot(u, v)
    nyquist = 1.0 / (2 * optics.pixel_pitch)
    lo, hi = (0.0, first_null_frequency(optics)) if band is None else band
    if lo < 0 or lo >= hi or lo > np.sqrt(2) * nyquist:
        raise ValueError(f"band {band!r} is not inside the sampled spectrum")
    sel = lwotf.valid_mask & (rho >= lo) & (rho < hi) & (rho > 0)
    if not sel.any():
        raise ValueError("empty valid band: no usable frequencies in the requested interval")
    diff = lwotf.grid[sel] - theory_lwotf(optics)[sel]
    return float(np.sqrt(np.mean(diff ** 2)))


# --------------------------------------------------------------------------
# star pattern

@dataclass(frozen=True)
class StarPattern:
    """Radial grating with ``periods`` azimuthal cycles.

    ``profile`` is ``"sinusoidal"`` (``depth * (1 + cos(P theta)) / 2``) or
    ``"binary"`` (``depth`` where ``cos(P theta) >= 0``).  With ``blank_center``
    the aliased core, where the azimuthal period is under ``min_period_px``
    pixels, is filled with the mean level.
    """

    periods: int = 50
    profile: str = "sinusoidal"
    depth: float = 0.1 * np.pi
    blank_center: bool = True
    min_period_px: float = 2.0

    def __post_init__(self):
        if self.periods < 4:
            raise ValueError("a star needs at least 4 periods")
        if self.profile not in ("sinusoidal", "binary"):
            raise ValueError(f"unknown star profile {self.profile!r}")
        if not (0 < self.depth <= 0.1 * np.pi + 1e-12):
            raise ValueError("star depth must lie in (0, 0.1 pi] to stay a weak object")


def _polar_px(n):
    c = n // 2
    yy, xx = np.mgrid[0:n, 0:n]
    return np.hypot(yy - c, xx - c), np.arctan2(yy - c, xx - c)


def make_star(cfg: StarPattern, optics: OpticalConfig):
    """Star-pattern phase object centred on the grid (pixel ``n // 2``)."""
    n = optics.grid_n
    if cfg.periods >= np.pi * (n // 2):
        raise ValueError(f"{cfg.periods} periods alias everywhere on a {n}-pixel grid "
                         f"(need fewer than {np.pi * (n // 2):.0f})")
    r, theta = _polar_px(n)
    carrier = np.cos(cfg.periods * theta)
    if cfg.profile == "sinusoidal":
        phase = cfg.depth * (1 + carrier) / 2
    else:
        phase = cfg.depth * (carrier >= 0)
    if cfg.blank_center:
        core = 2 * np.pi * r / cfg.periods < cfg.min_period_px
        phase[core] = cfg.depth / 2
    return phase


class NullRadius(NamedTuple):
    k: int
    radius: float


def usable_radii(optics: OpticalConfig, periods: int, min_period_px: float = 4.0,
                 edge_margin_px: float = 2.0, max_walkoff: float = 0.3):
    """Radial interval [m] where the star's fringe sign is a local property.

    Three bounds apply: fringes must be resolved (tangential period at least
    ``min_period_px``), stay inside the inscribed circle, and the Fresnel
    walk-off ``lambda z P / (2 pi r)`` of the local fringe frequency must be
    at most ``max_walkoff`` times the radius.  Closer in, light from
    neighbouring radii mixes and the crossings drift away from the
    local-frequency null radii.
    """
    r_res = max(min_period_px * periods / (2 * np.pi), 2.0) * optics.pixel_pitch
    r_walk = np.sqrt(optics.wavelength * optics.defocus * periods / (2 * np.pi * max_walkoff))
    r_max = (optics.grid_n // 2 - edge_margin_px) * optics.pixel_pitch
    return max(r_res, r_walk), r_max


def predict_null_radii(optics: OpticalConfig, periods: int, k_max: int = 1000,
                       r_min: float = 0.0, r_max: float | None = None):
    """Radii ``r_k = (P / 2 pi) sqrt(lambda z / k)`` of fringe discontinuities inside the grid.

    Returns :class:`NullRadius` tuples in order of increasing ``k`` (decreasing radius).
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if r_max is None:
        r_max = optics.grid_n // 2 * optics.pixel_pitch
    k = np.arange(1, k_max + 1)
    radii = periods / (2 * np.pi) * np.sqrt(optics.wavelength * optics.defocus / k)
    keep = (radii <= r_max) & (radii >= r_min)
    out = [NullRadius(int(kk), float(rr)) for kk, rr in zip(k[keep], radii[keep])]
    if not out:
        warnings.warn("no predicted null radius falls inside the grid", stacklevel=2)
    return out


def star_radial_response(img, periods: int, optics: OpticalConfig, r_min=None, r_max=None,
                         step_px: float = 0.1):
    """Azimuthal ``cos(P theta)`` and ``sin(P theta)`` components of ``img`` versus radius.

    Sampling is on circles around the grid centre with bilinear interpolation.
    Returns ``(radii_m, cos_part, sin_part)``.
    """
    img = np.asarray(img, dtype=float)
    lo, hi = usable_radii(optics, periods)
    lo = lo if r_min is None else r_min
    hi = hi if r_max is None else r_max
    c = optics.grid_n // 2
    radii_px = np.arange(lo / optics.pixel_pitch, hi / optics.pixel_pitch + 1e-9, step_px)
    n_theta = max(16 * periods, 256)
    theta = np.arange(n_theta) * (2 * np.pi / n_theta)
    rr, tt = np.meshgrid(radii_px, theta, indexing="ij")
    coords = np.stack([c + rr * np.sin(tt), c + rr * np.cos(tt)])
    vals = ndimage.map_coordinates(img - img.mean(), coords, order=1, mode="grid-wrap")
    cos_part = (vals * np.cos(periods * theta)).mean(axis=1) * 2
    sin_part = (vals * np.sin(periods * theta)).mean(axis=1) * 2
    return radii_px * optics.pixel_pitch, cos_part, sin_part


def detect_discontinuities(img, periods: int, optics: OpticalConfig, r_min=None, r_max=None,
                           significance: float = 0.05):
    """Radii [m] where the star fringes flip sign, innermost last.

    The ``cos(P theta)`` component along radius is split into runs whose
    magnitude exceeds ``significance`` times its maximum; a discontinuity is
    reported between consecutive runs of opposite sign, at the interpolated
    zero crossing.
    """
    radii, cpart, _ = star_radial_response(img, periods, optics, r_min, r_max)
    peak = np.max(np.abs(cpart)) if cpart.size else 0.0
    scale_ = np.max(np.abs(img)) if np.size(img) else 0.0
    if peak <= 1e-9 * max(scale_, 1e-300):
        raise ValueError("insufficient fringe contrast: the star response is flat")
    sig = np.where(np.abs(cpart) > significance * peak, np.sign(cpart), 0)
    found = []
    last_i, last_s = None, 0
    for i in np.flatnonzero(sig):
        if last_s and sig[i] != last_s:
            # zero crossings between the two significant runs
            seg = np.arange(last_i, i + 1)
            flips = seg[:-1][np.sign(cpart[seg[:-1]]) != np.sign(cpart[seg[1:]])]
            xs = [radii[j] + (radii[j + 1] - radii[j]) * cpart[j] / (cpart[j] - cpart[j + 1])
                  for j in flips]
            found.append(float(np.mean(xs)))
        last_i, last_s = i, sig[i]
    return sorted(found, reverse=True)


def write_radii_csv(path, radii, ks=None):
    ks = range(1, len(radii) + 1) if ks is None else ks
    lines = ["k,radius_m"] + [f"{k},{r:.9g}" for k, r in zip(ks, radii)]
    atomic_write_text(path, "\n".join(lines) + "\n")
