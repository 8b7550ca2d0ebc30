"""Entropy-controlled image datasets, PGM ingestion and grayscale-to-phase calibration.

Images are plain ``uint8`` arrays.  A dataset is described by a
:class:`DatasetManifest`: an ordered list of entries, each either a generator
sub-seed or a path to a binary PGM file, plus the split it belongs to.
Generated images are recomputed on demand from ``(descriptor, seed)``, so a
manifest is small and regeneration is byte-identical.
"""

import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from ._util import atomic_write_bytes, map_ordered

__all__ = [
    "image_entropy",
    "EntropyReport",
    "entropy_report",
    "calibrate_to_phase",
    "phase_to_image",
    "Entry",
    "DatasetManifest",
    "gen_texture_dataset",
    "gen_glyph_dataset",
    "gen_layout_dataset",
    "generate_dataset",
    "manifest_from_files",
    "render_image",
    "load_pgm",
    "save_pgm",
    "PgmError",
    "SPLITS",
    "DEFAULT_MAX_PHASE",
]

SPLITS = ("train", "validation", "test")
DEFAULT_MAX_PHASE = 0.1 * np.pi
MANIFEST_VERSION = 1


# --------------------------------------------------------------------------
# entropy

def image_entropy(img) -> float:
    """Shannon entropy (bits) of the empirical pixel-value distribution of an 8-bit image.

    One histogram bin per gray level; empty bins contribute nothing.
    """
    img = np.asarray(img)
    if img.size == 0:
        raise ValueError("entropy of an empty image is undefined")
    if img.dtype != np.uint8:
        if not np.issubdtype(img.dtype, np.integer) or img.min() < 0 or img.max() > 255:
            raise ValueError("image values must be integers in [0, 255]")
        img = img.astype(np.uint8)
    counts = np.bincount(img.ravel(), minlength=256)
    p = counts[counts > 0] / img.size
    h = np.sum(p * np.log2(1.0 / p))
    return float(min(max(h, 0.0), 8.0))


@dataclass
class EntropyReport:
    per_image_bits: np.ndarray
    histogram: np.ndarray
    bin_edges: np.ndarray
    mean: float
    std_dev: float

    def to_dict(self):
        return {
            "n_images": int(self.per_image_bits.size),
            "mean": self.mean,
            "std_dev": self.std_dev,
            "per_image_bits": self.per_image_bits.tolist(),
            "histogram": self.histogram.tolist(),
            "bin_edges": [float(self.bin_edges[0]), float(self.bin_edges[-1])],
        }


def entropy_report(manifest, n_bins: int = 1000, split=None) -> EntropyReport:
    """Per-image entropies of a dataset and their histogram over [0, 8] bits."""
    entries = manifest.select(split)
    if not entries:
        raise ValueError("entropy report needs at least one image")
    bits = np.array(map_ordered(lambda e: image_entropy(manifest.image(e)), entries))
    hist, edges = np.histogram(bits, bins=n_bins, range=(0.0, 8.0))
    return EntropyReport(bits, hist, edges, float(bits.mean()), float(bits.std()))


# --------------------------------------------------------------------------
# calibration

def calibrate_to_phase(img, max_phase: float = DEFAULT_MAX_PHASE):
    """Linear gray-level to phase map: 0 -> 0 rad, 255 -> ``max_phase``."""
    if not (0 < max_phase <= np.pi):
        raise ValueError(f"max_phase must lie in (0, pi], got {max_phase!r}")
    return np.asarray(img, dtype=float) * (max_phase / 255.0)


def phase_to_image(phase, max_phase: float = DEFAULT_MAX_PHASE):
    """Inverse of :func:`calibrate_to_phase` (rounded and clipped to 8 bits)."""
    if not (0 < max_phase <= np.pi):
        raise ValueError(f"max_phase must lie in (0, pi], got {max_phase!r}")
    levels = np.rint(np.asarray(phase, dtype=float) * (255.0 / max_phase))
    return np.clip(levels, 0, 255).astype(np.uint8)


# --------------------------------------------------------------------------
# generators

def _stretch_to_uint8(x):
    lo, hi = x.min(), x.max()
    if hi <= lo:
        return np.zeros(x.shape, dtype=np.uint8)
    return np.rint((x - lo) * (255.0 / (hi - lo))).astype(np.uint8)


def _texture(rng, n):
    # isotropic Gaussian low-pass of white noise; cutoff in cycles/pixel
    cutoff = rng.uniform(0.06, 0.3)
    noise = rng.standard_normal((n, n))
    f = np.fft.fftfreq(n)
    rho2 = f[:, None] ** 2 + f[None, :] ** 2
    field_ = np.fft.ifft2(np.fft.fft2(noise) * np.exp(-rho2 / (2 * cutoff ** 2))).real
    return _stretch_to_uint8(field_)


def _segment_distance(yy, xx, p0, p1):
    d = p1 - p0
    t = ((yy - p0[0]) * d[0] + (xx - p0[1]) * d[1]) / max(d @ d, 1e-12)
    t = np.clip(t, 0.0, 1.0)
    return np.hypot(yy - (p0[0] + t * d[0]), xx - (p0[1] + t * d[1]))


def _glyph(rng, n):
    s = n / 32.0
    yy, xx = np.mgrid[0:n, 0:n].astype(float)
    dist = np.full((n, n), np.inf)
    for _ in range(rng.integers(1, 3)):
        # a short random-walk stroke, kept away from the border
        p = rng.uniform(0.3 * n, 0.7 * n, size=2)
        heading = rng.uniform(0, 2 * np.pi)
        for _ in range(rng.integers(2, 5)):
            heading += rng.normal(0, 0.9)
            step = rng.uniform(4, 8) * s
            q = np.clip(p + step * np.array([np.sin(heading), np.cos(heading)]),
                        0.15 * n, 0.85 * n)
            dist = np.minimum(dist, _segment_distance(yy, xx, p, q))
            p = q
    if rng.random() < 0.4:
        c = rng.uniform(0.3 * n, 0.7 * n, size=2)
        r = rng.uniform(2.0, 3.5) * s
        dist = np.minimum(dist, np.maximum(np.hypot(yy - c[0], xx - c[1]) - r, 0.0))
    half_width = rng.uniform(1.0, 1.8) * s
    # soft edge about half a pixel wide, snapped to a few gray levels
    ink = np.clip((half_width - dist) / 0.6 + 0.5, 0.0, 1.0)
    ink = np.rint(ink * 4) / 4
    fg = rng.integers(200, 256)
    return np.rint(ink * fg).astype(np.uint8)


def _layout(rng, n):
    # Manhattan wiring: axis-aligned bars of a single level on an empty die
    img = np.zeros((n, n), dtype=np.uint8)
    s = max(1, round(n / 32))
    for _ in range(rng.integers(4, 9)):
        w = rng.integers(2, 4) * s
        length = rng.integers(n // 4, 3 * n // 4)
        r0, c0 = rng.integers(0, n - w), rng.integers(0, n - length)
        if rng.random() < 0.5:
            img[r0:r0 + w, c0:c0 + length] = 255
        else:
            img[c0:c0 + length, r0:r0 + w] = 255
    return img


_GENERATORS = {"texture": _texture, "glyph": _glyph, "layout": _layout}


@lru_cache(maxsize=4096)
def _render_cached(kind, grid_n, seed):
    img = _GENERATORS[kind](np.random.default_rng(seed), grid_n)
    img.setflags(write=False)
    return img


def render_image(descriptor, seed: int):
    """Regenerate one image from a generator descriptor and its per-image seed."""
    kind = descriptor.get("kind")
    if kind not in _GENERATORS:
        raise ValueError(f"unknown generator kind {kind!r}")
    return _render_cached(kind, int(descriptor["grid_n"]), int(seed)).copy()


# --------------------------------------------------------------------------
# manifest

@dataclass(frozen=True)
class Entry:
    id: str
    split: str
    seed: int | None = None
    path: str | None = None

    def to_dict(self):
        d = {"id": self.id, "split": self.split}
        if self.seed is not None:
            d["seed"] = self.seed
        if self.path is not None:
            d["path"] = self.path
        return d


@dataclass
class DatasetManifest:
    descriptor: dict
    seed: int
    entries: list = field(default_factory=list)

    def __post_init__(self):
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("manifest image ids must be unique")
        for e in self.entries:
            if e.split not in SPLITS:
                raise ValueError(f"entry {e.id!r}: unknown split {e.split!r}")
            if (e.seed is None) == (e.path is None):
                raise ValueError(f"entry {e.id!r}: exactly one of seed/path is required")

    @property
    def name(self) -> str:
        return self.descriptor.get("name", self.descriptor.get("kind", "dataset"))

    def select(self, split=None):
        if split is None:
            return list(self.entries)
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}")
        return [e for e in self.entries if e.split == split]

    def image(self, entry):
        if entry.path is not None:
            try:
                return load_pgm(entry.path)
            except OSError as exc:
                raise OSError(f"unreadable entry {entry.id!r}: {entry.path}") from exc
        return render_image(self.descriptor, entry.seed)

    def images(self, split=None):
        """Stack of the images in ``split`` (all entries if None), shape (k, h, w)."""
        entries = self.select(split)
        if not entries:
            raise ValueError(f"split {split!r} of {self.name!r} is empty")
        return np.stack([self.image(e) for e in entries])

    def phases(self, split=None, max_phase: float = DEFAULT_MAX_PHASE):
        return calibrate_to_phase(self.images(split), max_phase)

    def to_dict(self):
        return {
            "version": MANIFEST_VERSION,
            "descriptor": self.descriptor,
            "seed": self.seed,
            "entries": [e.to_dict() for e in self.entries],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def save(self, path):
        atomic_write_bytes(path, self.to_json().encode())

    @classmethod
    def from_dict(cls, d):
        if d.get("version") != MANIFEST_VERSION:
            raise ValueError(f"unsupported manifest version {d.get('version')!r}")
        entries = [Entry(e["id"], e["split"], e.get("seed"), e.get("path")) for e in d["entries"]]
        return cls(dict(d["descriptor"]), int(d["seed"]), entries)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _assign_splits(count, rng, ratios):
    if len(ratios) != 3 or min(ratios) < 0 or not sum(ratios) > 0:
        raise ValueError(f"ratios must be three non-negative shares, got {ratios!r}")
    total = float(sum(ratios))
    # a split that asks for a share gets at least one image once there are enough to go round
    sizes = [int(round(count * r / total)) for r in ratios[1:]]
    if count >= 3:
        sizes = [max(n, 1) if r > 0 else n for n, r in zip(sizes, ratios[1:])]
    n_val, n_test = sizes
    n_val = min(n_val, count - n_test)
    order = rng.permutation(count)
    splits = np.empty(count, dtype=object)
    splits[order[: count - n_val - n_test]] = "train"
    splits[order[count - n_val - n_test: count - n_test]] = "validation"
    splits[order[count - n_test:]] = "test"
    return splits


def generate_dataset(kind, seed, count, grid_n, ratios=(0.8, 0.1, 0.1), name=None):
    """Manifest for ``count`` images from a named generator (texture, glyph or layout)."""
    if kind not in _GENERATORS:
        raise ValueError(f"unknown generator kind {kind!r}")
    if count < 1:
        raise ValueError("count must be >= 1")
    ss = np.random.SeedSequence([int(seed), sorted(_GENERATORS).index(kind)])
    sub_seeds = [int(c.generate_state(1, dtype=np.uint64)[0] >> 1) for c in ss.spawn(count)]
    splits = _assign_splits(count, np.random.default_rng(ss.generate_state(2)), ratios)
    entries = [Entry(f"{kind}-{i:05d}", str(splits[i]), seed=sub_seeds[i]) for i in range(count)]
    descriptor = {"kind": kind, "grid_n": int(grid_n), "name": name or kind}
    return DatasetManifest(descriptor, int(seed), entries)


def gen_texture_dataset(seed, count, grid_n, **kw):
    """High-entropy stand-in for natural images: band-limited noise with a random cutoff."""
    return generate_dataset("texture", seed, count, grid_n, **kw)


def gen_glyph_dataset(seed, count, grid_n, **kw):
    """Low-entropy stand-in for handwritten digits: thick strokes on a dark background."""
    return generate_dataset("glyph", seed, count, grid_n, **kw)


def gen_layout_dataset(seed, count, grid_n, **kw):
    """Held-out piecewise-constant domain resembling IC layouts (dense axis-aligned bars)."""
    return generate_dataset("layout", seed, count, grid_n, **kw)


def manifest_from_files(paths, seed, sample=None, ratios=(0.8, 0.1, 0.1), name="files"):
    """Manifest over existing PGM files, optionally sub-sampled uniformly at random."""
    paths = sorted(str(p) for p in paths)
    if not paths:
        raise ValueError("no input files")
    rng = np.random.default_rng(seed)
    if sample is not None and sample < len(paths):
        keep = np.sort(rng.choice(len(paths), size=sample, replace=False))
        paths = [paths[i] for i in keep]
    splits = _assign_splits(len(paths), rng, ratios)
    entries = [Entry(f"{name}-{i:05d}", str(splits[i]), path=p) for i, p in enumerate(paths)]
    grid_n = load_pgm(paths[0]).shape[0]
    return DatasetManifest({"kind": "files", "grid_n": grid_n, "name": name}, int(seed), entries)


# --------------------------------------------------------------------------
# PGM

class PgmError(ValueError):
    pass


_PGM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n)*(\S+)")


def load_pgm(path):
    """Read a binary (P5) PGM with maxval 255 into a uint8 array."""
    data = Path(path).read_bytes()
    pos = 0
    fields = []
    for _ in range(4):
        m = _PGM_TOKEN.match(data, pos)
        if m is None:
            raise PgmError(f"{path}: malformed PGM header")
        fields.append(m.group(1))
        pos = m.end()
    magic, width, height, maxval = fields
    if magic != b"P5":
        raise PgmError(f"{path}: only binary P5 PGM is supported, got {magic!r}")
    try:
        width, height, maxval = int(width), int(height), int(maxval)
    except ValueError:
        raise PgmError(f"{path}: malformed PGM header") from None
    if width <= 0 or height <= 0:
        raise PgmError(f"{path}: non-positive image size")
    if maxval != 255:
        raise PgmError(f"{path}: maxval {maxval} unsupported (need 255)")
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise PgmError(f"{path}: missing whitespace after header")
    payload = data[pos + 1:]
    if len(payload) < width * height:
        raise PgmError(f"{path}: truncated payload ({len(payload)} of {width * height} bytes)")
    return np.frombuffer(payload[: width * height], dtype=np.uint8).reshape(height, width).copy()


def save_pgm(img, path, comment=None):
    img = np.asarray(img)
    if img.ndim != 2 or img.dtype != np.uint8:
        raise ValueError("save_pgm expects a 2-D uint8 array")
    note = "".join(f"# {line}\n" for line in comment.splitlines()) if comment else ""
    header = f"P5\n{note}{img.shape[1]} {img.shape[0]}\n255\n".encode()
    atomic_write_bytes(path, header + np.ascontiguousarray(img).tobytes())
