"""Affine registration by maximizing normalized mutual information with Nelder-Mead.

Coordinates are ``(x, y) = (column, row)`` in pixels.  An :class:`AffineParams`
describes the map ``T(p) = A (p - c) + c + t`` about the image centre ``c``;
``warp_affine(img, T)`` moves image content by ``T`` (it samples ``img`` at
``T^-1`` of every output pixel).
"""

import math
from dataclasses import astuple, dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

__all__ = [
    "AffineParams",
    "SimplexConfig",
    "NelderMeadResult",
    "warp_affine",
    "apply_affine",
    "compose",
    "nmi",
    "nelder_mead",
    "register",
    "corner_error",
]


@dataclass(frozen=True)
class AffineParams:
    a11: float = 1.0
    a12: float = 0.0
    a21: float = 0.0
    a22: float = 1.0
    tx: float = 0.0
    ty: float = 0.0

    @property
    def matrix(self):
        return np.array([[self.a11, self.a12], [self.a21, self.a22]])

    @property
    def translation(self):
        return np.array([self.tx, self.ty])

    def as_array(self):
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, x):
        return cls(*(float(v) for v in x))

    @classmethod
    def from_geometry(cls, angle_deg=0.0, scale=1.0, shift=(0.0, 0.0)):
        """Rotation (counter-clockwise in x/y) and isotropic scale about the centre, then a shift."""
        t = math.radians(angle_deg)
        c, s = scale * math.cos(t), scale * math.sin(t)
        return cls(c, -s, s, c, float(shift[0]), float(shift[1]))

    def inverse(self):
        a_inv = np.linalg.inv(self._checked_matrix())
        t = -a_inv @ self.translation
        return AffineParams(*a_inv.ravel(), *t)

    def _checked_matrix(self):
        m = self.matrix
        if abs(np.linalg.det(m)) <= 1e-6:
            raise ValueError(f"affine matrix is singular (det={np.linalg.det(m):.3g})")
        return m

    def to_dict(self):
        return dict(zip(("a11", "a12", "a21", "a22", "tx", "ty"), astuple(self)))


def _center(shape):
    return np.array([(shape[1] - 1) / 2.0, (shape[0] - 1) / 2.0])


def apply_affine(p: AffineParams, points, shape):
    """Map (k, 2) points ``(x, y)`` through ``p`` for an image of ``shape``."""
    c = _center(shape)
    pts = np.asarray(points, dtype=float)
    return (pts - c) @ p.matrix.T + c + p.translation


def compose(outer: AffineParams, inner: AffineParams) -> AffineParams:
    """The map ``outer(inner(x))``; both act about the same centre."""
    a = outer.matrix @ inner.matrix
    t = outer.matrix @ inner.translation + outer.translation
    return AffineParams(*a.ravel(), *t)


def warp_affine(img, p: AffineParams):
    """Resample ``img`` so its content moves by ``p``; bilinear, zero outside the input."""
    img = np.asarray(img, dtype=float)
    h, w = img.shape
    a_inv = np.linalg.inv(p._checked_matrix())
    c = _center(img.shape)
    yy, xx = np.mgrid[0:h, 0:w].astype(float)
    dx, dy = xx - c[0] - p.tx, yy - c[1] - p.ty
    sx = a_inv[0, 0] * dx + a_inv[0, 1] * dy + c[0]
    sy = a_inv[1, 0] * dx + a_inv[1, 1] * dy + c[1]
    # tolerate round-off on the border so the identity warp is exact
    tol = 1e-9
    inside = (sx >= -tol) & (sx <= w - 1 + tol) & (sy >= -tol) & (sy <= h - 1 + tol)
    sx, sy = np.clip(sx, 0, w - 1), np.clip(sy, 0, h - 1)
    x0 = np.minimum(np.floor(sx).astype(int), w - 2)
    y0 = np.minimum(np.floor(sy).astype(int), h - 2)
    fx, fy = sx - x0, sy - y0
    out = ((1 - fy) * ((1 - fx) * img[y0, x0] + fx * img[y0, x0 + 1])
           + fy * ((1 - fx) * img[y0 + 1, x0] + fx * img[y0 + 1, x0 + 1]))
    return np.where(inside, out, 0.0)


def _bin(img, n_bins):
    lo, hi = img.min(), img.max()
    if hi <= lo:
        raise ValueError("nmi undefined for a constant image (zero marginal entropy)")
    return np.minimum(((img - lo) * (n_bins / (hi - lo))).astype(int), n_bins - 1)


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return -np.sum(p * np.log(p))


def nmi(a, b, n_bins: int = 64) -> float:
    """Normalized mutual information ``(H(A) + H(B)) / H(A, B)``, in [1, 2]."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"nmi: shape mismatch {a.shape} vs {b.shape}")
    ia, ib = _bin(a.ravel(), n_bins), _bin(b.ravel(), n_bins)
    joint = np.bincount(ia * n_bins + ib, minlength=n_bins * n_bins).reshape(n_bins, n_bins)
    h_ab = _entropy(joint.ravel())
    return float((_entropy(joint.sum(axis=1)) + _entropy(joint.sum(axis=0))) / h_ab)


@dataclass(frozen=True)
class SimplexConfig:
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    max_iter: int = 2000
    x_tol: float = 1e-6
    f_tol: float = 1e-10

    def __post_init__(self):
        if not (self.reflection > 0 and self.expansion > 1
                and 0 < self.contraction < 1 and 0 < self.shrink < 1):
            raise ValueError("simplex coefficients out of range")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class NelderMeadResult:
    x: np.ndarray
    fun: float
    n_iter: int
    n_eval: int
    converged: bool
    history: list = field(default_factory=list)


def nelder_mead(objective, init, cfg: SimplexConfig = SimplexConfig(), step=None):
    """Minimize ``objective`` with the downhill simplex method.

    ``init`` is an array (or :class:`AffineParams`); ``step`` gives the initial
    simplex edge along each coordinate (default 5% of ``|init|``, or 0.00025
    for zero entries).  ``history`` records the best value after every
    iteration and never increases.
    """
    x0 = init.as_array() if isinstance(init, AffineParams) else np.asarray(init, dtype=float)
    n = x0.size
    if step is None:
        step = np.where(x0 != 0, 0.05 * np.abs(x0), 0.00025)
    step = np.broadcast_to(np.asarray(step, dtype=float), (n,))
    n_eval = 0

    def f(x):
        nonlocal n_eval
        n_eval += 1
        y = float(objective(x))
        if not np.isfinite(y):
            raise FloatingPointError(f"objective is not finite at {x.tolist()}: {y}")
        return y

    sim = np.vstack([x0, x0 + np.diag(step)])
    fs = np.array([f(x) for x in sim])
    history = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        order = np.argsort(fs, kind="stable")
        sim, fs = sim[order], fs[order]
        history.append(fs[0])
        if (np.max(np.abs(sim[1:] - sim[0])) <= cfg.x_tol
                and np.max(np.abs(fs[1:] - fs[0])) <= cfg.f_tol):
            converged = True
            break
        centroid = sim[:-1].mean(axis=0)
        xr = centroid + cfg.reflection * (centroid - sim[-1])
        fr = f(xr)
        if fr < fs[0]:
            xe = centroid + cfg.expansion * (xr - centroid)
            fe = f(xe)
            sim[-1], fs[-1] = (xe, fe) if fe < fr else (xr, fr)
            continue
        if fr < fs[-2]:
            sim[-1], fs[-1] = xr, fr
            continue
        if fr < fs[-1]:
            xc = centroid + cfg.contraction * (xr - centroid)
            fc = f(xc)
            if fc <= fr:
                sim[-1], fs[-1] = xc, fc
                continue
        else:
            xc = centroid + cfg.contraction * (sim[-1] - centroid)
            fc = f(xc)
            if fc < fs[-1]:
                sim[-1], fs[-1] = xc, fc
                continue
        sim[1:] = sim[0] + cfg.shrink * (sim[1:] - sim[0])
        fs[1:] = [f(x) for x in sim[1:]]
    best = int(np.argmin(fs))
    if not history or fs[best] < history[-1]:
        history.append(float(fs[best]))
    return NelderMeadResult(sim[best].copy(), float(fs[best]), it, n_eval, converged, history)


_REGISTER_STEP = np.array([0.02, 0.02, 0.02, 0.02, 2.0, 2.0])


def register(moving, fixed, cfg: SimplexConfig = SimplexConfig(max_iter=600, x_tol=1e-4,
                                                                f_tol=1e-7),
             n_bins: int = 64, margin=None, restarts: int = 3, blur=(2.0, 1.0, 0.0),
             trace=None) -> AffineParams:
    """Affine map that best aligns ``moving`` onto ``fixed`` (maximum NMI), from identity.

    NMI is scored on the interior, ``margin`` pixels in from every edge
    (default: one eighth of the smaller side), so zero fill from out-of-bounds
    samples does not dominate the joint histogram.  The search runs coarse to
    fine: both images are Gaussian blurred with each sigma in ``blur`` in turn
    (widening the capture range on fine textures), each stage starting from
    the previous optimum.  Within a stage the simplex is rebuilt around the
    best point up to ``restarts`` times while that keeps improving.  Pass a
    list as ``trace`` to collect every :class:`NelderMeadResult`.
    """
    moving, fixed = np.asarray(moving, dtype=float), np.asarray(fixed, dtype=float)
    if moving.shape != fixed.shape:
        raise ValueError(f"register: shape mismatch {moving.shape} vs {fixed.shape}")
    m = min(fixed.shape) // 8 if margin is None else int(margin)
    inner = (slice(m, fixed.shape[0] - m), slice(m, fixed.shape[1] - m))
    x = AffineParams().as_array()
    for sigma in blur:
        mov = gaussian_filter(moving, sigma) if sigma > 0 else moving
        ref = (gaussian_filter(fixed, sigma) if sigma > 0 else fixed)[inner]

        def objective(v, mov=mov, ref=ref):
            p = AffineParams.from_array(v)
            if abs(np.linalg.det(p.matrix)) <= 1e-6:
                return 0.0
            return -nmi(warp_affine(mov, p)[inner], ref, n_bins)

        best = np.inf
        for attempt in range(restarts + 1):
            res = nelder_mead(objective, x, cfg, step=_REGISTER_STEP * (0.5 ** attempt))
            if trace is not None:
                trace.append(res)
            improved = res.fun < best - cfg.f_tol
            if res.fun < best:
                x, best = res.x, res.fun
            if not improved:
                break
    return AffineParams.from_array(x)


def corner_error(recovered: AffineParams, planted: AffineParams, shape) -> float:
    """Mean distance the four image corners end up from home after ``recovered`` undoes ``planted``."""
    h, w = shape
    corners = np.array([[0, 0], [w - 1, 0], [0, h - 1], [w - 1, h - 1]], dtype=float)
    moved = apply_affine(compose(recovered, planted), corners, shape)
    return float(np.mean(np.hypot(*(moved - corners).T)))
