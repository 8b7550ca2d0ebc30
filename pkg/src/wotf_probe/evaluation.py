"""Reconstruction scores and the cross-domain generalization matrix."""

import io
from dataclasses import dataclass

import numpy as np

from ._util import atomic_write_text, map_ordered
from .datasets import DEFAULT_MAX_PHASE
from .network import npcc_value
from .optics import propagate

__all__ = [
    "pcc",
    "mae",
    "CellScore",
    "ScoreTable",
    "EvaluationError",
    "score_reconstructor",
    "cross_domain_matrix",
]


def pcc(est, truth) -> float:
    """Pearson correlation over all pixels; the negative of the training loss statistic."""
    return -npcc_value(est, truth)


def mae(est, truth) -> float:
    """Mean absolute pixel difference (radians for phase maps)."""
    est, truth = np.asarray(est, dtype=float), np.asarray(truth, dtype=float)
    if est.shape != truth.shape:
        raise ValueError(f"mae: shape mismatch {est.shape} vs {truth.shape}")
    return float(np.mean(np.abs(est - truth)))


class EvaluationError(RuntimeError):
    """A test sample could not be reconstructed or scored."""


@dataclass(frozen=True)
class CellScore:
    pcc_mean: float
    pcc_std: float
    mae_mean: float
    mae_std: float
    n: int

    def format(self):
        return f"{self.pcc_mean:.3f} ± {self.pcc_std:.3f}"


def score_reconstructor(reconstructor, manifest, optics, split="test",
                        max_phase: float = DEFAULT_MAX_PHASE, measurements=None,
                        label="") -> CellScore:
    """Reconstruct every image of ``split`` and summarize PCC and MAE (population std)."""
    entries = manifest.select(split)
    if not entries:
        raise EvaluationError(f"{label or manifest.name}: split {split!r} is empty")
    truths = manifest.phases(split, max_phase)
    g = propagate(truths, optics) if measurements is None else np.asarray(measurements)
    est = np.asarray(reconstructor(g), dtype=float)
    if est.shape != truths.shape:
        raise EvaluationError(f"{label}: reconstructor returned shape {est.shape}, "
                              f"expected {truths.shape}")

    def one(i):
        if not np.all(np.isfinite(est[i])):
            raise EvaluationError(f"{label}: non-finite reconstruction of {entries[i].id}")
        try:
            return pcc(est[i], truths[i]), mae(est[i], truths[i])
        except ValueError as exc:
            raise EvaluationError(f"{label}: cannot score {entries[i].id}: {exc}") from exc

    scores = np.array(map_ordered(one, range(len(entries))))
    return CellScore(float(scores[:, 0].mean()), float(scores[:, 0].std()),
                     float(scores[:, 1].mean()), float(scores[:, 1].std()), len(entries))


@dataclass
class ScoreTable:
    """Cells keyed by ``(train_set, test_set)``; row/column order is insertion order."""

    train_sets: list
    test_sets: list
    cells: dict

    def cell(self, train_set, test_set) -> CellScore:
        return self.cells[(train_set, test_set)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("train_set,test_set,metric,mean,std,n\n")
        for tr in self.train_sets:
            for te in self.test_sets:
                c = self.cells[(tr, te)]
                buf.write(f"{tr},{te},pcc,{c.pcc_mean:.10g},{c.pcc_std:.10g},{c.n}\n")
                buf.write(f"{tr},{te},mae,{c.mae_mean:.10g},{c.mae_std:.10g},{c.n}\n")
        return buf.getvalue()

    def save_csv(self, path):
        atomic_write_text(path, self.to_csv())

    def to_text(self) -> str:
        """Rows are test sets, columns training sets, cells ``PCC mean ± std``."""
        w = max(14, *(len(s) + 2 for s in self.train_sets))
        lines = [" " * 12 + "".join(f"{tr:>{w}}" for tr in self.train_sets)]
        for te in self.test_sets:
            lines.append(f"{te:<12}" + "".join(f"{self.cells[(tr, te)].format():>{w}}"
                                               for tr in self.train_sets))
        return "\n".join(lines) + "\n"

    def to_dict(self):
        return {f"{tr}->{te}": c.__dict__ for (tr, te), c in self.cells.items()}


def cross_domain_matrix(models, test_manifests, optics, split="test",
                        max_phase: float = DEFAULT_MAX_PHASE, noise_sigma: float = 0.0,
                        seed: int = 0) -> ScoreTable:
    """Score every model on every test manifest.

    ``models`` is a sequence of ``(train_set_name, reconstructor)`` pairs (or a
    dict).  Each neural reconstructor should already carry its fitted scale
    correction.  ``noise_sigma`` adds Gaussian detector noise relative to the
    mean intensity, drawn once per test set so every model sees the same data.
    """
    models = list(models.items()) if isinstance(models, dict) else list(models)
    names = [m[0] for m in models]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate model names {names}")
    cells = {}
    test_names = []
    for ti, tm in enumerate(test_manifests):
        test_names.append(tm.name)
        g = propagate(tm.phases(split, max_phase), optics)
        if noise_sigma > 0:
            rng = np.random.default_rng([seed, ti])
            g = g + noise_sigma * g.mean() * rng.standard_normal(g.shape)
        for name, rec in models:
            cells[(name, tm.name)] = score_reconstructor(rec, tm, optics, split, max_phase,
                                                         measurements=g,
                                                         label=f"{name} on {tm.name}")
    return ScoreTable(names, test_names, cells)
