"""Train one network on textures and one on glyphs, then ask each about the other's domain.

The high-entropy texture set constrains the inverse map more tightly, so its
network generalizes better and its learned transfer function sits closer to
theory.  Run: python3 demos/03_cross_domain.py [epochs]   (30 epochs is about
two and a half minutes of CPU time.)
"""

import sys
import time

import numpy as np

from wotf_probe.datasets import entropy_report, generate_dataset
from wotf_probe.diagnostics import diagonal_profile, theory_lwotf
from wotf_probe.evaluation import cross_domain_matrix
from wotf_probe.experiments import lwotf_probe_phases, lwotf_rmse, train_domain_model
from wotf_probe.network import TrainConfig
from wotf_probe.optics import OpticalConfig, propagate
from wotf_probe.reconstructors import LinearInverse

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 30
optics = OpticalConfig.equivalent(32)

models = {}
for kind in ("texture", "glyph"):
    t0 = time.perf_counter()
    m = train_domain_model(kind, 0, optics, train_cfg=TrainConfig(epochs=epochs), data_seed=100)
    ent = entropy_report(m.manifest, split="train").mean
    print(f"{kind:8s} entropy {ent:.2f} bits, final NPCC {m.loss_history[-1]:.3f}, "
          f"{time.perf_counter() - t0:.0f} s")
    models[kind] = m.reconstructor

oracle = LinearInverse(optics)
fit = generate_dataset("texture", 7, 25, 32, ratios=(0, 0, 1)).phases("test")
oracle.calibrate(propagate(fit, optics), fit)

tests = [generate_dataset(k, 900, 25, 32, ratios=(0, 0, 1)) for k in ("texture", "glyph", "layout")]
table = cross_domain_matrix(list(models.items()) + [("oracle", oracle)], tests, optics)
print("\nPCC (rows: test set, columns: trained on)\n" + table.to_text())

probe = lwotf_probe_phases(5000, 32)  # 33 images from each domain
print("learned transfer function, main diagonal (theory first)")
f, th = diagonal_profile(theory_lwotf(optics))
print("  theory  " + " ".join(f"{v:+.1f}" for v in th[16:]))
for kind, rec in models.items():
    rmse, lw = lwotf_rmse(rec, probe, optics)
    _, v = diagonal_profile(lw.grid)
    print(f"  {kind:7s} " + " ".join("  nan" if np.isnan(x) else f"{x:+.1f}" for x in v[16:])
          + f"   RMSE below first null {rmse:.3f}")
