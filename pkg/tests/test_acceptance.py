"""Acceptance criteria AC1 to AC11 at their stated tolerances.

Each test records a PASS/FAIL line (shown in the terminal summary) before
asserting.  The cross-domain criteria share six desk-scale networks (texture
and glyph, seeds 0 to 2) trained once per session; that fixture dominates the
runtime.
"""

import time

import numpy as np
import pytest

from oracles import gradient_check
from wotf_probe.datasets import entropy_report, generate_dataset, image_entropy
from wotf_probe.diagnostics import extract_lwotf, theory_lwotf
from wotf_probe.evaluation import cross_domain_matrix
from wotf_probe.experiments import (band_limited_phase, lwotf_probe_phases, lwotf_rmse,
                                    oracle_relative_error, registration_trials,
                                    star_null_report, star_reconstruction_report,
                                    train_domain_model, weak_object_residual)
from wotf_probe.network import TrainConfig, npcc_value
from wotf_probe.optics import OpticalConfig, linearized_forward
from wotf_probe.reconstructors import LinearInverse

SEEDS = (0, 1, 2)
DESK = OpticalConfig.equivalent(32)


def test_ac1_oracle_exactness(criterion):
    optics = OpticalConfig(grid_n=64)
    rng = np.random.default_rng(0)
    phases = [band_limited_phase(optics, rng) for _ in range(20)]
    t0 = time.perf_counter()
    errs = [oracle_relative_error(p, optics, eps=1e-6) for p in phases]
    per_call = (time.perf_counter() - t0) / len(phases)
    ok = max(errs) < 1e-3 and per_call < 1.0
    criterion("AC1", ok, f"max relative L2 {max(errs):.2e} (< 1e-3), {per_call * 1e3:.1f} ms "
                         "per inversion at 64x64 (< 1 s)")
    assert ok


def test_ac2_weak_object_validity(criterion):
    optics = OpticalConfig(grid_n=64)
    phases = np.concatenate([generate_dataset(k, 2, 10, 64, ratios=(0, 0, 1)).phases("test")
                             for k in ("texture", "glyph")])
    assert np.isclose(phases.max(), 0.1 * np.pi)
    res = np.array([weak_object_residual(p, optics) for p in phases])
    half = np.array([weak_object_residual(p / 2, optics) for p in phases])
    ratio = half / res
    ok = res.max() < 0.05 and np.all((ratio >= 0.2) & (ratio <= 0.3))
    criterion("AC2", ok, f"max residual {res.max():.4f} (< 0.05), halving ratio "
                         f"[{ratio.min():.4f}, {ratio.max():.4f}] (in [0.2, 0.3])")
    assert ok


def test_ac3_lwotf_identity(criterion):
    rng = np.random.default_rng(3)
    phases = rng.uniform(0, 0.1 * np.pi, (20, 32, 32))
    lw = extract_lwotf(lambda g: phases, linearized_forward(phases, DESK), DESK)
    diff = lw.grid[lw.valid_mask] - theory_lwotf(DESK)[lw.valid_mask]
    rmse = float(np.sqrt(np.mean(diff ** 2)))
    ok = rmse < 1e-10 and lw.valid_mask.sum() == 32 * 32 - 1
    criterion("AC3", ok, f"RMSE {rmse:.2e} over {lw.valid_mask.sum()} valid bins (< 1e-10)")
    assert ok


def test_ac4_entropy_calibration(criterion):
    const = image_entropy(np.full((32, 32), 9, np.uint8))
    binary = np.zeros((32, 32), np.uint8)
    binary[:, ::2] = 255
    full = np.arange(256, dtype=np.uint8).reshape(16, 16)
    tex = entropy_report(generate_dataset("texture", 4, 100, 32)).mean
    gly = entropy_report(generate_dataset("glyph", 4, 100, 32)).mean
    checks = [const == 0.0, image_entropy(binary) == 1.0, image_entropy(full) == 8.0,
              tex > 6.5, gly < 1.5]
    ok = all(checks)
    criterion("AC4", ok, f"constant {const:g}, binary {image_entropy(binary):.3f}, "
                         f"256-level {image_entropy(full):.3f} bits; texture mean {tex:.3f} "
                         f"(> 6.5), glyph mean {gly:.3f} (< 1.5)")
    assert ok


def test_ac5_gradient_correctness(criterion):
    t0 = time.perf_counter()
    results = [gradient_check(seed) for seed in range(10)]
    elapsed = time.perf_counter() - t0
    worst = max(r[0] for r in results)
    ok = worst < 1e-4 and elapsed < 120
    criterion("AC5", ok, f"worst relative error {worst:.2e} (< 1e-4) over 10 seeds, "
                         f"{results[0][1]} parameters each, {elapsed:.0f} s (< 120 s)")
    assert ok


def test_ac11_npcc_contract(criterion):
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(200):
        f = rng.standard_normal((32, 32))
        a, b = np.exp(rng.uniform(-5, 5)), rng.uniform(-100, 100)
        worst = max(worst, abs(npcc_value(f, f) + 1), abs(npcc_value(a * f + b, f) + 1))
    ok = worst < 1e-12
    criterion("AC11", ok, f"max |npcc + 1| = {worst:.1e} over 200 draws (< 1e-12)")
    assert ok


@pytest.mark.slow
def test_ac8_star_nulls(criterion):
    reports = {z: star_null_report(OpticalConfig(grid_n=256, defocus=z), periods=50)
               for z in (0.15, 0.30)}
    near, far = reports[0.15], reports[0.30]
    worst = max(near.max_error_px, far.max_error_px)
    pairs = [(k, r) for k, r in near.predicted if k in {kk for kk, _ in far.predicted}]
    ratios = []
    for k, _ in pairs:
        r_far = dict(far.predicted)[k]
        r_near = dict(near.predicted)[k]
        d_near = min(near.detected, key=lambda d: abs(d - r_near))
        d_far = min(far.detected, key=lambda d: abs(d - r_far))
        ratios.append(d_far / d_near)
    ok = (worst < 1.0 and len(near.predicted) >= 2 and len(ratios) >= 1
          and all(abs(r / np.sqrt(2) - 1) <= 0.02 for r in ratios))
    criterion("AC8", ok, f"max |detected - predicted| {worst:.2f} px (< 1) over "
                         f"k={[k for k, _ in near.predicted]} at 150 mm and "
                         f"k={[k for k, _ in far.predicted]} at 300 mm; doubling z ratio "
                         f"{', '.join(f'{r:.4f}' for r in ratios)} (sqrt 2 +- 2%)")
    assert ok


@pytest.mark.slow
def test_ac10_registration(criterion):
    runs = [registration_trials(10, seed) for seed in SEEDS]
    good = [sum(t.corner_error_px < 0.5 for t in run) for run in runs]
    mono = all(t.monotone for run in runs for t in run)
    worst = max(t.corner_error_px for run in runs for t in run)
    ok = all(g >= 9 for g in good) and mono
    criterion("AC10", ok, f"trials under 0.5 px per 10: {good} (>= 9), worst {worst:.3f} px, "
                          f"best-vertex history non-increasing on every run: {mono}")
    assert ok


# --------------------------------------------------------------------------
# trained-network criteria

@pytest.fixture(scope="session")
def domain_models():
    t0 = time.perf_counter()
    models = {}
    for seed in SEEDS:
        for kind in ("texture", "glyph"):
            models[kind, seed] = train_domain_model(kind, seed, DESK, count=250,
                                                    train_cfg=TrainConfig(epochs=30, seed=seed),
                                                    data_seed=100 + seed)
    return models, time.perf_counter() - t0


@pytest.mark.slow
def test_ac6_cross_domain_asymmetry(criterion, domain_models):
    models, train_time = domain_models
    t0 = time.perf_counter()
    gaps, rows = [], []
    for seed in SEEDS:
        n_train = len(models["texture", seed].manifest.select("train"))
        assert n_train == len(models["glyph", seed].manifest.select("train")) == 200
        tests = [generate_dataset(k, 900 + seed, 25, 32, ratios=(0, 0, 1))
                 for k in ("texture", "glyph")]
        table = cross_domain_matrix([(k, models[k, seed].reconstructor)
                                     for k in ("texture", "glyph")], tests, DESK)
        t2g = table.cell("texture", "glyph").pcc_mean
        g2t = table.cell("glyph", "texture").pcc_mean
        gaps.append(t2g - g2t)
        rows.append(f"seed {seed}: {t2g:.3f} vs {g2t:.3f}")
    total = train_time + time.perf_counter() - t0
    gap = float(np.mean(gaps))
    ok = gap >= 0.15 and total < 3600
    criterion("AC6", ok, f"mean PCC gap {gap:.3f} (>= 0.15); texture->glyph vs glyph->texture "
                         f"{'; '.join(rows)}; {total:.0f} s total (< 3600 s)")
    assert ok


@pytest.mark.slow
def test_ac7_lwotf_ordering(criterion, domain_models):
    # verdict on a fresh probe with equal parts of every domain; a texture-only probe is
    # reported alongside because it tilts the comparison towards the texture model
    models, _ = domain_models
    verdicts, rows, context = [], [], []
    for seed in SEEDS:
        mixed = lwotf_probe_phases(5000 + seed, 32, count=99)
        tex_only = lwotf_probe_phases(5000 + seed, 32, count=99, kinds=("texture",))
        r = {(k, p): lwotf_rmse(models[k, seed].reconstructor, probe, DESK)[0]
             for k in ("texture", "glyph") for p, probe in (("mixed", mixed), ("tex", tex_only))}
        verdicts.append(r["texture", "mixed"] < r["glyph", "mixed"])
        rows.append(f"seed {seed}: {r['texture', 'mixed']:.3f} vs {r['glyph', 'mixed']:.3f}")
        context.append(f"{r['texture', 'tex']:.3f} vs {r['glyph', 'tex']:.3f}")
    ok = all(verdicts)
    criterion("AC7", ok, "LWOTF RMSE below first null, texture vs glyph model on a mixed "
                         f"99-image probe: {'; '.join(rows)} (texture lower required for "
                         f"every seed); texture-only probe for reference: {'; '.join(context)}")
    assert ok


@pytest.mark.slow
def test_ac9_star_reconstruction(criterion, domain_models):
    models, _ = domain_models
    star = OpticalConfig(wavelength=DESK.wavelength, defocus=DESK.defocus,
                         pixel_pitch=DESK.pixel_pitch, grid_n=128)
    oracle = star_reconstruction_report(LinearInverse(star), star, periods=80)
    glyph = [star_reconstruction_report(models["glyph", s].reconstructor, star, periods=80)
             for s in SEEDS]
    ok = (oracle.flips_measured >= 1 and oracle.flips_reconstructed == 0
          and oracle.pcc_band > 0.9 and all(r.flips_reconstructed >= 1 for r in glyph))
    criterion("AC9", ok, f"measurement {oracle.flips_measured} flips; oracle "
                         f"{oracle.flips_reconstructed} flips, PCC {oracle.pcc_band:.3f} (> 0.9); "
                         f"glyph nets leave {[r.flips_reconstructed for r in glyph]} flips "
                         "(>= 1 each)")
    assert ok
