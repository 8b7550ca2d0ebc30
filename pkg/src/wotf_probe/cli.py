"""``wotf-probe``: generate data, train, probe and score phase reconstructors from the shell.

Every subcommand writes only below ``--out`` and finishes by writing
``produced.json`` (relative path, size and SHA-256 of each output file).  On
failure an ``error.json`` record is written instead, the same JSON is printed
on stderr and the exit status is nonzero (2 for bad configuration or usage, 1
otherwise).
"""

import argparse
import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from ._util import atomic_write_text
from .datasets import (DEFAULT_MAX_PHASE, DatasetManifest, PgmError, entropy_report,
                       generate_dataset, load_pgm, manifest_from_files, save_pgm)
from .diagnostics import (StarPattern, detect_discontinuities, diagonal_profile, extract_lwotf,
                          lwotf_fidelity, make_star, predict_null_radii, usable_radii,
                          write_profile_csv, write_radii_csv)
from .evaluation import cross_domain_matrix
from .experiments import (band_limited_phase, lwotf_probe_phases, oracle_relative_error,
                          registration_trials, star_null_report, star_reconstruction_report,
                          weak_object_residual)
from .gridio import GridFormatError, read_grid, write_grid, write_preview
from .network import (CheckpointError, NetworkConfig, TrainConfig, build_network,
                      load_checkpoint, save_checkpoint, train)
from .optics import OpticalConfig, linearized_forward, propagate
from .reconstructors import DEFAULT_EPS_NONLINEAR, LinearInverse, NeuralReconstructor
from .registration import register, warp_affine

KINDS = ("texture", "glyph", "layout")


class ConfigError(ValueError):
    def __init__(self, field_name, reason):
        super().__init__(f"{field_name}: {reason}")
        self.field = field_name
        self.reason = reason


class UsageError(ValueError):
    pass


# --------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class DataConfig:
    train_kinds: tuple = ("texture", "glyph")
    test_kinds: tuple = KINDS
    count: int = 250
    test_count: int = 25
    lwotf_count: int = 99
    max_phase: float = DEFAULT_MAX_PHASE

    def validate(self):
        for name in ("train_kinds", "test_kinds"):
            bad = [k for k in getattr(self, name) if k not in KINDS]
            if bad:
                raise ConfigError(f"data.{name}", f"unknown kinds {bad}; choose from {KINDS}")
        for name in ("count", "test_count", "lwotf_count"):
            if getattr(self, name) < 3:
                raise ConfigError(f"data.{name}", "must be at least 3")
        if not 0 < self.max_phase <= np.pi:
            raise ConfigError("data.max_phase", "must lie in (0, pi]")


@dataclass(frozen=True)
class DiagnosticsConfig:
    eps: float = DEFAULT_EPS_NONLINEAR
    mask_threshold: float = 1e-6
    star_periods: int = 80
    star_grid_n: int = 128
    null_periods: int = 50
    null_grid_n: int = 256
    null_defocus: float = 0.15
    max_walkoff: float = 0.3

    def validate(self):
        for name in ("eps", "mask_threshold", "null_defocus", "max_walkoff"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"diagnostics.{name}", "must be positive")
        for name in ("star_periods", "null_periods"):
            if getattr(self, name) < 4:
                raise ConfigError(f"diagnostics.{name}", "must be at least 4")


@dataclass(frozen=True)
class ExperimentConfig:
    scale: str = "desk"
    seed: int = 0
    out: str = "wotf_out"
    noise_sigma: float = 0.0
    optics: OpticalConfig = field(default_factory=lambda: OpticalConfig.equivalent(32))
    data: DataConfig = DataConfig()
    network: NetworkConfig = NetworkConfig()
    train: TrainConfig = TrainConfig()
    diagnostics: DiagnosticsConfig = DiagnosticsConfig()

    def validate(self):
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma", "must be >= 0")
        if self.seed < 0:
            raise ConfigError("seed", "must be a non-negative integer")
        if self.network.input_side != self.optics.grid_n:
            raise ConfigError("network.input_side",
                              f"{self.network.input_side} != optics.grid_n {self.optics.grid_n}")
        for name, section in (("network", self.network), ("train", self.train)):
            try:
                section.validate()
            except ValueError as exc:
                raise ConfigError(name, str(exc)) from None
        self.data.validate()
        self.diagnostics.validate()
        return self

    def to_dict(self):
        return dataclasses.asdict(self)


def scale_defaults(scale: str) -> ExperimentConfig:
    if scale == "desk":
        return ExperimentConfig()
    if scale == "full":
        return ExperimentConfig(
            scale="full", optics=OpticalConfig.full_size(),
            network=NetworkConfig(input_side=256),
            diagnostics=DiagnosticsConfig(star_periods=50, star_grid_n=256))
    raise ConfigError("scale", f"unknown scale {scale!r}")


def _coerce(value, default, name):
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, str):
        ok = isinstance(value, str)
    elif isinstance(default, tuple):
        ok = isinstance(value, list) and all(isinstance(v, str) for v in value)
        value = tuple(value) if ok else value
    else:
        ok = False
    if not ok:
        raise ConfigError(name, f"expected {type(default).__name__}, got {value!r}")
    return value


def _merge(obj, overrides: dict, prefix=""):
    if not isinstance(overrides, dict):
        raise ConfigError(prefix.rstrip(".") or "config", "expected a JSON object")
    fields = {f.name for f in dataclasses.fields(obj)}
    unknown = sorted(set(overrides) - fields)
    if unknown:
        raise ConfigError(prefix + unknown[0], "unknown key")
    changes = {}
    for key, value in overrides.items():
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current):
            changes[key] = _merge(current, value, f"{prefix}{key}.")
        else:
            changes[key] = _coerce(value, current, prefix + key)
    try:
        return dataclasses.replace(obj, **changes)
    except ValueError as exc:
        raise ConfigError(prefix.rstrip(".") or "config", str(exc)) from None


def load_config(path=None, scale=None, seed=None, out=None) -> ExperimentConfig:
    """Defaults for the scale, then the JSON file, then command-line overrides; validated."""
    raw = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("--config", f"{path} is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config", "expected a JSON object")
    chosen = scale or raw.get("scale", "desk")
    if not isinstance(chosen, str):
        raise ConfigError("scale", "expected a string")
    cfg = _merge(scale_defaults(chosen), raw)
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed, train=dataclasses.replace(cfg.train, seed=seed))
    if out is not None:
        cfg = dataclasses.replace(cfg, out=str(out))
    return cfg.validate()


# --------------------------------------------------------------------------
# output bookkeeping

class Outputs:
    def __init__(self, root):
        self.root = Path(root)
        self.files = []

    def path(self, rel):
        p = self.root / rel
        self.files.append(p)
        return p

    def json(self, rel, obj):
        atomic_write_text(self.path(rel), json.dumps(obj, indent=1, sort_keys=True) + "\n")

    def text(self, rel, text):
        atomic_write_text(self.path(rel), text)

    def grid(self, rel, grid, label):
        write_grid(self.path(rel + ".wpgd"), grid)
        write_preview(self.path(rel + ".preview.pgm"), grid, label)

    def finish(self):
        records = []
        for p in sorted(set(self.files)):
            data = p.read_bytes()
            records.append({"path": p.relative_to(self.root).as_posix(), "bytes": len(data),
                            "sha256": hashlib.sha256(data).hexdigest()})
        atomic_write_text(self.root / "produced.json",
                          json.dumps({"version": __version__, "files": records},
                                     indent=1, sort_keys=True) + "\n")
        return records


def _log(msg):
    print(msg, file=sys.stderr, flush=True)


# --------------------------------------------------------------------------
# shared loaders

def _load_manifest(path):
    try:
        return DatasetManifest.load(path)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot read manifest: {exc.strerror}", str(path)) from None


def _model_record(path):
    path = Path(path)
    rec = json.loads(path.read_text())
    missing = {"checkpoint", "affine", "train_set"} - set(rec)
    if missing:
        raise UsageError(f"{path}: model record lacks {sorted(missing)}")
    return rec, path.parent / rec["checkpoint"]


def _load_model(path):
    rec, ckpt = _model_record(path)
    return rec["train_set"], NeuralReconstructor(load_checkpoint(ckpt), tuple(rec["affine"]),
                                                 kind=rec["train_set"])


def _reconstructor(args, cfg, optics):
    if getattr(args, "model", None):
        return _load_model(args.model)
    return "oracle", LinearInverse(optics, cfg.diagnostics.eps)


def _noisy(g, sigma, seed):
    if sigma <= 0:
        return g
    rng = np.random.default_rng([seed, 7])
    return g + sigma * g.mean() * rng.standard_normal(g.shape)


# --------------------------------------------------------------------------
# subcommands

def cmd_gen_data(args, cfg, out):
    if args.from_files:
        m = manifest_from_files(args.from_files, cfg.seed, sample=args.count,
                                name=args.name or "files")
    else:
        if args.kind is None:
            raise UsageError("gen-data needs --kind or --from-files")
        m = generate_dataset(args.kind, cfg.seed, args.count or cfg.data.count,
                             cfg.optics.grid_n, name=args.name)
    out.text(f"{m.name}.manifest.json", m.to_json() + "\n")
    for e in m.entries[:args.previews]:
        save_pgm(m.image(e), out.path(f"previews/{e.id}.pgm"))
    _log(f"{m.name}: {len(m.entries)} images "
         f"({', '.join(f'{s}={len(m.select(s))}' for s in ('train', 'validation', 'test'))})")


def cmd_entropy(args, cfg, out):
    m = _load_manifest(args.manifest)
    rep = entropy_report(m, split=args.split)
    out.json("entropy.json", {"dataset": m.name, "split": args.split, "n": len(rep.per_image_bits),
                              "mean_bits": rep.mean, "std_bits": rep.std_dev,
                              "per_image_bits": list(rep.per_image_bits)})
    lines = ["bin_left,bin_right,count"] + [
        f"{a:.6g},{b:.6g},{int(c)}"
        for a, b, c in zip(rep.bin_edges[:-1], rep.bin_edges[1:], rep.histogram)]
    out.text("entropy_hist.csv", "\n".join(lines) + "\n")
    print(f"{m.name}: mean entropy {rep.mean:.3f} ± {rep.std_dev:.3f} bits")


def cmd_simulate(args, cfg, out):
    optics = cfg.optics
    forward = linearized_forward if args.linearized else propagate
    sigma = cfg.noise_sigma if args.noise_sigma is None else args.noise_sigma
    if args.phase:
        phase = read_grid(args.phase)
        if phase.shape != (optics.grid_n, optics.grid_n):
            optics = dataclasses.replace(optics, grid_n=phase.shape[0]) \
                if phase.shape[0] == phase.shape[1] else None
            if optics is None:
                raise UsageError(f"{args.phase}: phase grid must be square, got {phase.shape}")
        g = _noisy(forward(phase, optics), sigma, cfg.seed)
        out.grid("intensity", g, "intensity")
        return
    if not args.manifest:
        raise UsageError("simulate needs --phase or --manifest")
    m = _load_manifest(args.manifest)
    entries = m.select(args.split)
    phases = m.phases(args.split, cfg.data.max_phase)
    g = _noisy(forward(phases, optics), sigma, cfg.seed)
    for e, ph, gi in zip(entries, phases, g):
        out.grid(f"{m.name}/{e.id}.phase", ph, f"phase rad {e.id}")
        out.grid(f"{m.name}/{e.id}.intensity", gi, f"intensity {e.id}")


def _write_model(out, prefix, model_net, affine, train_set, optics, history):
    save_checkpoint(model_net, out.path(f"{prefix}checkpoint.wpnn"))
    out.json(f"{prefix}model.json", {"checkpoint": "checkpoint.wpnn", "affine": list(affine),
                                     "train_set": train_set, "optics": dataclasses.asdict(optics)})
    out.text(f"{prefix}loss.csv", "epoch,npcc\n" + "".join(
        f"{i + 1},{v:.10g}\n" for i, v in enumerate(history)))


def cmd_train(args, cfg, out):
    m = _load_manifest(args.manifest)
    net = build_network(cfg.network, seed=cfg.seed)
    sigma = cfg.noise_sigma if args.noise_sigma is None else args.noise_sigma
    res = train(net, m, cfg.optics, cfg.train, max_phase=cfg.data.max_phase,
                noise_sigma=sigma, log=_log)
    rec = NeuralReconstructor(net, kind=m.name)
    truths = m.phases("validation", cfg.data.max_phase)
    rec.calibrate(propagate(truths, cfg.optics), truths)
    _write_model(out, "", net, rec.affine, m.name, cfg.optics, res.loss_history)


def cmd_reconstruct(args, cfg, out):
    g = read_grid(args.input)
    optics = dataclasses.replace(cfg.optics, grid_n=g.shape[0])
    _, rec = _reconstructor(args, cfg, optics)
    out.grid("phase", rec(g), "reconstructed phase rad")


def cmd_lwotf(args, cfg, out):
    name, rec = _reconstructor(args, cfg, cfg.optics)
    if args.manifest:
        m = _load_manifest(args.manifest)
        phases = m.phases(args.split, cfg.data.max_phase)
    else:
        phases = lwotf_probe_phases(cfg.seed + 10_000, cfg.optics.grid_n, cfg.data.lwotf_count,
                                    max_phase=cfg.data.max_phase)
    lw = extract_lwotf(rec, propagate(phases, cfg.optics), cfg.optics,
                       cfg.diagnostics.mask_threshold)
    _emit_lwotf(out, "", name, lw, cfg.optics)


def _emit_lwotf(out, prefix, name, lw, optics):
    out.grid(f"{prefix}lwotf_{name}", np.nan_to_num(lw.grid), f"learned transfer {name}")
    for anti in (False, True):
        f, v = diagonal_profile(lw.grid, optics, anti=anti)
        write_profile_csv(out.path(f"{prefix}lwotf_{name}_{'anti' if anti else 'diag'}.csv"), f, v)
    rmse = lwotf_fidelity(lw, optics)
    out.json(f"{prefix}lwotf_{name}.json", {"model": name, "n_images": lw.n_images,
                                            "rmse_below_first_null": rmse})
    return rmse


def cmd_star_test(args, cfg, out):
    grid_n = args.grid_n or cfg.diagnostics.star_grid_n
    periods = args.periods or cfg.diagnostics.star_periods
    optics = dataclasses.replace(cfg.optics, grid_n=grid_n)
    if args.defocus:
        optics = optics.with_defocus(args.defocus)
    truth = make_star(StarPattern(periods=periods), optics)
    g = propagate(truth, optics)
    out.grid("star_phase", truth, "star phase rad")
    out.grid("star_intensity", g, "star intensity")
    lo, hi = usable_radii(optics, periods, max_walkoff=cfg.diagnostics.max_walkoff)
    predicted = predict_null_radii(optics, periods, r_min=lo, r_max=hi)
    write_radii_csv(out.path("radii_predicted.csv"), [r for _, r in predicted],
                    [k for k, _ in predicted])
    detected = detect_discontinuities(g, periods, optics, lo, hi)
    write_radii_csv(out.path("radii_detected.csv"), detected)
    summary = {"periods": periods, "grid_n": grid_n, "defocus_m": optics.defocus,
               "window_m": [lo, hi], "predicted_m": [r for _, r in predicted],
               "detected_m": detected}
    if args.model or args.oracle:
        name, rec = _reconstructor(args, cfg, optics)
        out.grid(f"star_recon_{name}", rec(g), f"star reconstruction {name}")
        summary["reconstruction"] = {name: star_reconstruction_report(rec, optics,
                                                                      periods).to_dict()}
    out.json("star.json", summary)


def cmd_register(args, cfg, out):
    moving = load_pgm(args.moving).astype(float)
    fixed = load_pgm(args.fixed).astype(float)
    p = register(moving, fixed)
    out.json("affine.json", p.to_dict())
    warped = np.clip(np.round(warp_affine(moving, p)), 0, 255).astype(np.uint8)
    save_pgm(warped, out.path("warped.pgm"))


def _calibrated_oracle(cfg, optics):
    """Regularized inverse whose scale (mainly the unseen mean phase) is fitted on fresh textures."""
    lin = LinearInverse(optics, cfg.diagnostics.eps)
    ph = generate_dataset("texture", cfg.seed + 40_000, cfg.data.test_count, optics.grid_n,
                          ratios=(0, 0, 1), name="oracle-fit").phases("test", cfg.data.max_phase)
    lin.calibrate(propagate(ph, optics), ph)
    return lin


def cmd_evaluate(args, cfg, out):
    models = [_load_model(p) for p in args.model or []]
    if args.oracle or not models:
        models.append(("oracle", _calibrated_oracle(cfg, cfg.optics)))
    tests = [_load_manifest(p) for p in args.test]
    sigma = cfg.noise_sigma if args.noise_sigma is None else args.noise_sigma
    table = cross_domain_matrix(models, tests, cfg.optics, split=args.split,
                                max_phase=cfg.data.max_phase, noise_sigma=sigma, seed=cfg.seed)
    table.save_csv(out.path("scores.csv"))
    out.text("scores.txt", table.to_text())
    print(table.to_text(), end="")


def cmd_reproduce(args, cfg, out):
    """Full pipeline at one seed, ending in a pass/fail summary of the checkable criteria."""
    optics, d = cfg.optics, cfg.data
    checks = []

    def check(label, value, ok, detail=""):
        checks.append({"criterion": label, "value": value, "pass": bool(ok), "detail": detail})
        _log(f"[{'PASS' if ok else 'FAIL'}] {label}: {value} {detail}".rstrip())

    rng = np.random.default_rng(cfg.seed)
    lin_optics = OpticalConfig(grid_n=64)
    errs = [oracle_relative_error(band_limited_phase(lin_optics, rng), lin_optics)
            for _ in range(5)]
    check("oracle exactness", max(errs), max(errs) < 1e-3, "(max relative L2, < 1e-3)")

    probe = generate_dataset("texture", cfg.seed + 20_000, 5, lin_optics.grid_n,
                             ratios=(0, 0, 1), name="weak-probe").phases("test")
    res = [weak_object_residual(p, lin_optics) for p in probe]
    ratios = [weak_object_residual(p / 2, lin_optics) / r for p, r in zip(probe, res)]
    check("weak-object residual", max(res), max(res) < 0.05, "(< 0.05)")
    check("weak-object quadratic scaling", [min(ratios), max(ratios)],
          all(0.2 <= r <= 0.3 for r in ratios), "(in [0.2, 0.3])")

    manifests = {}
    for kind in sorted(set(d.train_kinds) | {"texture", "glyph"}):
        manifests[kind] = generate_dataset(kind, cfg.seed, d.count, optics.grid_n)
        out.text(f"data/{kind}.manifest.json", manifests[kind].to_json() + "\n")
    ent = {}
    for kind in ("texture", "glyph"):
        rep = entropy_report(manifests[kind])
        ent[kind] = rep.mean
        out.json(f"entropy/{kind}.json", {"mean_bits": rep.mean, "std_bits": rep.std_dev,
                                          "n": len(rep.per_image_bits)})
    check("entropy texture mean", ent["texture"], ent["texture"] > 6.5, "(> 6.5 bits)")
    check("entropy glyph mean", ent["glyph"], ent["glyph"] < 1.5, "(< 1.5 bits)")

    models = {}
    for kind in d.train_kinds:
        _log(f"training on {kind}")
        net = build_network(cfg.network, seed=cfg.seed)
        hist = train(net, manifests[kind], optics, cfg.train, max_phase=d.max_phase,
                     noise_sigma=cfg.noise_sigma, log=_log).loss_history
        rec = NeuralReconstructor(net, kind=kind)
        val = manifests[kind].phases("validation", d.max_phase)
        rec.calibrate(propagate(val, optics), val)
        _write_model(out, f"models/{kind}/", net, rec.affine, kind, optics, hist)
        models[kind] = rec

    lw_phases = lwotf_probe_phases(cfg.seed + 10_000, optics.grid_n, d.lwotf_count,
                                   max_phase=d.max_phase)
    g_lw = propagate(lw_phases, optics)
    rmse = {}
    for kind, rec in models.items():
        lw = extract_lwotf(rec, g_lw, optics, cfg.diagnostics.mask_threshold)
        rmse[kind] = _emit_lwotf(out, "lwotf/", kind, lw, optics)
    if {"texture", "glyph"} <= set(rmse):
        check("LWOTF fidelity ordering", rmse, rmse["texture"] < rmse["glyph"],
              "(texture RMSE < glyph RMSE)")

    nulls = {}
    for z in (cfg.diagnostics.null_defocus, 2 * cfg.diagnostics.null_defocus):
        o = OpticalConfig(wavelength=optics.wavelength, defocus=z,
                          pixel_pitch=optics.pixel_pitch, grid_n=cfg.diagnostics.null_grid_n)
        nulls[z] = star_null_report(o, cfg.diagnostics.null_periods, cfg.diagnostics.max_walkoff)
        out.json(f"star/nulls_z{z * 1000:g}mm.json", nulls[z].to_dict())
    near, far = nulls.values()
    worst = max(near.max_error_px, far.max_error_px)
    check("star null radii", worst, worst < 1.0, "(max |detected - predicted| px, < 1)")
    pairs = [(r1, r2) for k1, r1 in near.predicted for k2, r2 in far.predicted if k1 == k2]
    if pairs:
        det = [(min(near.detected, key=lambda x: abs(x - r1)),
                min(far.detected, key=lambda x: abs(x - r2))) for r1, r2 in pairs]
        ratio = [b / a for a, b in det]
        check("star radii scale sqrt(2) on doubling z", ratio,
              all(abs(r / np.sqrt(2) - 1) <= 0.02 for r in ratio), "(within 2%)")

    star_optics = dataclasses.replace(optics, grid_n=cfg.diagnostics.star_grid_n)
    lin = LinearInverse(star_optics, cfg.diagnostics.eps)
    o_rep = star_reconstruction_report(lin, star_optics, cfg.diagnostics.star_periods)
    star = {"oracle": o_rep.to_dict()}
    check("star oracle removes flips", o_rep.to_dict(),
          o_rep.flips_reconstructed == 0 and o_rep.pcc_band > 0.9, "(0 flips, PCC > 0.9)")
    if "glyph" in models:
        gr = star_reconstruction_report(models["glyph"], star_optics,
                                        cfg.diagnostics.star_periods)
        star["glyph"] = gr.to_dict()
        check("star glyph net leaves a flip", gr.to_dict(), gr.flips_reconstructed >= 1,
              "(>= 1 flip)")
    out.json("star/reconstruction.json", star)

    tests = [generate_dataset(k, cfg.seed + 30_000, d.test_count, optics.grid_n,
                              ratios=(0, 0, 1)) for k in d.test_kinds]
    lin = _calibrated_oracle(cfg, optics)
    table = cross_domain_matrix(list(models.items()) + [("oracle", lin)], tests, optics,
                                max_phase=d.max_phase, noise_sigma=cfg.noise_sigma,
                                seed=cfg.seed)
    table.save_csv(out.path("scores.csv"))
    out.text("scores.txt", table.to_text())
    if {"texture", "glyph"} <= set(models) and {"texture", "glyph"} <= set(table.test_sets):
        gap = (table.cell("texture", "glyph").pcc_mean
               - table.cell("glyph", "texture").pcc_mean)
        check("cross-domain asymmetry", gap, gap >= 0.15,
              "(PCC texture->glyph minus glyph->texture, >= 0.15)")

    trials = registration_trials(10, cfg.seed)
    out.json("registration.json", [{"planted": t.planted.to_dict(),
                                    "recovered": t.recovered.to_dict(),
                                    "corner_error_px": t.corner_error_px,
                                    "monotone": t.monotone} for t in trials])
    good = sum(t.corner_error_px < 0.5 for t in trials)
    check("registration recovery", good, good >= 9, "(trials of 10 under 0.5 px, >= 9)")
    check("simplex best value non-increasing", all(t.monotone for t in trials),
          all(t.monotone for t in trials))

    out.json("summary.json", {"scale": cfg.scale, "seed": cfg.seed, "checks": checks})
    lines = [f"{'PASS' if c['pass'] else 'FAIL'}  {c['criterion']}" for c in checks]
    out.text("summary.txt", "\n".join(lines) + "\n")
    print(table.to_text() + "\n" + "\n".join(lines))


# --------------------------------------------------------------------------
# entry point

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config (unknown keys are rejected)")
    common.add_argument("--seed", type=int, help="global seed (also seeds training)")
    common.add_argument("--out", help="output directory (default from config: wotf_out)")
    common.add_argument("--scale", choices=("desk", "full"), help="default geometry")

    parser = argparse.ArgumentParser(prog="wotf-probe", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=fn)
        return p

    p = add("gen-data", cmd_gen_data, "generate a dataset manifest")
    p.add_argument("--kind", choices=KINDS)
    p.add_argument("--count", type=int)
    p.add_argument("--name")
    p.add_argument("--from-files", nargs="+", metavar="PGM")
    p.add_argument("--previews", type=int, default=0, help="write the first N images as PGM")

    p = add("entropy", cmd_entropy, "entropy report of a dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", choices=("train", "validation", "test"))

    p = add("simulate", cmd_simulate, "propagate phase objects to intensities")
    p.add_argument("--phase", help="single WPGD phase grid (radians)")
    p.add_argument("--manifest")
    p.add_argument("--split", default="test", choices=("train", "validation", "test"))
    p.add_argument("--linearized", action="store_true", help="use the weak-object model")
    p.add_argument("--noise-sigma", type=float, help="Gaussian noise, relative to mean intensity")

    p = add("train", cmd_train, "train a network on a manifest's training split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--noise-sigma", type=float)

    def add_model_args(p):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--model", help="model.json written by train")
        g.add_argument("--oracle", action="store_true", help="regularized inverse (default)")

    p = add("reconstruct", cmd_reconstruct, "reconstruct phase from a WPGD intensity")
    p.add_argument("--input", required=True)
    add_model_args(p)

    p = add("lwotf", cmd_lwotf, "extract the learned transfer function")
    p.add_argument("--manifest")
    p.add_argument("--split", default="test", choices=("train", "validation", "test"))
    add_model_args(p)

    p = add("star-test", cmd_star_test, "star-pattern null and reconstruction test")
    p.add_argument("--periods", type=int)
    p.add_argument("--grid-n", type=int)
    p.add_argument("--defocus", type=float, help="propagation distance in metres")
    add_model_args(p)

    p = add("register", cmd_register, "affine NMI registration of two PGM images")
    p.add_argument("--moving", required=True)
    p.add_argument("--fixed", required=True)

    p = add("evaluate", cmd_evaluate, "cross-domain score table")
    p.add_argument("--model", action="append", help="model.json (repeatable)")
    p.add_argument("--oracle", action="store_true", help="add the regularized inverse row")
    p.add_argument("--test", action="append", required=True, help="test manifest (repeatable)")
    p.add_argument("--split", default="test", choices=("train", "validation", "test"))
    p.add_argument("--noise-sigma", type=float)

    add("reproduce", cmd_reproduce, "run the whole pipeline and summarize the checks")
    return parser


def _error_record(exc):
    rec = {"status": "error", "type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError):
        rec.update(field=exc.field, reason=exc.reason)
    if isinstance(exc, OSError) and exc.filename:
        rec["path"] = str(exc.filename)
        rec["message"] = exc.strerror or str(exc)
    return rec


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = Path(args.out) if args.out else None
    try:
        cfg = load_config(args.config, args.scale, args.seed, args.out)
        out_dir = Path(cfg.out)
        out = Outputs(out_dir)
        out.json("config.json", cfg.to_dict())
        args.func(args, cfg, out)
        out.finish()
        return 0
    except (ConfigError, UsageError, OSError, PgmError, GridFormatError, CheckpointError,
            ValueError, FloatingPointError, RuntimeError) as exc:
        rec = _error_record(exc)
        print(json.dumps(rec, sort_keys=True), file=sys.stderr)
        if out_dir is not None:
            try:
                atomic_write_text(out_dir / "error.json", json.dumps(rec, indent=1) + "\n")
            except OSError:
                pass
        return 2 if isinstance(exc, (ConfigError, UsageError)) else 1


if __name__ == "__main__":
    sys.exit(main())
