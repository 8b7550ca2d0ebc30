import json

import numpy as np
import pytest

from wotf_probe.cli import ConfigError, load_config, main
from wotf_probe.datasets import generate_dataset, save_pgm
from wotf_probe.gridio import read_grid, write_grid
from wotf_probe.registration import AffineParams, warp_affine

TINY = {
    "optics": {"grid_n": 16, "defocus": 0.00625},
    "network": {"input_side": 16, "base_channels": 2},
    "train": {"epochs": 1},
    "data": {"count": 20, "test_count": 5, "lwotf_count": 5},
}


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "tiny.json"
    p.write_text(json.dumps(TINY))
    return str(p)


COMMANDS = {"gen-data", "entropy", "simulate", "train", "reconstruct", "lwotf", "star-test",
            "register", "evaluate", "reproduce"}


def run(*argv):
    """Accepts shared options anywhere and moves the subcommand to the front."""
    argv = [str(a) for a in argv]
    i = next(i for i, a in enumerate(argv) if a in COMMANDS)
    return main([argv[i]] + argv[:i] + argv[i + 1:])


def produced(out):
    return {f["path"]: f["sha256"] for f in json.loads((out / "produced.json").read_text())["files"]}


class TestConfig:
    def test_defaults_validate(self):
        cfg = load_config()
        assert cfg.optics.grid_n == cfg.network.input_side == 32
        assert load_config(scale="full").optics.grid_n == 256

    def test_seed_override_reaches_training(self):
        assert load_config(seed=5).train.seed == 5

    @pytest.mark.parametrize("raw,field", [
        ({"optics": {"focal": 1}}, "optics.focal"),
        ({"train": {"epochs": "many"}}, "train.epochs"),
        ({"noise_sigma": -1}, "noise_sigma"),
        ({"network": {"input_side": 64}}, "network.input_side"),
        ({"optics": {"grid_n": 7}}, "optics"),
        ({"scale": "huge"}, "scale"),
    ])
    def test_bad_values_name_the_field(self, tmp_path, raw, field):
        p = tmp_path / "c.json"
        p.write_text(json.dumps(raw))
        with pytest.raises(ConfigError) as info:
            load_config(p)
        assert info.value.field == field

    def test_error_json_and_exit_code(self, tmp_path, capsys):
        p = tmp_path / "c.json"
        p.write_text('{"bogus": 1}')
        assert run("--config", p, "--out", tmp_path / "o", "entropy", "--manifest", "x") == 2
        rec = json.loads((tmp_path / "o" / "error.json").read_text())
        assert rec["field"] == "bogus" and rec["status"] == "error"
        assert '"bogus"' in capsys.readouterr().err

    def test_missing_input_exit_one(self, tmp_path):
        assert run("--out", tmp_path, "entropy", "--manifest", tmp_path / "none.json") == 1
        rec = json.loads((tmp_path / "error.json").read_text())
        assert rec["path"].endswith("none.json")

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{")
        assert run("--config", p, "--out", tmp_path, "gen-data", "--kind", "glyph") == 2


class TestCommands:
    def test_gen_data_is_deterministic(self, tmp_path, cfg_file):
        for d in ("a", "b"):
            assert run("--config", cfg_file, "--out", tmp_path / d, "gen-data", "--kind",
                       "texture", "--previews", 2) == 0
        a, b = produced(tmp_path / "a"), produced(tmp_path / "b")
        # config.json records the output directory; everything else must match bit for bit
        a.pop("config.json"), b.pop("config.json")
        assert a == b and len(a) == 3
        assert (tmp_path / "a" / "previews").is_dir()
        assert run("--config", cfg_file, "--seed", 1, "--out", tmp_path / "c", "gen-data",
                   "--kind", "texture") == 0
        key = "texture.manifest.json"
        assert produced(tmp_path / "c")[key] != produced(tmp_path / "a")[key]

    def test_entropy(self, tmp_path, cfg_file, capsys):
        run("--config", cfg_file, "--out", tmp_path, "gen-data", "--kind", "glyph")
        assert run("--config", cfg_file, "--out", tmp_path / "e", "entropy", "--manifest",
                   tmp_path / "glyph.manifest.json") == 0
        rep = json.loads((tmp_path / "e" / "entropy.json").read_text())
        assert rep["n"] == 20 and rep["mean_bits"] < 1.5
        assert "mean entropy" in capsys.readouterr().out

    def test_simulate_zero_phase(self, tmp_path, cfg_file):
        write_grid(tmp_path / "z.wpgd", np.zeros((16, 16)))
        assert run("--config", cfg_file, "--out", tmp_path / "s", "simulate", "--phase",
                   tmp_path / "z.wpgd") == 0
        assert np.allclose(read_grid(tmp_path / "s" / "intensity.wpgd"), 1.0)
        assert run("--out", tmp_path / "u", "simulate") == 2

    def test_train_reconstruct_lwotf_evaluate(self, tmp_path, cfg_file):
        c = ("--config", cfg_file)
        run(*c, "--out", tmp_path, "gen-data", "--kind", "texture")
        man = tmp_path / "texture.manifest.json"
        assert run(*c, "--out", tmp_path / "m", "train", "--manifest", man) == 0
        model = tmp_path / "m" / "model.json"
        rec = json.loads(model.read_text())
        assert rec["train_set"] == "texture" and len(rec["affine"]) == 2
        assert (tmp_path / "m" / "loss.csv").read_text().startswith("epoch,npcc\n1,")

        write_grid(tmp_path / "g.wpgd", np.ones((16, 16)) + 0.01 * np.eye(16))
        assert run(*c, "--out", tmp_path / "r", "reconstruct", "--input", tmp_path / "g.wpgd",
                   "--model", model) == 0
        assert read_grid(tmp_path / "r" / "phase.wpgd").shape == (16, 16)

        assert run(*c, "--out", tmp_path / "l", "lwotf", "--model", model) == 0
        lw = json.loads((tmp_path / "l" / "lwotf_texture.json").read_text())
        assert lw["n_images"] == 5 and lw["rmse_below_first_null"] > 0
        assert (tmp_path / "l" / "lwotf_texture_diag.csv").exists()

        assert run(*c, "--out", tmp_path / "v", "evaluate", "--model", model, "--oracle",
                   "--test", man) == 0
        rows = (tmp_path / "v" / "scores.csv").read_text().splitlines()
        assert {r.split(",")[0] for r in rows[1:]} == {"texture", "oracle"}

    def test_star_test(self, tmp_path, cfg_file):
        assert run("--config", cfg_file, "--out", tmp_path, "star-test", "--oracle",
                   "--defocus", 0.0125) == 0
        s = json.loads((tmp_path / "star.json").read_text())
        assert s["reconstruction"]["oracle"]["flips_reconstructed"] == 0
        assert len(s["predicted_m"]) >= 1 and len(s["detected_m"]) == len(s["predicted_m"])

    def test_register(self, tmp_path):
        img = generate_dataset("texture", 3, 1, 64, ratios=(0, 0, 1)).images("test")[0]
        moved = np.clip(np.round(warp_affine(img.astype(float), AffineParams(tx=2, ty=-1))),
                        0, 255).astype(np.uint8)
        save_pgm(img, tmp_path / "f.pgm")
        save_pgm(moved, tmp_path / "m.pgm")
        assert run("--out", tmp_path / "o", "register", "--moving", tmp_path / "m.pgm",
                   "--fixed", tmp_path / "f.pgm") == 0
        p = json.loads((tmp_path / "o" / "affine.json").read_text())
        assert p["tx"] == pytest.approx(-2, abs=0.2) and p["ty"] == pytest.approx(1, abs=0.2)

    def test_bad_checkpoint(self, tmp_path, cfg_file):
        (tmp_path / "checkpoint.wpnn").write_bytes(b"junk")
        (tmp_path / "model.json").write_text(json.dumps(
            {"checkpoint": "checkpoint.wpnn", "affine": [1, 0], "train_set": "x"}))
        write_grid(tmp_path / "g.wpgd", np.ones((16, 16)))
        code = run("--config", cfg_file, "--out", tmp_path / "o", "reconstruct", "--input",
                   tmp_path / "g.wpgd", "--model", tmp_path / "model.json")
        assert code == 1
        assert json.loads((tmp_path / "o" / "error.json").read_text())["type"] == "CheckpointError"
