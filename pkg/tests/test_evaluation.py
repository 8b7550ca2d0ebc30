import numpy as np
import pytest

from wotf_probe.datasets import generate_dataset
from wotf_probe.evaluation import (CellScore, EvaluationError, ScoreTable, cross_domain_matrix,
                                   mae, pcc, score_reconstructor)
from wotf_probe.optics import OpticalConfig
from wotf_probe.reconstructors import LinearInverse


@pytest.fixture(scope="module")
def setup():
    optics = OpticalConfig.equivalent(32)
    tests = [generate_dataset(k, 5, 6, 32, ratios=(0, 0, 1)) for k in ("texture", "glyph")]
    return optics, tests


class Cheat:
    """Returns the truth for the manifest it was built on: pins the bookkeeping."""

    def __init__(self, phases):
        self.phases = phases

    def __call__(self, g):
        return self.phases


def test_metrics():
    a = np.arange(9.0).reshape(3, 3)
    assert pcc(a, 2 * a + 1) == pytest.approx(1)
    assert mae(a, a + 0.5) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        mae(a, a[:2])


def test_perfect_reconstructor_scores(setup):
    optics, (tex, _) = setup
    cell = score_reconstructor(Cheat(tex.phases("test")), tex, optics)
    assert cell.n == 6 and cell.pcc_mean == pytest.approx(1) and cell.mae_mean == 0
    assert cell.format() == "1.000 ± 0.000"


def test_population_std(setup):
    optics, (tex, _) = setup
    truth = tex.phases("test")
    noisy = truth + 0.01 * np.random.default_rng(0).standard_normal(truth.shape)
    cell = score_reconstructor(Cheat(noisy), tex, optics)
    per = [pcc(noisy[i], truth[i]) for i in range(6)]
    assert cell.pcc_std == pytest.approx(np.std(per))


def test_errors(setup):
    optics, (tex, _) = setup
    with pytest.raises(EvaluationError, match="empty"):
        score_reconstructor(Cheat(None), tex, optics, split="train")
    with pytest.raises(EvaluationError, match="shape"):
        score_reconstructor(Cheat(np.zeros((2, 32, 32))), tex, optics)
    bad = tex.phases("test").copy()
    bad[2, 0, 0] = np.nan
    with pytest.raises(EvaluationError, match="non-finite"):
        score_reconstructor(Cheat(bad), tex, optics)
    flat = np.zeros((6, 32, 32))
    with pytest.raises(EvaluationError, match="cannot score"):
        score_reconstructor(Cheat(flat), tex, optics)


def test_matrix_layout_and_csv(setup, tmp_path):
    optics, tests = setup
    lin = LinearInverse(optics)
    table = cross_domain_matrix({"oracle": lin, "oracle2": LinearInverse(optics, 1e-2)},
                                tests, optics)
    assert table.train_sets == ["oracle", "oracle2"] and table.test_sets == ["texture", "glyph"]
    csv = table.to_csv().splitlines()
    assert csv[0] == "train_set,test_set,metric,mean,std,n" and len(csv) == 1 + 2 * 2 * 2
    assert csv[1].startswith("oracle,texture,pcc,")
    txt = table.to_text().splitlines()
    assert len(txt) == 3 and txt[1].startswith("texture")
    table.save_csv(tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text() == table.to_csv()
    assert set(table.to_dict()) == {f"{a}->{b}" for a in table.train_sets
                                    for b in table.test_sets}


def test_matrix_noise_is_shared_and_seeded(setup):
    optics, tests = setup
    lin = LinearInverse(optics)
    t1 = cross_domain_matrix([("a", lin), ("b", lin)], tests, optics, noise_sigma=0.01, seed=3)
    t2 = cross_domain_matrix([("a", lin)], tests, optics, noise_sigma=0.01, seed=3)
    clean = cross_domain_matrix([("a", lin)], tests, optics)
    assert t1.cell("a", "glyph") == t1.cell("b", "glyph") == t2.cell("a", "glyph")
    assert t1.cell("a", "glyph") != clean.cell("a", "glyph")


def test_duplicate_names(setup):
    optics, tests = setup
    lin = LinearInverse(optics)
    with pytest.raises(ValueError):
        cross_domain_matrix([("a", lin), ("a", lin)], tests, optics)


def test_table_lookup_missing():
    t = ScoreTable(["a"], ["b"], {("a", "b"): CellScore(1, 0, 0, 0, 1)})
    with pytest.raises(KeyError):
        t.cell("b", "a")
