import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wotf_probe.datasets import load_pgm
from wotf_probe.gridio import GridFormatError, read_grid, write_grid, write_preview


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 9), st.integers(1, 9)),
              elements=st.floats(allow_nan=True, allow_infinity=True)))
def test_roundtrip_is_bit_exact(tmp_path_factory, grid):
    p = tmp_path_factory.mktemp("g") / "a.wpgd"
    write_grid(p, grid)
    back = read_grid(p)
    assert back.tobytes() == np.ascontiguousarray(grid).tobytes()


def test_header_layout(tmp_path):
    write_grid(tmp_path / "a.wpgd", np.zeros((2, 3)))
    data = (tmp_path / "a.wpgd").read_bytes()
    assert data[:8] == b"WPGD" + b"f64\0"
    assert int.from_bytes(data[8:12], "little") == 2 and int.from_bytes(data[12:16], "little") == 3
    assert len(data) == 16 + 6 * 8


@pytest.mark.parametrize("mutate,match", [
    (lambda d: b"NOPE" + d[4:], "magic"),
    (lambda d: d[:4] + b"f32\0" + d[8:], "dtype"),
    (lambda d: d[:-8], "payload"),
    (lambda d: d[:10], "short"),
])
def test_corrupt_files(tmp_path, mutate, match):
    write_grid(tmp_path / "a.wpgd", np.ones((2, 2)))
    (tmp_path / "b.wpgd").write_bytes(mutate((tmp_path / "a.wpgd").read_bytes()))
    with pytest.raises(GridFormatError, match=match):
        read_grid(tmp_path / "b.wpgd")


def test_rejects_non_2d(tmp_path):
    with pytest.raises(ValueError):
        write_grid(tmp_path / "a.wpgd", np.zeros(3))


def test_preview_is_labelled_and_scaled(tmp_path):
    write_preview(tmp_path / "p.pgm", np.array([[-1.0, 0.0], [1.0, 3.0]]), "phase")
    raw = (tmp_path / "p.pgm").read_bytes()
    assert b"PREVIEW ONLY" in raw and b"phase" in raw
    img = load_pgm(tmp_path / "p.pgm")
    assert img[0, 0] == 0 and img[1, 1] == 255 and img[0, 1] == 64


def test_preview_constant(tmp_path):
    write_preview(tmp_path / "c.pgm", np.full((3, 3), 2.5))
    assert np.all(load_pgm(tmp_path / "c.pgm") == 0)
