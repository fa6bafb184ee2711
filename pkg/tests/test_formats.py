import math

import numpy as np
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from gfperc.formats import (csv_text, fmt, json_text, read_gfield2, read_pgm, write_gfield2,
                            write_pgm)


@given(arrays(np.float64, st.tuples(st.integers(1, 9), st.integers(1, 9)),
              elements=st.floats(allow_nan=False, allow_infinity=False)),
       st.floats(1e-3, 10), st.floats(-100, 100))
def test_gfield2_roundtrip(tmp_path_factory, values, eps, x0):
    p = tmp_path_factory.mktemp("g") / "f.gf2"
    write_gfield2(p, values, eps, x0, -x0)
    v, e, a, b = read_gfield2(p)
    assert np.array_equal(v, values) and e == eps and a == x0 and b == -x0


@given(arrays(bool, st.tuples(st.integers(1, 20), st.integers(1, 20))))
def test_pgm_roundtrip(tmp_path_factory, bits):
    p = tmp_path_factory.mktemp("m") / "m.pgm"
    write_pgm(p, bits)
    assert np.array_equal(read_pgm(p), bits)


def test_pgm_orientation(tmp_path):
    bits = np.zeros((2, 3), dtype=bool)
    bits[0, 0] = True  # bottom-left pixel
    write_pgm(tmp_path / "a.pgm", bits)
    raw = (tmp_path / "a.pgm").read_bytes()
    img = np.frombuffer(raw[-6:], dtype=np.uint8).reshape(2, 3)
    assert img[1, 0] == 0 and img[0, 0] == 255


def test_text_formats_stable():
    assert fmt(True) == "1"
    assert fmt(np.float64(0.1)) == fmt(0.1)
    text = csv_text(("a", "b"), [{"a": 1, "b": 0.5}, {"a": 2, "b": float("nan")}])
    assert text.splitlines()[0] == "a,b"
    j = json_text({"x": np.float64(1.5), "y": np.int64(3), "z": math.inf, "w": np.bool_(True)})
    assert '"x": 1.5' in j and '"y": 3' in j and '"w": true' in j
    assert json_text({"a": [1, 2]}) == json_text({"a": [1, 2]})
