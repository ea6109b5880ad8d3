import json
import struct

import numpy as np
import pytest

from dyadlab import (DyadicFunction, GridSpec, ShiftOperator, random_function,
                     random_shift)


def test_function_json_roundtrip(rng):
    for grid in (GridSpec(1, 4), GridSpec(2, 2)):
        f = random_function(grid, rng)
        back = DyadicFunction.from_json(f.to_json())
        assert back.grid == grid
        assert np.max(np.abs(back.samples - f.samples)) == 0.0
    obj = json.loads(random_function(GridSpec(1, 3), rng).to_json())
    assert set(obj) == {"d", "N", "samples"}


def test_function_json_row_major_order():
    # axis 1 slowest: samples[x1 * n2 + x2]
    g = GridSpec(2, 1)
    f = DyadicFunction(g, [1.0, 2.0, 3.0, 4.0])
    obj = json.loads(f.to_json())
    assert obj["samples"] == [1.0, 2.0, 3.0, 4.0]
    assert f.samples.reshape(2, 2)[1, 0] == 3.0


def test_function_binary_header_exact(rng):
    g = GridSpec(2, 2)
    f = random_function(g, rng)
    raw = f.to_bytes()
    assert raw[:4] == b"DYF1"
    d, N, reserved = struct.unpack("<III", raw[4:16])
    assert (d, N, reserved) == (2, 2, 0)
    assert len(raw) == 16 + 8 * g.n_samples
    back = DyadicFunction.from_bytes(raw)
    assert back.grid == g
    assert np.array_equal(back.samples, f.samples)
    with pytest.raises(ValueError):
        DyadicFunction.from_bytes(b"XXXX" + raw[4:])


def test_omega_grid_json_roundtrip(rng):
    g = GridSpec(1, 3, omega=((1,), (0,), (1,)))
    f = random_function(g, rng)
    back = DyadicFunction.from_json(f.to_json())
    assert back.grid == g
    with pytest.raises(ValueError):
        f.to_bytes()  # binary format covers standard grids only


def test_shift_json_roundtrip(rng):
    g = GridSpec(1, 3)
    S = random_shift(g, 1, 0, rng)
    obj = json.loads(S.to_json())
    assert obj["i"] == 1 and obj["j"] == 0 and obj["kind"] == "cancellative"
    entry = obj["entries"][0]
    assert set(entry) == {"K", "I", "J", "a"}
    assert set(entry["I"]) == {"level", "pos", "sig"}
    back = ShiftOperator.from_json(S.to_json())
    f = random_function(g, rng)
    assert (S.apply(f) - back.apply(f)).norm() < 1e-13


def test_shift_json_roundtrip_2d(rng):
    g = GridSpec(2, 2)
    S = random_shift(g, 1, 1, rng)
    back = ShiftOperator.from_json(S.to_json())
    f = random_function(g, rng)
    assert (S.apply(f) - back.apply(f)).norm() < 1e-12


def test_noncancellative_shift_json(rng):
    g = GridSpec(1, 4)
    S = random_shift(g, 0, 0, rng, kind="noncancellative", orientation="synthesis")
    obj = json.loads(S.to_json())
    assert obj["kind"] == "noncancellative"
    assert obj["orientation"] == "synthesis"
    assert "samples" in obj["symbol"]
    back = ShiftOperator.from_json(S.to_json())
    f = random_function(g, rng)
    assert (S.apply(f) - back.apply(f)).norm() < 1e-13
