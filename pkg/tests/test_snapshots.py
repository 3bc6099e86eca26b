"""QDSG binary snapshot format."""

import struct

import numpy as np
import pytest

from qdslab.snapshots import read_array, read_wigner, write_array, write_wigner
from qdslab.states import coherent_state, wigner_transform


def test_real_array_roundtrip(tmp_path, rng):
    arr = rng.normal(size=(16, 16))
    path = tmp_path / "real.qdsg"
    write_array(path, arr, (4.0, 4.0))
    back, extents = read_array(path)
    assert np.array_equal(back, arr)
    assert extents == (4.0, 4.0)
    assert back.dtype == np.float64


def test_complex_array_roundtrip(tmp_path, rng):
    arr = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    path = tmp_path / "cplx.qdsg"
    write_array(path, arr, (2.0, 2.0))
    back, _ = read_array(path)
    assert np.array_equal(back, arr)
    assert back.dtype == np.complex128


def test_header_layout(tmp_path):
    arr = np.arange(6.0).reshape(2, 3)
    path = tmp_path / "h.qdsg"
    write_array(path, arr, (1.0, 2.0))
    raw = path.read_bytes()
    assert raw[:4] == b"QDSG"
    version, dtype_code, naxes = struct.unpack("<HBB", raw[4:8])
    assert (version, dtype_code, naxes) == (1, 0, 2)
    counts = struct.unpack("<2I", raw[8:16])
    assert counts == (2, 3)
    extents = struct.unpack("<2d", raw[16:32])
    assert extents == (1.0, 2.0)
    payload = np.frombuffer(raw, dtype="<f8", offset=32)
    assert np.array_equal(payload.reshape(2, 3), arr)


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.qdsg"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(ValueError, match="QDSG"):
        read_array(path)


def test_wigner_roundtrip(tmp_path, grid128):
    w = wigner_transform(coherent_state(grid128, 0.5, -0.3))
    path = tmp_path / "w.qdsg"
    write_wigner(path, w)
    back = read_wigner(path)
    assert np.array_equal(back.values, w.values)
    assert back.grid_x.extent == w.grid_x.extent
    assert back.grid_x.points == w.grid_x.points


def test_wigner_rejects_non_dual_extents(tmp_path, grid128):
    w = wigner_transform(coherent_state(grid128, 0.0, 0.0))
    path = tmp_path / "w.qdsg"
    write_array(path, w.values, (8.0, 7.0))  # wrong velocity extent
    with pytest.raises(ValueError, match="FFT-dual"):
        read_wigner(path)
