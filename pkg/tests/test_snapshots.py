"""Snapshot format: JSON header line plus little-endian float64 payload."""
import json

import numpy as np

from elflow.fields import ScalarField, Tensor2Field, VectorField
from elflow.grid import Grid
from elflow.identities import random_displacement
from elflow.initial import random_scalar, taylor_green
from elflow.snapshots import read_snapshot, write_snapshot
from elflow.spectral import jacobian


class TestRoundTrip:
    def test_scalar(self, tmp_path, grid2d):
        s = random_scalar(grid2d, 1)
        path = tmp_path / "s.bin"
        write_snapshot(path, s, time=0.25, name="potential")
        back, header = read_snapshot(path)
        assert isinstance(back, ScalarField)
        assert np.array_equal(back.values, s.values)
        assert header["time"] == 0.25 and header["name"] == "potential"
        assert header["components"] == 1

    def test_vector(self, tmp_path, grid3d):
        u = taylor_green(grid3d)
        path = tmp_path / "u.bin"
        write_snapshot(path, u, time=1.5, name="velocity")
        back, header = read_snapshot(path)
        assert isinstance(back, VectorField)
        assert np.array_equal(back.components, u.components)
        assert back.grid == grid3d

    def test_tensor(self, tmp_path, grid2d):
        t = jacobian(random_displacement(grid2d, 2, 0.1))
        path = tmp_path / "t.bin"
        write_snapshot(path, t, time=0.0, name="grad_ell")
        back, _ = read_snapshot(path)
        assert isinstance(back, Tensor2Field)
        assert np.array_equal(back.components, t.components)


class TestWireFormat:
    def test_header_is_single_json_line(self, tmp_path, grid2d):
        path = tmp_path / "f.bin"
        write_snapshot(path, taylor_green(grid2d), time=0.5, name="u")
        raw = path.read_bytes()
        line = raw[: raw.index(b"\n")]
        header = json.loads(line)
        assert set(header) == {"dim", "n", "L", "components", "time", "name"}

    def test_payload_little_endian_row_major(self, tmp_path):
        grid = Grid(2, 8, 1.0)
        values = np.arange(64, dtype=float).reshape(8, 8)
        path = tmp_path / "g.bin"
        write_snapshot(path, ScalarField(grid, values), time=0.0, name="ramp")
        raw = path.read_bytes()
        payload = raw[raw.index(b"\n") + 1:]
        decoded = np.frombuffer(payload, dtype="<f8")
        assert np.array_equal(decoded, np.arange(64, dtype=float))
