"""Dataset container validation and CSV round trips."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scorefes.datasets import Dataset, read_dataset_csv, stable_hash, write_dataset_csv
from scorefes.errors import DataError, EmptyDataset, InvalidInput
from scorefes.spaces import euclidean, torus, wrap


class TestDatasetValidation:
    def test_requires_2d(self):
        with pytest.raises(InvalidInput):
            Dataset(samples=np.zeros(5), space=torus(1))

    def test_column_count_must_match_space(self):
        with pytest.raises(InvalidInput):
            Dataset(samples=np.zeros((4, 3)), space=torus(2))

    def test_zero_rows(self):
        with pytest.raises(EmptyDataset):
            Dataset(samples=np.zeros((0, 2)), space=euclidean(2))

    def test_non_finite_values(self):
        bad = np.zeros((3, 1))
        bad[1, 0] = np.nan
        with pytest.raises(DataError):
            Dataset(samples=bad, space=euclidean(1))

    def test_torus_angle_range_is_half_open(self):
        ok = np.array([[-math.pi], [0.0], [math.pi * (1 - 1e-15)]])
        ds = Dataset(samples=ok, space=torus(1))
        assert ds.n_frames == 3 and ds.dim == 1
        with pytest.raises(DataError):
            Dataset(samples=np.array([[math.pi]]), space=torus(1))

    def test_euclidean_values_unconstrained(self):
        ds = Dataset(samples=np.array([[1e6, -42.0]]), space=euclidean(2))
        assert ds.n_frames == 1


class TestCsvRoundTrip:
    def test_torus_bit_exact_with_meta(self, tmp_path):
        rng = np.random.default_rng(3)
        samples = wrap(rng.uniform(-math.pi, math.pi, (40, 3)))
        meta = {"T": 3.0, "seed": 11, "generator": "metropolis"}
        ds = Dataset(samples=samples, space=torus(3), meta=meta)
        path = str(tmp_path / "d.csv")
        write_dataset_csv(ds, path)
        got = read_dataset_csv(path)
        assert got.samples.tobytes() == ds.samples.tobytes()
        assert got.space == ds.space
        assert got.meta == meta
        assert isinstance(got.meta["seed"], int)
        assert isinstance(got.meta["T"], float)

    def test_euclidean_extreme_values_bit_exact(self, tmp_path):
        samples = np.array([[1e300, -1e-300], [0.0, -0.0], [1 / 3, math.pi]])
        ds = Dataset(samples=samples, space=euclidean(2))
        path = str(tmp_path / "d.csv")
        write_dataset_csv(ds, path)
        got = read_dataset_csv(path)
        assert got.samples.tobytes() == ds.samples.tobytes()

    @settings(max_examples=25, deadline=None)
    @given(values=st.lists(st.floats(min_value=-math.pi, max_value=math.pi,
                                     exclude_max=True, allow_nan=False),
                           min_size=1, max_size=30))
    def test_round_trip_property(self, values, tmp_path_factory):
        ds = Dataset(samples=np.array(values)[:, None], space=torus(1))
        path = str(tmp_path_factory.mktemp("rt") / "d.csv")
        write_dataset_csv(ds, path)
        got = read_dataset_csv(path)
        assert got.samples.tobytes() == ds.samples.tobytes()

    def test_trailing_weight_column_is_tolerated(self, tmp_path):
        path = tmp_path / "w.csv"
        path.write_text(
            "# space=torus dim=1 units=radians\n"
            "z1,weight\n"
            "0.5,2.0\n"
            "-1.25,1.0\n"
        )
        ds = read_dataset_csv(str(path))
        assert np.array_equal(ds.samples, np.array([[0.5], [-1.25]]))


class TestCsvReaderErrors:
    def test_missing_file_names_path(self, tmp_path):
        path = str(tmp_path / "absent.csv")
        with pytest.raises(DataError, match="absent.csv"):
            read_dataset_csv(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("")
        with pytest.raises(EmptyDataset):
            read_dataset_csv(str(path))

    def test_header_but_no_frames(self, tmp_path):
        path = tmp_path / "h.csv"
        path.write_text("# space=torus dim=1\nz1\n")
        with pytest.raises(EmptyDataset):
            read_dataset_csv(str(path))

    def test_missing_space_meta(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("z1\n0.5\n")
        with pytest.raises(DataError, match="space"):
            read_dataset_csv(str(path))

    def test_wrong_column_names(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("# space=torus dim=2\nz1,theta\n0.5,0.5\n")
        with pytest.raises(DataError, match="expected columns"):
            read_dataset_csv(str(path))

    def test_row_with_wrong_field_count_names_row(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("# space=torus dim=2\nz1,z2\n0.5,0.5\n0.25\n")
        with pytest.raises(DataError, match="row 4"):
            read_dataset_csv(str(path))

    def test_non_numeric_cell(self, tmp_path):
        path = tmp_path / "n.csv"
        path.write_text("# space=euclidean dim=1\nz1\nabc\n")
        with pytest.raises(DataError, match="row 3"):
            read_dataset_csv(str(path))


class TestStableHash:
    def test_deterministic_and_sensitive(self):
        a = stable_hash("metropolis", {"b": 2, "a": 1}, 1.5)
        b = stable_hash("metropolis", {"a": 1, "b": 2}, 1.5)
        assert a == b
        assert len(a) == 16
        assert stable_hash("metropolis", {"a": 1, "b": 2}, 1.5000001) != a

    def test_array_values_participate(self):
        x = np.array([0.1, 0.2])
        assert stable_hash(x) == stable_hash(x.copy())
        assert stable_hash(x) != stable_hash(np.array([0.1, 0.25]))
