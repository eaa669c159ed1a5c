import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stackreg.data import (
    CvPartition,
    DataError,
    Dataset,
    derive_partition,
    load_dataset,
    make_folds,
    split_train_test,
)


def write_csv(path, header, rows):
    path.write_text(
        ",".join(header) + "\n" + "".join(",".join(str(c) for c in r) + "\n" for r in rows)
    )
    return path


def toy(n=10, i=2, seed=0):
    rng = np.random.default_rng(seed)
    return Dataset("toy", rng.normal(size=(n, i)), rng.normal(size=n), tuple(f"x{j}" for j in range(i)))


class TestLoadDataset:
    def test_three_rows(self, tmp_path):
        p = write_csv(tmp_path / "t.csv", ["a", "b", "y"], [[1, 2, 3], [4, 5, 6], [7, 8, 9]])
        ds = load_dataset(p, "y")
        assert (ds.n, ds.n_features) == (3, 2)
        assert ds.feature_names == ("a", "b")
        np.testing.assert_array_equal(ds.target, [3, 6, 9])
        np.testing.assert_array_equal(ds.features[:, 0], [1, 4, 7])
        assert ds.name == "t"

    def test_target_in_middle(self, tmp_path):
        p = write_csv(tmp_path / "t.csv", ["a", "y", "b"], [[1, 2, 3], [4, 5, 6]])
        ds = load_dataset(p, "y")
        np.testing.assert_array_equal(ds.features, [[1, 3], [4, 6]])

    def test_nine_columns_gives_eight_features(self, tmp_path):
        rng = np.random.default_rng(3)
        header = [f"c{j}" for j in range(8)] + ["strength"]
        p = write_csv(tmp_path / "concrete.csv", header, rng.normal(size=(865, 9)).round(4).tolist())
        ds = load_dataset(p, "strength")
        assert (ds.n, ds.n_features) == (865, 8)

    def test_nan_cell_reported(self, tmp_path):
        p = write_csv(tmp_path / "t.csv", ["a", "y"], [[1, 2], ["NaN", 3]])
        with pytest.raises(DataError, match=r"line 3.*'a'"):
            load_dataset(p, "y")

    def test_unparseable_cell(self, tmp_path):
        p = write_csv(tmp_path / "t.csv", ["a", "y"], [[1, "abc"]])
        with pytest.raises(DataError, match=r"line 2.*'y'.*abc"):
            load_dataset(p, "y")

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="no such file"):
            load_dataset(tmp_path / "nope.csv", "y")

    def test_missing_column(self, tmp_path):
        p = write_csv(tmp_path / "t.csv", ["a", "b"], [[1, 2]])
        with pytest.raises(DataError, match="target column"):
            load_dataset(p, "y")

    def test_ragged_row(self, tmp_path):
        p = write_csv(tmp_path / "t.csv", ["a", "y"], [[1, 2], [3]])
        with pytest.raises(DataError, match="1 cells"):
            load_dataset(p, "y")

    def test_no_rows(self, tmp_path):
        p = write_csv(tmp_path / "t.csv", ["a", "y"], [])
        with pytest.raises(DataError, match="no data rows"):
            load_dataset(p, "y")


class TestDataset:
    def test_arrays_read_only(self):
        ds = toy()
        with pytest.raises(ValueError):
            ds.features[0, 0] = 1.0

    def test_rejects_non_finite(self):
        with pytest.raises(DataError):
            Dataset("x", np.array([[np.inf]]), np.array([1.0]), ("a",))

    def test_rejects_empty(self):
        with pytest.raises(DataError):
            Dataset("x", np.zeros((0, 1)), np.zeros(0), ("a",))

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            Dataset("x", np.zeros((3, 1)), np.zeros(2), ("a",))

    def test_subset_tracks_source_rows(self):
        ds = toy(6)
        sub = ds.subset([1, 4]).subset([1])
        assert sub.row_index.tolist() == [4]
        np.testing.assert_array_equal(sub.target, ds.target[[4]])


class TestSplit:
    def test_sizes_and_cover(self):
        train, test = split_train_test(toy(10), 0.8, seed=5)
        assert (train.n, test.n) == (8, 2)
        rows = set(train.row_index) | set(test.row_index)
        assert rows == set(range(10)) and not set(train.row_index) & set(test.row_index)

    def test_deterministic(self):
        a = split_train_test(toy(10), 0.8, seed=5)[0].row_index
        b = split_train_test(toy(10), 0.8, seed=5)[0].row_index
        np.testing.assert_array_equal(a, b)

    def test_865_rows(self):
        train, test = split_train_test(toy(865), 0.8, seed=1)
        assert (train.n, test.n) == (692, 173)

    @pytest.mark.parametrize("frac", [0.0, 1.0, -0.2, 1.5])
    def test_fraction_out_of_range(self, frac):
        with pytest.raises(DataError):
            split_train_test(toy(10), frac, seed=0)

    def test_empty_side(self):
        with pytest.raises(DataError, match="empty"):
            split_train_test(toy(2), 0.1, seed=0)


class TestFolds:
    def test_even(self):
        f = make_folds(10, 5, seed=0)
        assert f.sizes().tolist() == [2] * 5

    def test_remainder(self):
        assert sorted(make_folds(11, 5, seed=0).sizes().tolist()) == [2, 2, 2, 2, 3]

    def test_692(self):
        assert sorted(make_folds(692, 5, seed=4).sizes().tolist(), reverse=True) == [139, 139, 138, 138, 138]

    def test_too_few_rows(self):
        with pytest.raises(DataError):
            make_folds(4, 5, seed=0)

    def test_one_fold_rejected(self):
        with pytest.raises(DataError):
            make_folds(4, 1, seed=0)

    @given(st.integers(2, 60), st.integers(2, 8), st.integers(0, 2**32 - 1))
    def test_sizes_balanced(self, n, k, seed):
        if n < k:
            return
        f = make_folds(n, k, seed)
        assert set(f.sizes().tolist()) <= {n // k, -(-n // k)}
        np.testing.assert_array_equal(f.fold_of, make_folds(n, k, seed).fold_of)


class TestPartition:
    def setup_method(self):
        self.folds = make_folds(23, 5, seed=2)

    def test_standard_cv(self):
        p = derive_partition(self.folds, 0)
        tr = p.training_indices(2)
        assert set(tr) == set(range(23)) - set(self.folds.fold(2))

    def test_two_folds_removed(self):
        p = derive_partition(self.folds, 3)
        assert set(p.training_indices(1)) == set(range(23)) - set(self.folds.fold(1)) - set(self.folds.fold(3))

    def test_overlap_case(self):
        p = derive_partition(self.folds, 3)
        assert set(p.training_indices(3)) == set(range(23)) - set(self.folds.fold(3))

    @pytest.mark.parametrize("m", [-1, 6])
    def test_m_out_of_range(self, m):
        with pytest.raises(DataError):
            derive_partition(self.folds, m)

    @settings(max_examples=50)
    @given(st.integers(10, 50), st.integers(2, 6), st.integers(0, 1000), st.data())
    def test_invariants(self, n, k, seed, data):
        folds = make_folds(n, k, seed)
        m = data.draw(st.integers(0, k))
        p = CvPartition(folds, m)
        seen = []
        for kk, tr, va in p.splits():
            assert not set(tr) & set(va)
            seen.extend(va.tolist())
            if m and kk != m:
                assert tr.size == n - folds.fold(kk).size - folds.fold(m).size
        assert sorted(seen) == list(range(n))
