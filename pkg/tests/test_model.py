"""Data model: entries, validation, index construction, factor products."""

import numpy as np
import numpy.testing as npt
import pytest

from maco.errors import ValidationError
from maco.model import (ConstraintKind, CsrIndex, Entry, FactorPair,
                        ObservationSet, box, build_index, equality, lower,
                        product_entry, upper, validate)

from conftest import random_mixed_obs


class TestEntryConstructors:
    def test_equality_stores_value_twice(self):
        e = equality(0, 1, 3.0)
        assert (e.lo, e.hi) == (3.0, 3.0)
        assert e.value == 3.0

    def test_one_sided_entries(self):
        assert lower(0, 0, 1.5).hi is None
        assert upper(0, 0, 1.5).lo is None

    def test_value_rejected_for_box(self):
        with pytest.raises(ValueError, match="no single value"):
            _ = box(0, 0, 1.0, 2.0).value


class TestValidate:
    def test_single_valid_entry(self):
        obs = ObservationSet(2, 2, [equality(0, 0, 3.0)])
        assert validate(obs).ok

    def test_bound_order_violation(self):
        obs = ObservationSet(2, 2, [box(0, 0, 5.0, 1.0)])
        report = validate(obs)
        assert not report.ok
        v = report.violations[0]
        assert (v.code, v.i, v.j) == ("BoundOrder", 0, 0)

    def test_overlap_with_equality(self):
        obs = ObservationSet(2, 2, [equality(0, 0, 3.0), lower(0, 0, 1.0)])
        report = validate(obs)
        assert "OverlapWithEquality" in report.codes()
        v = [x for x in report.violations if x.code == "OverlapWithEquality"]
        assert (v[0].i, v[0].j) == (0, 0)

    def test_duplicate_without_equality(self):
        obs = ObservationSet(3, 3, [lower(1, 1, 0.0), upper(1, 1, 2.0)])
        assert validate(obs).codes() == {"DuplicateIndex"}

    def test_index_out_of_range(self):
        obs = ObservationSet(2, 2, [equality(2, 0, 1.0)])
        assert validate(obs).codes() == {"IndexOutOfRange"}
        obs = ObservationSet(2, 2, [equality(0, -1, 1.0)])
        assert validate(obs).codes() == {"IndexOutOfRange"}

    def test_non_finite_bound(self):
        obs = ObservationSet(2, 2, [equality(0, 0, float("nan"))])
        assert validate(obs).codes() == {"NonFinite"}

    def test_malformed_bound_fields(self):
        # hand-built entries violating the presence pattern
        bad = [Entry(0, 0, ConstraintKind.LOWER, lo=None, hi=1.0),
               Entry(0, 1, ConstraintKind.BOX, lo=1.0, hi=None),
               Entry(1, 0, ConstraintKind.EQUALITY, lo=1.0, hi=2.0)]
        report = validate(ObservationSet(2, 2, bad))
        assert report.codes() == {"MalformedBounds"}
        assert len(report.violations) == 3

    def test_validate_is_total_and_reports_everything(self, rng):
        # mixture of many violations; validate must return, not raise
        entries = [box(0, 0, 2.0, 1.0), equality(9, 9, 1.0),
                   equality(1, 1, 1.0), upper(1, 1, 2.0),
                   lower(0, 1, float("inf"))]
        report = validate(ObservationSet(3, 3, entries))
        assert {"BoundOrder", "IndexOutOfRange", "OverlapWithEquality",
                "NonFinite"} <= report.codes()
        assert "violation" in report.describe() or not report.ok

    def test_degenerate_box_is_allowed(self):
        # lo == hi is a legitimate box, not an equality
        obs = ObservationSet(1, 1, [box(0, 0, 2.0, 2.0)])
        assert validate(obs).ok


class TestObservationSet:
    def test_positive_dimensions_required(self):
        with pytest.raises(ValueError, match="positive"):
            ObservationSet(0, 3, [])
        with pytest.raises(ValueError, match="positive"):
            ObservationSet(3, -1, [])

    def test_len(self):
        assert len(ObservationSet(2, 2, [equality(0, 0, 1.0)])) == 1


class TestBuildIndex:
    def test_two_entries_row_and_col_views(self):
        obs = ObservationSet(2, 2, [equality(0, 1, 1.0), equality(1, 0, 2.0)])
        idx = build_index(obs)
        assert list(idx.col[idx.row_slice(0)]) == [1]
        assert list(idx.row[idx.col_slice(0)]) == [1]

    def test_empty_observation_set(self):
        idx = build_index(ObservationSet(3, 4, []))
        assert idx.nnz == 0
        for i in range(3):
            assert idx.col[idx.row_slice(i)].size == 0
        for j in range(4):
            assert idx.row[idx.col_slice(j)].size == 0

    def test_three_entries_in_one_row(self):
        obs = ObservationSet(4, 4, [equality(2, j, float(j))
                                    for j in (3, 0, 1)])
        idx = build_index(obs)
        assert idx.col[idx.row_slice(2)].size == 3
        for i in (0, 1, 3):
            assert idx.col[idx.row_slice(i)].size == 0

    def test_rows_sorted_by_column(self):
        obs = ObservationSet(2, 5, [equality(0, j, 0.0) for j in (4, 1, 3)])
        idx = build_index(obs)
        assert list(idx.col[idx.row_slice(0)]) == [1, 3, 4]

    def test_round_trip_reproduces_entries(self, rng):
        for _ in range(20):
            obs = random_mixed_obs(rng, int(rng.integers(1, 9)),
                                   int(rng.integers(1, 9)))
            idx = build_index(obs)
            # compare as sets; index stores row-major order
            assert set(idx.entries()) == set(obs.entries)
            assert idx.nnz == len(obs.entries)

    def test_invalid_observations_rejected(self):
        obs = ObservationSet(2, 2, [box(0, 0, 5.0, 1.0)])
        with pytest.raises(ValidationError, match="BoundOrder"):
            build_index(obs)

    def test_mirror_views_consistent(self, rng):
        obs = random_mixed_obs(rng, 7, 5, count=15)
        idx = build_index(obs)
        # csr_pos is a bijection into the row-major arrays
        assert sorted(idx.csr_pos) == list(range(idx.nnz))
        npt.assert_array_equal(idx.lo_csc, idx.lo[idx.csr_pos])
        npt.assert_array_equal(idx.hi_csc, idx.hi[idx.csr_pos])
        npt.assert_array_equal(idx.row, idx.ii[idx.csr_pos])
        # column views list exactly the entries with that column index
        for j in range(5):
            expect = sorted(e.i for e in obs.entries if e.j == j)
            assert list(idx.row[idx.col_slice(j)]) == expect

    def test_one_sided_bounds_become_infinite_intervals(self):
        obs = ObservationSet(2, 2, [lower(0, 0, 1.0), upper(1, 1, 2.0)])
        idx = build_index(obs)
        assert idx.lo[0] == 1.0 and idx.hi[0] == np.inf
        assert idx.lo[1] == -np.inf and idx.hi[1] == 2.0

    def test_arrays_are_read_only(self):
        idx = build_index(ObservationSet(2, 2, [equality(0, 0, 1.0)]))
        with pytest.raises(ValueError):
            idx.lo[0] = 7.0


class TestFactorPair:
    def test_inner_dimension_mismatch(self):
        with pytest.raises(ValueError, match="inner dimensions"):
            FactorPair(np.zeros((3, 2)), np.zeros((3, 4)))

    def test_rank_at_least_one(self):
        with pytest.raises(ValueError, match="rank"):
            FactorPair(np.zeros((3, 0)), np.zeros((0, 4)))

    def test_shape_properties(self):
        f = FactorPair(np.zeros((3, 2)), np.zeros((2, 5)))
        assert (f.m, f.n, f.rank) == (3, 5, 2)

    def test_dense_product(self, rng):
        f = FactorPair(rng.standard_normal((3, 2)),
                       rng.standard_normal((2, 4)))
        npt.assert_allclose(f.dense(), f.L @ f.R, rtol=0, atol=0)


class TestProductEntry:
    def test_unit_row_selects_entry(self):
        f = FactorPair(np.array([[1.0, 0.0]]), np.array([[5.0], [7.0]]))
        assert product_entry(f, 0, 0) == 5.0

    def test_zero_factor_gives_zero(self):
        f = FactorPair(np.zeros((2, 3)), np.ones((3, 2)))
        assert all(product_entry(f, i, j) == 0.0
                   for i in range(2) for j in range(2))

    def test_random_matches_brute_force(self, rng):
        L = rng.standard_normal((3, 2))
        R = rng.standard_normal((2, 3))
        f = FactorPair(L, R)
        expect = sum(L[1, v] * R[v, 2] for v in range(2))
        npt.assert_allclose(product_entry(f, 1, 2), expect, rtol=1e-15)

    def test_matches_dense_product_property(self, rng):
        for _ in range(30):
            m, n, r = (int(rng.integers(1, 17)) for _ in range(3))
            f = FactorPair(rng.standard_normal((m, r)),
                           rng.standard_normal((r, n)))
            dense = f.L @ f.R
            i = int(rng.integers(0, m))
            j = int(rng.integers(0, n))
            npt.assert_allclose(product_entry(f, i, j), dense[i, j],
                                rtol=1e-12, atol=1e-14)

    def test_out_of_range_rejected(self):
        f = FactorPair(np.zeros((2, 1)), np.zeros((1, 2)))
        with pytest.raises(IndexError):
            product_entry(f, 2, 0)
        with pytest.raises(IndexError):
            product_entry(f, 0, -1)
