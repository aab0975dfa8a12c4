import itertools

import numpy as np
import pytest

from drhash.alignment import (INF, MAX_OP_COST, AlignmentParams, DistRow, extend_row, initial_row,
                              nw_distance)
from drhash.sequence import encode

import oracles

P = AlignmentParams()


def test_empty_prefix_examples():
    assert nw_distance("", "ACG", AlignmentParams(2, 3)) == 6
    assert nw_distance("ACG", "", AlignmentParams(2, 3)) == 6
    assert nw_distance("", "") == 0


@pytest.mark.parametrize("cg,cs", [(1, 1), (2, 3), (5, 2), (1, 7)])
def test_identical_sequences_are_at_zero(cg, cs):
    assert nw_distance("ACGT", "ACGT", AlignmentParams(cg, cs)) == 0


def test_single_mismatch_example():
    assert nw_distance("ACGT", "ACGA", AlignmentParams(2, 3)) == 3
    assert oracles.exhaustive_alignment("ACGT", "ACGA", 2, 3) == 3


def test_matches_exhaustive_alignment_for_short_pairs(rng):
    for cg, cs in [(2, 3), (1, 3), (3, 2)]:
        for _ in range(150):
            s, t = oracles.random_text(rng, 0, 6), oracles.random_text(rng, 0, 6)
            assert nw_distance(s, t, AlignmentParams(cg, cs)) == oracles.exhaustive_alignment(s, t, cg, cs)


def test_all_pairs_up_to_length_three():
    words = ["".join(w) for k in range(4) for w in itertools.product("ACGT", repeat=k)]
    for s in words:
        for t in words:
            assert nw_distance(s, t) == oracles.full_matrix_nw(s, t, 2, 3)[-1][-1]


def test_matches_edit_graph_shortest_path(rng):
    for _ in range(30):
        s, t = oracles.random_text(rng, 0, 4), oracles.random_text(rng, 0, 4)
        assert nw_distance(s, t) == oracles.edit_graph_distance(s, t, 2, 3)


def test_single_edit_costs(rng):
    for cg, cs in [(2, 3), (1, 3), (2, 5)]:
        p = AlignmentParams(cg, cs)
        for _ in range(50):
            s = oracles.random_text(rng, 1, 20)
            i = int(rng.integers(0, len(s)))
            other = "ACGT".replace(s[i], "")[int(rng.integers(0, 3))]
            assert nw_distance(s, s[:i] + other + s[i + 1:], p) == min(cs, 2 * cg)
            j = int(rng.integers(0, len(s) + 1))
            assert nw_distance(s, s[:j] + "ACGT"[int(rng.integers(0, 4))] + s[j:], p) == cg


def test_metric_axioms_small_sample(rng):
    for _ in range(200):
        s, t, u = (oracles.random_text(rng, 0, 20) for _ in range(3))
        st, tu, su = nw_distance(s, t), nw_distance(t, u), nw_distance(s, u)
        assert st >= 0
        assert (st == 0) == (s == t)
        assert st == nw_distance(t, s)
        assert st + tu >= su


def test_code_arrays_and_text_agree():
    assert nw_distance(encode("ACGTT"), "acgat") == nw_distance("ACGTT", "ACGAT")


def test_params_validation():
    with pytest.raises(ValueError):
        AlignmentParams(0, 3)
    with pytest.raises(ValueError):
        AlignmentParams(2, MAX_OP_COST + 1)
    with pytest.raises(TypeError):
        AlignmentParams(2.5, 3)
    with pytest.raises(ValueError):
        AlignmentParams(2, 3, band=0)
    assert AlignmentParams(band=None).band_width == 0
    assert AlignmentParams().unbanded() == AlignmentParams(band=None)


def test_overflow_is_rejected():
    big = AlignmentParams(MAX_OP_COST, MAX_OP_COST)
    with pytest.raises(OverflowError):
        nw_distance("A" * 9000, "", big)


# Rows -----------------------------------------------------------------------------------------------------------
def test_initial_row_examples():
    assert initial_row(0, AlignmentParams(2)).cells.tolist() == [0]
    assert initial_row(3, AlignmentParams(2)).cells.tolist() == [0, 2, 4, 6]
    assert initial_row(3, AlignmentParams(1)).cells.tolist() == [0, 1, 2, 3]
    banded = initial_row(40, AlignmentParams(2, 3, 5))
    assert banded.offset == 0 and banded.cells.tolist() == [0, 2, 4, 6, 8, 10]


def test_extend_example():
    row = extend_row(initial_row(3), "A", "ACG")
    assert row.cells.tolist() == [2, 0, 2, 4]
    assert row.cells.tolist() == oracles.full_matrix_nw("A", "ACG", 2, 3)[1]


def test_extend_rejects_empty_block_and_bad_rows():
    with pytest.raises(ValueError):
        extend_row(initial_row(3), "", "ACG")
    with pytest.raises(ValueError):
        extend_row(initial_row(5), "A", "ACG")


def test_unbanded_rows_match_full_matrix(rng):
    p = AlignmentParams(band=None)
    for _ in range(60):
        seq = oracles.random_text(rng, 0, 24)
        prefix = oracles.random_text(rng, 1, 24)
        m = oracles.full_matrix_nw(prefix, seq, p.c_g, p.c_s)
        row = initial_row(len(seq), p)
        pos = 0
        while pos < len(prefix):
            k = int(rng.integers(1, 5))
            row = extend_row(row, prefix[pos:pos + k], seq, p)
            pos = min(len(prefix), pos + k)
            assert row.offset == 0
            assert row.cells.tolist() == m[pos]
        assert int(row.cells[-1]) == nw_distance(prefix, seq)


def test_block_decomposition_does_not_matter(rng):
    p = AlignmentParams(band=None)
    for _ in range(40):
        seq, word = oracles.random_text(rng, 1, 30), oracles.random_text(rng, 1, 30)
        whole = extend_row(initial_row(len(seq), p), word, seq, p)
        row = initial_row(len(seq), p)
        for ch in word:
            row = extend_row(row, ch, seq, p)
        assert row == whole


def test_banded_single_step_is_exact_on_stored_cells(rng):
    """From an exact row, one banded symbol step agrees with the full matrix wherever it stores a cell."""
    for band in (1, 2, 5):
        p = AlignmentParams(2, 3, band)
        for _ in range(100):
            seq = oracles.random_text(rng, 1, 32)
            prefix = oracles.random_text(rng, 0, 31)
            m = oracles.full_matrix_nw(prefix + "A", seq, 2, 3)
            exact = DistRow(0, np.array(m[len(prefix)], dtype=np.int32))
            step = extend_row(exact, "A", seq, p)
            full = step.full(len(seq))
            stored = range(step.offset, step.offset + len(step.cells))
            assert all(int(full[j]) == m[-1][j] for j in stored)
            assert min(m[-1]) == step.min


def test_banded_rows_upper_bound_unbanded(rng):
    """Over many steps a band can only drop paths, so stored cells never undercut the true value."""
    for band in (1, 3, 16):
        p = AlignmentParams(2, 3, band)
        for _ in range(100):
            seq = oracles.random_text(rng, 1, 32)
            prefix = oracles.random_text(rng, 1, 32)
            m = oracles.full_matrix_nw(prefix, seq, 2, 3)
            row = extend_row(initial_row(len(seq), p), prefix, seq, p)
            for k, v in enumerate(row.cells):
                assert int(v) >= m[-1][row.offset + k]


def test_band_wider_than_sequence_is_exact(rng):
    for _ in range(50):
        seq, prefix = oracles.random_text(rng, 1, 20), oracles.random_text(rng, 1, 30)
        p = AlignmentParams(2, 3, len(seq) + 1)
        row = extend_row(initial_row(len(seq), p), prefix, seq, p)
        assert row.offset == 0 and row.cells.tolist() == oracles.full_matrix_nw(prefix, seq, 2, 3)[-1]


def test_row_smoothness_and_band_geometry(rng):
    for band in (None, 4):
        p = AlignmentParams(2, 3, band)
        for _ in range(60):
            seq, prefix = oracles.random_text(rng, 1, 40), oracles.random_text(rng, 1, 40)
            row = extend_row(initial_row(len(seq), p), prefix, seq, p)
            cells = row.cells.astype(np.int64)
            assert (cells >= 0).all() and (cells < INF).all()
            assert (np.abs(np.diff(cells)) <= p.c_g).all()
            if band is not None:
                arg = row.offset + int(np.argmin(cells))
                assert row.offset >= arg - band and row.offset + len(cells) - 1 <= arg + band


def test_distrow_full_pads_with_inf():
    row = DistRow(2, np.array([5, 3], dtype=np.int32))
    assert row.full(5).tolist() == [INF, INF, 5, 3, INF, INF]
    assert row.min == 3
