import numpy as np
import pytest

from finatoms import atoms, comovement
from finatoms.atoms import Atom, AtomicLevels
from finatoms.comovement import SignMatrix
from finatoms.errors import AtomNotFromMatrix, EmptyMatrix, PreconditionError
from tests.conftest import make_comatrix


def block_matrix():
    """Entries 500 within {0,1,2}, 480 within {3,4}, 100 elsewhere."""
    counts = np.full((5, 5), 100)
    for i in (0, 1, 2):
        for j in (0, 1, 2):
            counts[i, j] = 500
    counts[3, 4] = counts[4, 3] = 480
    return make_comatrix(counts)


class TestExtractCandidates:
    def test_two_block_matrix(self):
        found = atoms.extract_candidates(block_matrix(), stop_level=300)
        assert [sorted(a.members) for a in found] == [[0, 1, 2], [3, 4]]
        assert [a.id for a in found] == [1, 2]
        assert found[0].max_intra == 500 and found[0].min_intra == 500
        assert found[1].max_intra == 480

    def test_all_equal_gives_seed_pair(self):
        mat = make_comatrix(np.full((4, 4), 400))
        found = atoms.extract_candidates(mat, stop_level=300, max_atoms=1)
        assert sorted(found[0].members) == [0, 1]
        assert found[0].seed == (0, 1)

    def test_stop_level_above_max_gives_empty(self):
        found = atoms.extract_candidates(block_matrix(), stop_level=501)
        assert found == []

    def test_disjointness(self):
        found = atoms.extract_candidates(block_matrix(), stop_level=300)
        seen = set()
        for a in found:
            assert not (seen & a.members)
            seen |= a.members

    def test_re_extraction_stability(self):
        mat = block_matrix()
        found = atoms.extract_candidates(mat, stop_level=300)
        first = sorted(found[0].members)
        counts = np.asarray(mat.counts, dtype=int).copy()
        counts[first, :] = 0
        counts[:, first] = 0
        rest = atoms.extract_candidates(make_comatrix(counts), stop_level=300)
        assert [sorted(a.members) for a in rest] == [
            sorted(a.members) for a in found[1:]
        ]

    def test_max_atom_size_caps_cut(self):
        counts = np.full((8, 8), 450)
        mat = make_comatrix(counts)
        found = atoms.extract_candidates(mat, stop_level=300, max_atom_size=3)
        assert all(len(a.members) <= 3 for a in found)

    def test_too_small_matrix(self):
        mat = make_comatrix([[0, 1], [1, 0]])
        with pytest.raises(EmptyMatrix):
            atoms.extract_candidates(
                comovement.CoMatrix(
                    counts=np.zeros((1, 1), dtype=np.uint32),
                    co_assigned=np.zeros((1, 1), dtype=np.uint32),
                    T=10,
                    tickers=("A",),
                ),
                stop_level=1,
            )
        assert mat.n_stocks == 2  # silence unused warning

    def test_duplicated_stock_lands_in_same_atom(self, rng):
        rows = rng.integers(-1, 2, size=(6, 200)).astype(np.int8)
        rows[1] = rows[0]  # identical price history twins
        signs = SignMatrix(
            signs=rows,
            tickers=tuple(f"T{i}" for i in range(6)),
            windows=tuple(f"w{t}" for t in range(200)),
        )
        mat = comovement.comovement_matrix(signs)
        assert mat.counts[0, 1] == mat.co_assigned[0, 1]
        found = atoms.extract_candidates(mat, stop_level=int(mat.counts[0, 1]))
        assert found and {0, 1} <= found[0].members


class TestAtomicLevels:
    def test_lower_mean_of_first_foreign_levels(self):
        # atoms {0,1} and {2,3}; stock 4 enters atom 1 at 260, stock 5
        # enters atom 2 at 264; everything else far below
        counts = np.zeros((6, 6), dtype=int)
        counts[0, 1] = 400
        counts[2, 3] = 390
        counts[0, 4] = counts[1, 4] = 260
        counts[2, 5] = counts[3, 5] = 264
        mat = make_comatrix(counts)
        extracted = [
            Atom(id=1, members=frozenset({0, 1}), seed=(0, 1), max_intra=400, min_intra=400),
            Atom(id=2, members=frozenset({2, 3}), seed=(2, 3), max_intra=390, min_intra=390),
        ]
        annotated, levels = atoms.atomic_levels(mat, extracted)
        assert [a.first_foreign_level for a in annotated] == [260, 264]
        assert levels.lower_mean == 262.0
        assert levels.per_atom_lower == (260, 264)
        # both atoms self-consistent: upper = smaller max_intra
        assert levels.upper == 390
        assert not levels.inverted

    def test_self_consistency_is_strict(self):
        counts = np.zeros((3, 3), dtype=int)
        counts[0, 1] = 400
        counts[0, 2] = 400  # out-count ties min_intra: not self-consistent
        mat = make_comatrix(counts)
        atom = Atom(id=1, members=frozenset({0, 1}), seed=(0, 1), max_intra=400, min_intra=400)
        _, levels = atoms.atomic_levels(mat, [atom])
        assert levels.upper == mat.T + 1  # sentinel: no strong atoms

    def test_sentinel_when_none_consistent(self):
        mat = make_comatrix(np.full((4, 4), 300))
        atom = Atom(id=1, members=frozenset({0, 1}), seed=(0, 1), max_intra=300, min_intra=300)
        _, levels = atoms.atomic_levels(mat, [atom])
        assert levels.upper == mat.T + 1

    def test_atom_outside_matrix_rejected(self):
        mat = make_comatrix(np.full((3, 3), 10))
        atom = Atom(id=1, members=frozenset({0, 7}), seed=(0, 1), max_intra=10, min_intra=10)
        with pytest.raises(AtomNotFromMatrix):
            atoms.atomic_levels(mat, [atom])

    def test_overlapping_atoms_rejected(self):
        mat = make_comatrix(np.full((4, 4), 10))
        a = Atom(id=1, members=frozenset({0, 1}), seed=(0, 1), max_intra=10, min_intra=10)
        b = Atom(id=2, members=frozenset({1, 2}), seed=(1, 2), max_intra=10, min_intra=10)
        with pytest.raises(AtomNotFromMatrix):
            atoms.atomic_levels(mat, [a, b])


class TestClassifyAtoms:
    def annotated(self, max_intra, consistent):
        return Atom(
            id=1,
            members=frozenset({0, 1}),
            seed=(0, 1),
            max_intra=max_intra,
            min_intra=max_intra,
            first_foreign_level=260,
            self_consistent=consistent,
        )

    def test_strong(self):
        levels = AtomicLevels(upper=400, lower_mean=262.0, per_atom_lower=(260,))
        out = atoms.classify_atoms([self.annotated(420, True)], levels)
        assert out[0].strength == "strong"

    def test_weak(self):
        levels = AtomicLevels(upper=400, lower_mean=262.0, per_atom_lower=(260,))
        out = atoms.classify_atoms([self.annotated(300, False)], levels)
        assert out[0].strength == "weak"

    def test_candidate(self):
        levels = AtomicLevels(upper=400, lower_mean=262.0, per_atom_lower=(260,))
        out = atoms.classify_atoms([self.annotated(250, False)], levels)
        assert out[0].strength == "candidate"

    def test_consistency_required_for_strong(self):
        levels = AtomicLevels(upper=400, lower_mean=262.0, per_atom_lower=(260,))
        out = atoms.classify_atoms([self.annotated(420, False)], levels)
        assert out[0].strength == "weak"

    def test_unannotated_rejected(self):
        levels = AtomicLevels(upper=400, lower_mean=262.0, per_atom_lower=(260,))
        raw = Atom(id=1, members=frozenset({0, 1}), seed=(0, 1), max_intra=10, min_intra=10)
        with pytest.raises(PreconditionError):
            atoms.classify_atoms([raw], levels)


class TestRecords:
    def test_json_round_trip(self):
        mat = block_matrix()
        found = atoms.extract_candidates(mat, stop_level=300)
        annotated, levels = atoms.atomic_levels(mat, found)
        classified = atoms.classify_atoms(annotated, levels)
        records = atoms.to_records(classified, mat.tickers, {"T00": "Finance"})
        text = atoms.records_to_json(records)
        assert atoms.records_from_json(text) == records

    def test_reference_fixture_loads(self):
        records = atoms.load_reference_atoms()
        assert len(records) == 6
        assert all(r.strength == "strong" for r in records)
        singtel = records[0]
        assert len(singtel.tickers) == 3
