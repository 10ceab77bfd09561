import numpy as np
import pytest

from finatoms import comovement, phc, synth
from finatoms.errors import HistoryTooShort, PreconditionError, SeedMasked
from tests.conftest import make_comatrix, make_history, random_comatrix


def brute_grow(matrix, seed, linkage, masked=frozenset(), max_size=None):
    """Exhaustive per-step re-evaluation of every candidate's linkage."""
    n = matrix.n_stocks
    if max_size is None:
        max_size = n
    cluster = list(seed)
    admissions = []
    while len(cluster) < max_size:
        candidates = [
            k for k in range(n) if k not in cluster and k not in masked
        ]
        if not candidates:
            break
        best, best_level = None, None
        for k in candidates:
            level = phc.linkage_level(matrix, cluster, k, linkage)
            if best_level is None or level > best_level:
                best, best_level = k, level
        cluster.append(best)
        admissions.append((best, best_level))
    return tuple(admissions)


class TestLinkageLevel:
    def setup_method(self):
        counts = np.zeros((4, 4), dtype=int)
        counts[1, 3] = counts[3, 1] = 10
        counts[2, 3] = counts[3, 2] = 4
        self.mat = make_comatrix(counts)

    def test_complete_is_min(self):
        assert phc.linkage_level(self.mat, {1, 2}, 3, "complete") == 4

    def test_single_is_max(self):
        assert phc.linkage_level(self.mat, {1, 2}, 3, "single") == 10

    def test_average_is_mean(self):
        assert phc.linkage_level(self.mat, {1, 2}, 3, "average") == 7

    def test_candidate_in_cluster_rejected(self):
        with pytest.raises(PreconditionError):
            phc.linkage_level(self.mat, {1, 3}, 3, "complete")


class TestGrowCluster:
    def test_three_stock_example(self):
        counts = np.zeros((3, 3), dtype=int)
        counts[0, 1] = 10
        counts[0, 2] = 2
        counts[1, 2] = 3
        mat = make_comatrix(counts)
        history = phc.grow_cluster(mat, (0, 1), "complete")
        assert history.admissions == ((2, 2),)
        assert history.seed_level == 10

    def test_two_stock_matrix_empty_admissions(self):
        mat = make_comatrix([[0, 5], [5, 0]])
        history = phc.grow_cluster(mat, (0, 1), "complete")
        assert history.admissions == ()
        assert history.max_size == 2

    def test_masked_seed_rejected(self):
        mat = make_comatrix(np.ones((3, 3), dtype=int))
        with pytest.raises(SeedMasked):
            phc.grow_cluster(mat, (0, 1), "complete", masked={1})

    def test_masked_candidates_skipped(self):
        mat = make_comatrix(np.full((4, 4), 7))
        history = phc.grow_cluster(mat, (0, 1), "complete", masked={2})
        assert history.members() == (0, 1, 3)

    def test_tie_breaks_to_lowest_index(self):
        mat = make_comatrix(np.full((5, 5), 9))
        history = phc.grow_cluster(mat, (1, 3), "complete")
        assert history.members() == (1, 3, 0, 2, 4)

    def test_matches_brute_force_oracle(self, rng):
        for _ in range(60):
            n = int(rng.integers(3, 9))
            mat = random_comatrix(rng, n)
            i, j = rng.choice(n, size=2, replace=False)
            for linkage in phc.LINKAGES:
                history = phc.grow_cluster(mat, (int(i), int(j)), linkage)
                assert history.admissions == brute_grow(
                    mat, (int(i), int(j)), linkage
                )

    def test_complete_link_monotone(self, rng):
        for _ in range(200):
            n = int(rng.integers(3, 12))
            mat = random_comatrix(rng, n)
            history = phc.grow_cluster(mat, (0, 1), "complete")
            levels = [lvl for _, lvl in history.admissions]
            assert all(b <= a for a, b in zip(levels, levels[1:]))

    def test_determinism(self, rng):
        mat = random_comatrix(rng, 10)
        a = phc.grow_cluster(mat, (2, 5), "complete")
        b = phc.grow_cluster(mat, (2, 5), "complete")
        assert a == b


class TestDetectBoundaries:
    def test_sharp_drop_example(self):
        history = make_history([500, 495, 490, 300, 295])
        found = phc.detect_boundaries(history)
        assert len(found) == 1
        b = found[0]
        assert (b.size, b.sharpness, b.kind) == (4, 185.0, "drop")

    def test_linear_history_no_boundary(self):
        history = make_history([500, 490, 480, 470])
        assert phc.detect_boundaries(history) == []

    def test_planted_two_block_boundary(self):
        spec = synth.PlantedSpec(
            n_stocks=10,
            atom_partition=((0, 1, 2, 3, 4),),
            molecule_partition=((0,),),
            T=522,
            p_market=0.5,
            p_mol=0.5,
            p_atom=0.95,
            p_unassigned=0.0,
            rng_seed=7,
        )
        signs, _ = synth.generate_market(spec)
        mat = comovement.comovement_matrix(signs)
        history = phc.grow_cluster(mat, (0, 1), "complete")
        found = phc.detect_boundaries(history)
        assert found and found[0].size == 5

    def test_translation_invariance(self, rng):
        counts = rng.integers(0, 200, size=(12, 12))
        mat = make_comatrix(counts, T=522)
        shifted = make_comatrix(np.asarray(mat.counts, dtype=int) + 300, T=1022)
        h1 = phc.grow_cluster(mat, (0, 1), "complete")
        h2 = phc.grow_cluster(shifted, (0, 1), "complete")
        b1 = phc.detect_boundaries(h1, prominence=1.0)
        b2 = phc.detect_boundaries(h2, prominence=1.0)
        assert [(b.size, b.sharpness) for b in b1] == [
            (b.size, b.sharpness) for b in b2
        ]

    def test_too_short_history(self):
        with pytest.raises(HistoryTooShort):
            phc.detect_boundaries(make_history([10, 9, 8]))

    def test_bad_window(self):
        history = make_history([500, 495, 490, 300, 295])
        with pytest.raises(PreconditionError):
            phc.detect_boundaries(history, min_size=5, max_size=4)

    def test_sorted_by_sharpness(self):
        history = make_history([500, 498, 450, 448, 350, 348, 346])
        found = phc.detect_boundaries(history, prominence=1.0)
        sharp = [b.sharpness for b in found]
        assert sharp == sorted(sharp, reverse=True)


def test_export_history_csv(tmp_path):
    history = make_history([10, 8, 7, 6])
    path = tmp_path / "h.csv"
    phc.export_history_csv(history, tuple("ABCDE"), path)
    lines = path.read_text().splitlines()
    assert lines[0] == "size,admitted_ticker,level"
    assert lines[1] == "1,A,10"
    assert lines[2] == "2,B,10"
    assert lines[3] == "3,C,8"
