import numpy as np
import pytest

from finatoms import _kernel_py, kernels


def brute_counts(signs):
    """Reference double loop over pairs and windows."""
    n, t = signs.shape
    counts = np.zeros((n, n), dtype=np.uint32)
    co = np.zeros((n, n), dtype=np.uint32)
    for i in range(n):
        for j in range(i + 1, n):
            c = a = 0
            for k in range(t):
                si, sj = signs[i, k], signs[j, k]
                if si != 0 and sj != 0:
                    a += 1
                    if si == sj:
                        c += 1
            counts[i, j] = counts[j, i] = c
            co[i, j] = co[j, i] = a
    return counts, co


def test_python_kernel_matches_brute_force(rng):
    for _ in range(25):
        n, t = rng.integers(2, 9), rng.integers(1, 51)
        signs = rng.integers(-1, 2, size=(n, t)).astype(np.int8)
        counts, co = _kernel_py.comovement_counts(signs, 1)
        ref_counts, ref_co = brute_counts(signs)
        assert np.array_equal(counts, ref_counts)
        assert np.array_equal(co, ref_co)


def test_pack_signs_bit_layout():
    signs = np.array([[1, -1, 0, 1]], dtype=np.int8)
    plus, minus = kernels.pack_signs(signs)
    assert plus.dtype == np.uint64 and plus.shape == (1, 1)
    assert int(plus[0, 0]) == 0b1001
    assert int(minus[0, 0]) == 0b0010


def test_pack_signs_beyond_word_boundary(rng):
    signs = rng.integers(-1, 2, size=(3, 130)).astype(np.int8)
    plus, minus = kernels.pack_signs(signs)
    assert plus.shape == (3, 3)
    for i in range(3):
        for t in range(130):
            bit = (int(plus[i, t // 64]) >> (t % 64)) & 1
            assert bit == (1 if signs[i, t] > 0 else 0)


@pytest.mark.skipif(not kernels.HAVE_EXTENSION, reason="extension not built")
def test_backends_agree_exactly(rng):
    for _ in range(30):
        n, t = rng.integers(2, 40), rng.integers(1, 700)
        signs = rng.integers(-1, 2, size=(n, t)).astype(np.int8)
        py = _kernel_py.comovement_counts(signs, 1)
        counts = np.zeros((n, n), dtype=np.uint32)
        co = np.zeros((n, n), dtype=np.uint32)
        plus, minus = kernels.pack_signs(signs)
        kernels._kernel_cy.comovement_packed(plus, minus, counts, co, 2)
        assert np.array_equal(counts, py[0])
        assert np.array_equal(co, py[1])


def test_thread_count_does_not_change_result(rng):
    signs = rng.integers(-1, 2, size=(50, 522)).astype(np.int8)
    base = kernels.comovement_counts(signs, 1)
    for threads in (2, 4, 8):
        counts, co = kernels.comovement_counts(signs, threads)
        assert np.array_equal(counts, base[0])
        assert np.array_equal(co, base[1])


def test_kernel_env_override(monkeypatch):
    monkeypatch.setenv("FINATOMS_KERNEL", "py")
    assert kernels.active_backend() == "py"
    monkeypatch.delenv("FINATOMS_KERNEL")
    assert kernels.active_backend() in ("py", "cy")


def test_threads_env_override(monkeypatch):
    monkeypatch.setenv("FINATOMS_THREADS", "3")
    assert kernels.default_threads() == 3
    monkeypatch.setenv("FINATOMS_THREADS", "0")
    assert kernels.default_threads() == 1
