import numpy as np
import pytest

from sddr import _pykernels, kernels

scipy_optimize = pytest.importorskip("scipy.optimize")

BACKENDS = kernels.available_backends()


@pytest.fixture(autouse=True)
def restore_backend():
    prev = kernels.BACKEND
    yield
    kernels.use_backend(prev)


def test_python_backend_always_available():
    assert "python" in BACKENDS
    assert kernels.BACKEND in BACKENDS


def test_use_backend_switches_and_restores():
    prev = kernels.BACKEND
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")
    kernels.use_backend("python")
    assert kernels.BACKEND == "python"
    kernels.use_backend(prev)
    assert kernels.BACKEND == prev


@pytest.mark.parametrize("backend", BACKENDS)
def test_assignment_matches_scipy(backend, rng):
    kernels.use_backend(backend)
    for _ in range(40):
        n = int(rng.integers(1, 30))
        m = n + int(rng.integers(0, 5))
        C = rng.random((n, m)) * 10
        cols = kernels.assignment(C)
        assert len(set(cols.tolist())) == n
        r, c = scipy_optimize.linear_sum_assignment(C)
        assert C[np.arange(n), cols].sum() == pytest.approx(C[r, c].sum(), abs=1e-9)


@pytest.mark.parametrize("backend", BACKENDS)
def test_nearest_matches_brute(backend, rng):
    kernels.use_backend(backend)
    P, Q = rng.normal(size=(50, 3)), rng.normal(size=(37, 3))
    d, i = kernels.nearest(P, Q)
    full = np.linalg.norm(P[:, None] - Q[None], axis=-1)
    assert np.array_equal(i, full.argmin(1))
    assert np.allclose(d, full.min(1), atol=1e-12)


@pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")
def test_backends_agree(rng):
    from sddr import _ckernels
    for _ in range(30):
        x = rng.exponential(size=int(rng.integers(30, 120)))
        g, t = int(rng.integers(0, 3)), int(rng.integers(2, 10))
        k = int(rng.integers(1, 2 * t + 1))
        assert np.array_equal(_ckernels.os_cfar_1d(x, g, t, k, 2.0), _pykernels.os_cfar_1d(x, g, t, k, 2.0))
        C = rng.random((8, 11))
        assert np.array_equal(_ckernels.assignment(C), _pykernels.assignment(C))
        P, Q = rng.normal(size=(20, 3)), rng.normal(size=(15, 3))
        for a, b in zip(_ckernels.nearest(P, Q), _pykernels.nearest(P, Q)):
            assert np.allclose(a, b, atol=1e-12)
