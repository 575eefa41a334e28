import numpy as np
import pytest
from hypothesis import given, strategies as st

from nonlocal_bif import build_mesh, integrate, laplacian
from conftest import dense_laplacian_1d


def test_spacing_and_nodes():
    m = build_mesh(2, [1.0, 2.0], [3, 7])
    assert m.h == (0.25, 0.25)
    assert m.node_count == 21
    assert m.cell_volume == pytest.approx(0.0625)
    assert m.measure == 2.0


@pytest.mark.parametrize("dim, extents, n", [
    (3, [1, 1, 1], [4, 4, 4]), (1, [0.0], [8]), (1, [1.0], [2]), (2, [1.0], [5]),
])
def test_rejects_bad_meshes(dim, extents, n):
    with pytest.raises(ValueError):
        build_mesh(dim, extents, n)


def test_laplacian_matches_dense_stencil():
    m = build_mesh(1, [2.0], [9])
    assert np.allclose(laplacian(m).toarray(), dense_laplacian_1d(9, 2.0))


def test_2d_node_order_is_c_order():
    m = build_mesh(2, [1.0, 1.0], [3, 4])
    x, y = m.coordinates()
    assert x[:4] == pytest.approx([0.25] * 4)
    assert y[:4] == pytest.approx([0.2, 0.4, 0.6, 0.8])
    # 5-point stencil: row of an interior node has 5 nonzeros
    L = laplacian(m).toarray()
    k = 1 * 4 + 1
    assert np.count_nonzero(L[k]) == 5
    assert L[k, k] == pytest.approx(2 / 0.25**2 + 2 / 0.2**2)


def test_discrete_eigenvalues_2d():
    m = build_mesh(2, [1.0, 1.0], [7, 7])
    ev = np.linalg.eigvalsh(laplacian(m).toarray())
    lam = 2 * 4 * 64 * np.sin(np.pi / 16) ** 2
    assert ev[0] == pytest.approx(lam, rel=1e-12)


def test_integrate_sine():
    m = build_mesh(1, [1.0], [255])
    assert integrate(m, m.sample(lambda x: np.sin(np.pi * x))) == pytest.approx(2 / np.pi, rel=1e-4)


def test_check_field_shape():
    m = build_mesh(1, [1.0], [5])
    with pytest.raises(ValueError):
        m.check_field(np.zeros(6))


@given(st.integers(3, 30), st.floats(0.1, 10))
def test_laplacian_symmetric_positive(n, length):
    L = laplacian(build_mesh(1, [length], [n])).toarray()
    assert np.allclose(L, L.T)
    assert np.linalg.eigvalsh(L).min() > 0


@given(st.integers(3, 12), st.integers(3, 12))
def test_laplacian_is_m_matrix(n0, n1):
    L = laplacian(build_mesh(2, [1.0, 1.5], [n0, n1])).toarray()
    off = L - np.diag(np.diag(L))
    assert np.all(off <= 0)
    assert np.all(np.linalg.inv(L) >= -1e-12)
