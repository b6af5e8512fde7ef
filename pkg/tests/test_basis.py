import numpy as np

from occurelax.basis import build_test_basis
from occurelax.boxes import Box


def test_affine_entry_count_1d():
    tb = build_test_basis(Box((0.0,), (1.0,)), m=1, mode="affine", d_x=1)
    # {1, x} for the scalar part and for the y-coefficient part
    assert len(tb.entries) == 4
    assert all(e.y_degree <= 1 for e in tb.entries)


def test_nonlinear_adds_y_squared_entries():
    omega = Box((0.0,), (1.0,))
    for d_x in (1, 2, 3):
        aff = build_test_basis(omega, m=1, mode="affine", d_x=d_x)
        non = build_test_basis(omega, m=1, mode="nonlinear", d_x=d_x, d_y=2)
        assert len(non.entries) == len(aff.entries) + (d_x + 1)


def test_affine_subset_of_nonlinear():
    omega = Box((0.0, -1.0), (1.0, 2.0))
    aff = build_test_basis(omega, m=2, mode="affine", d_x=2)
    non = build_test_basis(omega, m=2, mode="nonlinear", d_x=2, d_y=3)
    assert set(aff.entries) <= set(non.entries)
    assert non.affine_subbasis() == aff.entries


def test_gradients_match_finite_differences():
    omega = Box((0.0, -1.0), (2.0, 1.0))
    tb = build_test_basis(omega, m=2, mode="nonlinear", d_x=3, d_y=2)
    rng = np.random.default_rng(3)
    X = rng.uniform([0.0, -1.0], [2.0, 1.0], size=(5, 2))
    Y = rng.uniform(-1.0, 1.0, size=(5, 2))
    h = 1e-6
    for entry in tb.entries[::7]:
        for axis in range(2):
            Xp, Xm = X.copy(), X.copy()
            Xp[:, axis] += h
            Xm[:, axis] -= h
            fd = (tb.phi(entry, Xp, Y) - tb.phi(entry, Xm, Y)) / (2 * h)
            assert np.allclose(tb.dphi_dx(entry, X, Y, axis), fd, atol=1e-6)
        for comp in range(2):
            Yp, Ym = Y.copy(), Y.copy()
            Yp[:, comp] += h
            Ym[:, comp] -= h
            fd = (tb.phi(entry, X, Yp) - tb.phi(entry, X, Ym)) / (2 * h)
            assert np.allclose(tb.dphi_dy(entry, X, Y, comp), fd, atol=1e-6)


def test_compact_entries_vanish_on_boundary():
    omega = Box((0.0, 0.0), (1.0, 2.0))
    tb = build_test_basis(omega, m=1, mode="affine", d_x=2)
    edge = np.array([[0.0, 1.3], [1.0, 0.4], [0.7, 0.0], [0.2, 2.0]])
    Y = np.zeros((4, 1))
    for entry in tb.compact_entries:
        assert np.allclose(tb.phi(entry, edge, Y), 0.0, atol=1e-14)
    # normalized to peak 1 for the constant entry
    center = np.array([[0.5, 1.0]])
    const = tb.compact_entries[0]
    assert abs(tb.phi(const, center, np.zeros((1, 1)))[0] - 1.0) < 1e-14
