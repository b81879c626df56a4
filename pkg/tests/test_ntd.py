import numpy as np
import pytest
from hypothesis import given, strategies as st

from elastomono.fem import assemble
from elastomono.linsolve import ResonanceSuspected
from elastomono.materials import MaterialField, background
from elastomono.mesh import BoundaryLoadSet, build_load_patches, build_structured_hex_mesh
from elastomono.ntd import NtDError, NtDMatrix, forward_solutions, ntd_for_field, ntd_matrix
from elastomono.spectral import count_negative, generalized_eigenvalues, sym_eigenvalues

from conftest import REFERENCE_BACKGROUND


@pytest.fixture(scope="module")
def loads25(mesh4):
    full = build_load_patches(mesh4, 4)
    return BoundaryLoadSet(full.loads[:25], full.mesh_fingerprint)


@pytest.mark.parametrize("omega", [0.0, 10.0])
def test_reciprocity(system4, loads25, omega):
    L = ntd_matrix(system4, loads25, omega)
    assert L.m == 25
    assert L.asymmetry <= 1e-10
    np.testing.assert_array_equal(L.entries, L.entries.T)


def test_identical_fields_cancel(system4, loads4):
    a = ntd_matrix(system4, loads4, 10.0)
    b = ntd_matrix(system4, loads4, 10.0)
    D = a - b
    assert np.all(D == 0)
    assert count_negative(sym_eigenvalues(D), 1.0) == 0


def test_static_background_positive_definite(system4, loads4):
    L = ntd_matrix(system4, loads4, 0.0)
    assert sym_eigenvalues(L.entries).min() > 0


def test_pairing_is_energy(system4, loads4):
    # at omega = 0, Lambda_ii = u_i^T K u_i
    F, U = forward_solutions(system4, loads4, 0.0)
    K, _ = system4.reduced()
    L = ntd_matrix(system4, loads4, 0.0)
    np.testing.assert_allclose(np.diag(L.entries), np.einsum("ir,ij,jr->r", U, K.toarray(), U), rtol=1e-9)


def test_load_scaling(system4, loads4):
    L1 = ntd_matrix(system4, loads4, 10.0).entries
    L2 = ntd_matrix(system4, loads4.scaled(2.0), 10.0).entries
    np.testing.assert_allclose(L2, 4 * L1, rtol=1e-12, atol=1e-12 * np.abs(L1).max())


def test_bit_reproducible(mesh4, loads4):
    f = background(*REFERENCE_BACKGROUND, mesh4)
    g = MaterialField(f.lam.copy(), f.mu.copy(), f.rho.copy())
    assert f.fingerprint() == g.fingerprint()
    a = ntd_for_field(mesh4, f, loads4, 10.0)
    b = ntd_for_field(mesh4, g, loads4, 10.0)
    np.testing.assert_array_equal(a.entries, b.entries)


def test_resonance_propagates():
    mesh = build_structured_hex_mesh(2)
    sys = assemble(mesh, background(*REFERENCE_BACKGROUND, mesh))
    omega = np.sqrt(generalized_eigenvalues(sys)[0])
    with pytest.raises(ResonanceSuspected):
        ntd_matrix(sys, build_load_patches(mesh, 1), omega)


def test_incompatible_subtraction(system4, loads4, mesh4):
    a = ntd_matrix(system4, loads4, 0.0)
    b = ntd_matrix(system4, loads4, 10.0)
    with pytest.raises(NtDError):
        a - b
    other = build_load_patches(build_structured_hex_mesh(2), 1)
    with pytest.raises(NtDError):
        ntd_matrix(system4, other, 0.0)


def test_csv_roundtrip(tmp_path, system4, loads4):
    L = ntd_matrix(system4, loads4, 10.0)
    L.to_csv(tmp_path / "L.csv")
    back = NtDMatrix.from_csv(tmp_path / "L.csv")
    np.testing.assert_array_equal(back.entries, L.entries)
    assert back.omega == L.omega and back.loadset_fingerprint == L.loadset_fingerprint
    assert back.field_fingerprint == L.field_fingerprint and back.mesh_fingerprint == L.mesh_fingerprint


@given(st.integers(0, 2**32 - 1), st.floats(0.05, 1.0))
def test_stationary_monotonicity(mesh4, loads4, seed, frac):
    rng = np.random.default_rng(seed)
    base = background(*REFERENCE_BACKGROUND, mesh4)
    ne = mesh4.n_elements
    mask = rng.random(ne) < frac
    stiff = MaterialField(base.lam + mask * rng.uniform(0, 2e6, ne),
                          base.mu + mask * rng.uniform(0, 2e4, ne),
                          base.rho * rng.uniform(0.5, 1.5, ne))
    L_soft = ntd_for_field(mesh4, base, loads4, 0.0)
    L_stiff = ntd_for_field(mesh4, stiff, loads4, 0.0)
    ev = sym_eigenvalues(L_soft - L_stiff)
    assert ev.min() >= -1e-9 * np.abs(ev).max()
