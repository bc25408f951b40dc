import math

import numpy as np
import pytest

from bosonlr import (
    InvalidArgumentError,
    ModelParams,
    ResourceLimitError,
    assemble_hamiltonian,
    basis_vector,
    binomial_inverse_moment,
    build_chain,
    condensate_nonlocality_expectation,
    eigendecompose,
    enumerate_basis,
    enumerate_sectors,
    evolve_state,
    free_particle_amplitude,
    full_region,
    heisenberg_expectation,
    heisenberg_operator,
    identity_operator,
    local_observable,
    number_operator,
    operator_norm,
)
from bosonlr.dynamics import StateVector, inverse_moment_upper_bound


def chain_model(L, sector=None, n_max=None, cap=None, J=1.0, U=0.0):
    g = build_chain(L)
    reg = full_region(g)
    if sector is not None:
        basis = enumerate_basis(reg, sector=sector, cap=cap)
    else:
        basis = enumerate_sectors(reg, n_max, cap=cap)
    H = assemble_hamiltonian(g, reg, basis, ModelParams(hopping=J, onsite=U))
    return g, reg, basis, H


def test_eigendecompose_tiny():
    _, _, basis, H = chain_model(1, sector=0)
    d = eigendecompose(H)
    assert d.energies == pytest.approx([0.0])
    _, _, _, H2 = chain_model(2, sector=1)
    d2 = eigendecompose(H2)
    assert d2.energies == pytest.approx([-1.0, 1.0])
    _, _, _, H3 = chain_model(1, sector=2, U=1.0)
    assert eigendecompose(H3).energies == pytest.approx([2.0])


def test_eigendecompose_residuals_and_unitarity():
    _, _, basis, H = chain_model(4, n_max=3, cap=2, U=0.8)
    d = eigendecompose(H)
    Hd = H.to_dense()
    norm_h = operator_norm(H)
    for j in range(d.dimension):
        r = np.linalg.norm(Hd @ d.vectors[:, j] - d.energies[j] * d.vectors[:, j])
        assert r <= 1e-10 * norm_h
    gram = d.vectors.conj().T @ d.vectors
    assert np.abs(gram - np.eye(d.dimension)).max() < 1e-10
    # sector labels and block ordering
    assert list(d.sectors) == sorted(d.sectors)
    for n, sl in d.sector_slices():
        assert np.all(basis.totals[sl] == n)


def test_eigendecompose_dense_cap():
    _, _, _, H = chain_model(3, sector=2)
    with pytest.raises(ResourceLimitError):
        eigendecompose(H, dense_cap=4)


def test_evolve_identity_cases():
    _, _, basis, H = chain_model(3, sector=2, U=0.5)
    psi = basis_vector(basis, (1, 1, 0))
    out = evolve_state(H, psi, 0.0)
    assert np.allclose(out.amplitudes, psi.amplitudes)
    # diagonal generator: pure phase on an occupation eigenstate
    _, _, b1, H0 = chain_model(2, sector=2, J=0.0, U=1.0)
    phi = basis_vector(b1, (2, 0))
    out = evolve_state(H0, phi, 0.7)
    k = b1.index_of((2, 0))
    assert out.amplitudes[k] == pytest.approx(np.exp(-1j * 2.0 * 0.7))


def test_free_spreading_matches_bessel_series():
    g, reg, basis, H = chain_model(41, sector=1)
    occ = [0] * 41
    occ[20] = 1
    psi = basis_vector(basis, occ)
    d = eigendecompose(H)
    for t in (0.5, 1.0):
        out = evolve_state(H, psi, t, decomposition=d)
        for x in range(-6, 7):
            occ_x = [0] * 41
            occ_x[20 + x] = 1
            amp = out.amplitudes[basis.index_of(occ_x)]
            assert abs(amp - free_particle_amplitude(x, t)) < 1e-8


def test_unitarity_group_law_energy():
    _, _, basis, H = chain_model(5, sector=2, U=1.0)
    rng = np.random.default_rng(0)
    amps = rng.standard_normal(basis.dimension) + 1j * rng.standard_normal(basis.dimension)
    amps /= np.linalg.norm(amps)
    psi = StateVector(basis, amps)
    d = eigendecompose(H)
    for engine, dec in (("dense", d), ("krylov", None)):
        out = evolve_state(H, psi, 1.3, decomposition=dec, engine=engine)
        assert abs(out.norm - 1.0) < 1e-10
        step = evolve_state(
            H, evolve_state(H, psi, 0.4, dec, engine), 0.9, dec, engine
        )
        assert np.abs(step.amplitudes - out.amplitudes).max() < 1e-9
        e0 = np.vdot(psi.amplitudes, H.matrix @ psi.amplitudes).real
        et = np.vdot(out.amplitudes, H.matrix @ out.amplitudes).real
        assert abs(et - e0) < 1e-9 * operator_norm(H)


def test_engine_agreement():
    for L, kw in ((5, dict(sector=3, U=1.0)), (6, dict(n_max=2, cap=2, U=0.3))):
        _, _, basis, H = chain_model(L, **kw)
        d = eigendecompose(H)
        rng = np.random.default_rng(L)
        amps = rng.standard_normal(basis.dimension) + 1j * rng.standard_normal(basis.dimension)
        amps /= np.linalg.norm(amps)
        psi = StateVector(basis, amps)
        for t in (0.5, 2.0):
            dense = evolve_state(H, psi, t, decomposition=d)
            krylov = evolve_state(H, psi, t, engine="krylov")
            assert np.abs(dense.amplitudes - krylov.amplitudes).max() < 1e-9


def test_sector_confinement_exact():
    _, _, basis, H = chain_model(3, n_max=2, U=0.5)
    start = basis_vector(basis, (1, 0, 0))
    out = evolve_state(H, start, 1.7)
    other = basis.totals != 1
    assert np.all(out.amplitudes[other] == 0.0)


def test_heisenberg_expectation_identities():
    g, reg, basis, H = chain_model(3, sector=2, U=1.0)
    d = eigendecompose(H)
    psi = basis_vector(basis, (1, 1, 0))
    ident = identity_operator(basis)
    B = number_operator(basis, 1)
    for t in (0.0, 0.8):
        val = heisenberg_expectation(H, ident, psi, B, t, decomposition=d)
        assert val == pytest.approx(np.vdot(psi.amplitudes, B.matrix @ psi.amplitudes))
    A = number_operator(basis, 0)
    t0 = heisenberg_expectation(H, A, psi, B, 0.0, decomposition=d)
    assert t0 == pytest.approx(np.vdot(psi.amplitudes, (A @ B).matrix @ psi.amplitudes))


def test_heisenberg_quench_against_dense_conjugation():
    # thermal state of the decoupled model, evolved with the hopping model;
    # brute-force check of Tr[rho0 e^{iHt} A e^{-iHt}]
    from scipy.linalg import expm
    from bosonlr import ModelParams, assemble_hamiltonian, fixed_sector_gibbs, full_region

    g = build_chain(4)
    reg = full_region(g)
    basis = enumerate_basis(reg, sector=2)
    H = assemble_hamiltonian(g, reg, basis, ModelParams(hopping=1.0, onsite=1.0))
    H0 = assemble_hamiltonian(g, reg, basis, ModelParams(hopping=0.0, onsite=1.0))
    gam0 = fixed_sector_gibbs(H0, 1.0)
    A = number_operator(basis, 1)
    rho0 = (gam0.decomp.vectors * gam0.weights) @ gam0.decomp.vectors.conj().T
    for t in (0.3, 1.1):
        U = expm(-1j * t * H.to_dense())
        brute = np.trace(rho0 @ U.conj().T @ A.to_dense() @ U)
        got = heisenberg_expectation(H, A, gam0, None, t, engine="krylov")
        assert got == pytest.approx(complex(brute), abs=1e-10)


def test_heisenberg_conserved_observable_constant():
    # decoupled sites: every on-site number is conserved
    _, _, basis, H = chain_model(3, sector=2, J=0.0, U=1.0)
    psi = basis_vector(basis, (2, 0, 0))
    A = number_operator(basis, 0)
    vals = [heisenberg_expectation(H, A, psi, None, t, engine="krylov") for t in (0.0, 0.5, 2.0)]
    assert max(abs(v - vals[0]) for v in vals) < 1e-12


def test_heisenberg_operator():
    _, _, basis, H = chain_model(3, sector=2, U=0.7)
    d = eigendecompose(H)
    A = local_observable(basis, {"kind": "number_function", "site": 0, "fn": "inv_one_plus_n"})
    assert np.abs(heisenberg_operator(H, A, 0.0, d) - A.to_dense()).max() < 1e-12
    # functions of the generator are fixed points
    fH = d.vectors @ np.diag(np.exp(-d.energies)) @ d.vectors.conj().T
    from bosonlr.operators import SparseOperator
    import scipy.sparse as sp

    fH_op = SparseOperator(sp.csr_matrix(fH), basis, True)
    assert np.abs(heisenberg_operator(H, fH_op, 1.1, d) - fH).max() < 1e-10
    # unitary conjugation preserves the norm
    rng = np.random.default_rng(5)
    R = rng.standard_normal((basis.dimension, basis.dimension))
    R = R + R.T
    R_op = SparseOperator(sp.csr_matrix(R), basis, True)
    evolved = heisenberg_operator(H, R_op, 0.9, d)
    assert operator_norm(evolved) == pytest.approx(operator_norm(R), abs=1e-8)


def quad_amplitude(x, t, n=20001):
    """Independent quadrature oracle for the free lattice propagator."""
    k = np.linspace(-math.pi, math.pi, n)
    integrand = np.exp(2j * t * np.cos(k)) * np.exp(1j * k * x)
    return np.trapezoid(integrand, k) / (2 * math.pi)


def test_free_particle_amplitude_values():
    assert free_particle_amplitude(0, 0.0) == 1.0
    assert free_particle_amplitude(3, 0.0) == 0.0
    for t in (0.5, 1.0, 2.0):
        total = abs(free_particle_amplitude(0, t)) ** 2
        x = 1
        while True:
            a = abs(free_particle_amplitude(x, t)) ** 2
            total += 2 * a
            if a < 1e-16 and x > 2 * t:
                break
            x += 1
        assert total == pytest.approx(1.0, abs=1e-12)
    for x, t in ((0, 1.0), (2, 0.7), (5, 1.8)):
        assert abs(free_particle_amplitude(x, t) - quad_amplitude(x, t)) < 1e-10


def test_condensate_expectation():
    assert condensate_nonlocality_expectation(5, 3, 0.0) == 1.0
    p = abs(free_particle_amplitude(1, 0.5)) ** 2
    assert condensate_nonlocality_expectation(1, 1, 0.5) == pytest.approx(1 - p / 2)
    prev = 1.0
    for m in (1, 10, 100, 1000, 10000):
        val = condensate_nonlocality_expectation(m, 1, 0.5)
        assert val <= prev + 1e-15
        assert val <= inverse_moment_upper_bound(m, p) + 1e-12
        prev = val
    assert prev < 0.05  # m p >> 400 here


def test_binomial_inverse_moment_against_direct_sum():
    rng = np.random.default_rng(2)
    for m in (1, 7, 40, 100):
        for p in rng.uniform(0.01, 0.99, 3):
            direct = sum(
                math.comb(m, k) * p**k * (1 - p) ** (m - k) / (k + 1) for k in range(m + 1)
            )
            assert binomial_inverse_moment(m, p) == pytest.approx(direct, rel=1e-12)


def test_state_vector_validation():
    _, _, basis, _ = chain_model(2, sector=1)
    with pytest.raises(InvalidArgumentError):
        StateVector(basis, np.ones(5, dtype=complex))
    with pytest.raises(InvalidArgumentError):
        StateVector(basis, np.array([1.0, np.inf], dtype=complex))
    with pytest.raises(InvalidArgumentError):
        StateVector(basis, np.array([1.0, 0.0], dtype=complex), norm=2.0)
