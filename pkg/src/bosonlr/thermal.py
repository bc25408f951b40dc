"""Finite-volume thermal states and their equilibrium diagnostics.

The grand-canonical state is a sector-truncated Boltzmann ensemble over a
spectral decomposition; every state carries a certified bound on the
relative weight of the neglected sectors (geometric ratio test on the
sector partition sums).  The two-point function extends off the real axis
to the strip -beta <= Im z <= 0 through the double spectral sum, which is
exact at finite dimension; equilibrium checks compare it against
independently time-evolved expectations.
"""

from dataclasses import dataclass

import numpy as np

from .dynamics import SpectralDecomposition, StateVector, eigendecompose, evolve_state
from .errors import (
    DivergingPartitionFunctionError,
    InvalidArgumentError,
    TruncationError,
)
from .operators import SparseOperator

DEFAULT_TAIL_TOL = 1e-10


@dataclass(frozen=True)
class GibbsState:
    """Thermal density matrix exp(-beta (H - mu N)) / Z, sector-truncated.

    ``weights[j]`` is the normalized Boltzmann weight of eigenpair j
    (zero beyond ``n_max``); ``shifted`` holds E_j - mu n_j minus its
    minimum, the overflow-safe exponents reused by the strip evaluation;
    ``tail_estimate`` bounds the relative weight of all neglected sectors.
    """

    decomp: SpectralDecomposition
    hamiltonian: SparseOperator
    beta: float
    mu: float
    n_max: int
    weights: np.ndarray
    shifted: np.ndarray
    z_scaled: float
    log_z: float
    tail_estimate: float

    @property
    def basis(self):
        return self.decomp.basis

    def included_slices(self):
        return [(n, sl) for n, sl in self.decomp.sector_slices() if n <= self.n_max]


def gibbs_state(
    H: SparseOperator,
    beta: float,
    mu: float,
    n_max: int,
    tail_tol: float = DEFAULT_TAIL_TOL,
    decomposition: SpectralDecomposition | None = None,
) -> GibbsState:
    """Grand-canonical state over sectors 0..n_max with a certified tail.

    The tail bound extrapolates the sector partition sums geometrically:
    with q = z[n_max] / z[n_max - 1] < 1, the neglected weight is at most
    z[n_max] q / (1 - q) relative to the kept sum.  Non-decaying sector
    weights (q >= 1) mean the chemical potential is too large for the
    model and no truncation can be certified.
    """
    if beta <= 0:
        raise InvalidArgumentError("inverse temperature must be positive")
    if n_max < 1:
        raise InvalidArgumentError("need at least sectors 0 and 1 for the ratio test")
    if decomposition is None:
        decomposition = eigendecompose(H)
    sectors_present = {n for n, _ in decomposition.sector_slices()}
    missing = set(range(n_max + 1)) - sectors_present
    if missing:
        raise InvalidArgumentError(f"spectra for sectors {sorted(missing)} are not available")
    G = decomposition.energies - mu * decomposition.sectors
    g_min = float(G.min())
    shifted = G - g_min
    boltzmann = np.exp(-beta * shifted)
    z_sector: dict[int, float] = {}
    weights = np.zeros_like(boltzmann)
    for n, sl in decomposition.sector_slices():
        z_sector[n] = float(boltzmann[sl].sum())
        if n <= n_max:
            weights[sl] = boltzmann[sl]
    z_scaled = float(sum(z for n, z in z_sector.items() if n <= n_max))
    weights /= z_scaled
    q = z_sector[n_max] / z_sector[n_max - 1]
    if q >= 1.0:
        raise DivergingPartitionFunctionError(
            f"sector sums are not decaying at the truncation edge (q = {q:.3f}); "
            "lower the chemical potential or raise n_max"
        )
    tail = z_sector[n_max] * q / (1.0 - q) / z_scaled
    if tail >= tail_tol:
        raise TruncationError(
            f"certified tail {tail:.3e} exceeds the configured tolerance {tail_tol:.1e}; "
            "raise n_max"
        )
    return GibbsState(
        decomp=decomposition,
        hamiltonian=H,
        beta=float(beta),
        mu=float(mu),
        n_max=int(n_max),
        weights=weights,
        shifted=shifted,
        z_scaled=z_scaled,
        log_z=float(np.log(z_scaled) - beta * g_min),
        tail_estimate=float(tail),
    )


def fixed_sector_gibbs(
    H: SparseOperator,
    beta: float,
    decomposition: SpectralDecomposition | None = None,
) -> GibbsState:
    """Canonical (fixed particle number) thermal state on a single-sector
    basis; the chemical potential drops out and there is no truncation."""
    if beta <= 0:
        raise InvalidArgumentError("inverse temperature must be positive")
    if H.basis.sector is None:
        raise InvalidArgumentError("fixed_sector_gibbs needs a single-sector basis")
    if decomposition is None:
        decomposition = eigendecompose(H)
    shifted = decomposition.energies - decomposition.energies.min()
    boltzmann = np.exp(-beta * shifted)
    z_scaled = float(boltzmann.sum())
    return GibbsState(
        decomp=decomposition,
        hamiltonian=H,
        beta=float(beta),
        mu=0.0,
        n_max=int(H.basis.sector),
        weights=boltzmann / z_scaled,
        shifted=shifted,
        z_scaled=z_scaled,
        log_z=float(np.log(z_scaled) - beta * decomposition.energies.min()),
        tail_estimate=0.0,
    )


def expectation(state: GibbsState, A: SparseOperator) -> complex:
    """Trace of the density matrix against A."""
    if A.basis.basis_id != state.basis.basis_id:
        raise InvalidArgumentError("observable lives on a different basis")
    V = state.decomp.vectors
    AV = A.matrix @ V
    diag = np.einsum("ij,ij->j", V.conj(), AV)
    return complex(np.dot(state.weights, diag))


def moment_sup(state: GibbsState, p: float) -> float:
    """max over sites x of the thermal expectation of (1 + n_x)^p."""
    if p < 1:
        raise InvalidArgumentError("moment exponent must satisfy p >= 1")
    V = state.decomp.vectors
    probs = (np.abs(V) ** 2) @ state.weights
    occ = state.basis.occupations
    best = 0.0
    for col in range(occ.shape[1]):
        best = max(best, float(np.dot(probs, (1.0 + occ[:, col]) ** float(p))))
    return best


def _require_number_conserving(op: SparseOperator, name: str):
    coo = op.matrix.tocoo()
    totals = op.basis.totals
    if coo.nnz and not np.all(totals[coo.row] == totals[coo.col]):
        raise InvalidArgumentError(f"{name} must conserve the total particle number")


class GreenFunction:
    """Two-point function of a thermal state on the strip -beta <= Im z <= 0.

    F(t) is the time-ordered expectation of the evolved first observable
    against the second; F(t - i beta) swaps the operator order.  Values
    come from the double spectral sum with overflow-safe exponents, O(D^2)
    per point after a one-time O(D^3) rotation into the eigenbasis.
    Evaluations are cached per point.
    """

    def __init__(self, state: GibbsState, A: SparseOperator, B: SparseOperator):
        if A.basis.basis_id != state.basis.basis_id or B.basis.basis_id != state.basis.basis_id:
            raise InvalidArgumentError("observables live on a different basis")
        _require_number_conserving(A, "first observable")
        _require_number_conserving(B, "second observable")
        self.state = state
        self.beta = state.beta
        self._blocks = []
        V = state.decomp.vectors
        for n, sl in state.included_slices():
            Vn = V[sl, sl]
            An = Vn.conj().T @ A.matrix[sl, sl].toarray() @ Vn
            Bn = Vn.conj().T @ B.matrix[sl, sl].toarray() @ Vn
            self._blocks.append(
                (state.decomp.energies[sl], state.shifted[sl], An * Bn.T)
            )
        self._cache: dict[complex, complex] = {}

    def __call__(self, z: complex) -> complex:
        z = complex(z)
        s = -z.imag
        if not -1e-12 <= s <= self.beta + 1e-12:
            raise InvalidArgumentError(
                f"point {z} lies outside the strip -beta <= Im z <= 0 (beta = {self.beta})"
            )
        s = min(max(s, 0.0), self.beta)
        if z in self._cache:
            return self._cache[z]
        t = z.real
        total = 0.0 + 0.0j
        for energies, shifted, C in self._blocks:
            bra = np.exp(-(self.beta - s) * shifted + 1j * energies * t)
            ket = np.exp(-s * shifted - 1j * energies * t)
            total += bra @ C @ ket
        value = complex(total / self.state.z_scaled)
        self._cache[z] = value
        return value


def green_function(state: GibbsState, A: SparseOperator, B: SparseOperator, z: complex) -> complex:
    """Single-point strip evaluation; build a GreenFunction for sweeps."""
    return GreenFunction(state, A, B)(z)


def two_point(
    state: GibbsState,
    A: SparseOperator,
    B: SparseOperator | None,
    t: float,
    order: str = "AB",
    generator: SparseOperator | None = None,
    generator_decomp: SpectralDecomposition | None = None,
    engine: str = "krylov",
) -> complex:
    """gamma(tau_t(A) B) or gamma(B tau_t(A)) by direct time evolution.

    This path never touches the spectral double sum: eigenvectors of the
    density matrix are propagated as states, so it serves as an
    independent oracle for the strip boundary values.  The evolution
    ``generator`` defaults to the state's own Hamiltonian but may be any
    hermitian operator on the same basis (quenches, restricted volumes).
    ``B=None`` gives the plain evolved expectation gamma(tau_t(A)).
    """
    if order not in ("AB", "BA"):
        raise InvalidArgumentError("order must be 'AB' or 'BA'")
    H = generator if generator is not None else state.hamiltonian
    decomp = generator_decomp
    if engine == "dense" and decomp is None:
        decomp = state.decomp if generator is None else eigendecompose(H)
    total = 0.0 + 0.0j
    basis = state.basis
    for j, w in enumerate(state.weights):
        if w == 0.0:
            continue
        psi = state.decomp.vectors[:, j]
        if order == "AB":
            bra = psi
            ket = psi if B is None else B.matrix @ psi
        else:
            bra = psi if B is None else B.matrix.conj().T @ psi
            ket = psi
        left = evolve_state(H, StateVector(basis, bra), t, decomp, engine)
        right = evolve_state(H, StateVector(basis, ket), t, decomp, engine)
        total += w * np.vdot(left.amplitudes, A.matrix @ right.amplitudes)
    return complex(total)


def kms_residual(
    state: GibbsState,
    A: SparseOperator,
    B: SparseOperator,
    t: float,
    gf: GreenFunction | None = None,
) -> tuple[float, float]:
    """Boundary-value residuals of the strip function at real time t.

    Returns (|F(t) - gamma(tau_t(A) B)|, |F(t - i beta) - gamma(B tau_t(A))|),
    the two sides computed by independent code paths (spectral sum versus
    Krylov-propagated expectations).
    """
    if gf is None:
        gf = GreenFunction(state, A, B)
    upper = gf(complex(t, 0.0))
    lower = gf(complex(t, -state.beta))
    direct_ab = two_point(state, A, B, t, "AB", engine="krylov")
    direct_ba = two_point(state, A, B, t, "BA", engine="krylov")
    return (abs(upper - direct_ab), abs(lower - direct_ba))


def invariance_residual(state: GibbsState, A: SparseOperator, t: float) -> float:
    """|gamma(tau_t(A)) - gamma(A)|: stationarity of the thermal state."""
    evolved = two_point(state, A, None, t, "AB", engine="krylov")
    return abs(evolved - expectation(state, A))
