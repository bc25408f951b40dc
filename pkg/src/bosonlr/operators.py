"""Sparse operators on occupation bases.

Assembles the hopping and interaction parts of lattice-boson Hamiltonians,
number operators and their moments, per-site occupation cutoff projections,
and bounded gauge-invariant observables.  All matrix elements are exact
integer / square-root-of-integer arithmetic in double precision; entries
with magnitude at or below ``PRUNE_TOL`` are dropped so the stored pattern
is clean.

Conventions
-----------
* Hopping sums run over unordered edges once, each edge contributing
  ``-J (a_x^* a_y + a_y^* a_x)``.  Set ``ModelParams.ordered_hopping`` to
  recover the ordered-pair reading (every edge counted twice).
* The interaction sum follows the ordered-pair reading verbatim: off-site
  couplings are counted twice (once per order), on-site once, so a pure
  on-site coupling U yields the standard ``U * n (n - 1)`` per site.
* On a capped basis, hopping elements that would exceed the cap are
  dropped (hard-wall truncation); the resulting evolution is exactly the
  occupation-cutoff-projected dynamics generated by P H P.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse

from .errors import InvalidArgumentError, NumericalFailureError
from .fock import FockBasis
from .lattice import LatticeGraph, Region

PRUNE_TOL = 1e-15

DENSE_NORM_CAP = 1024
POWER_MAX_ITER = 10_000


@dataclass(frozen=True)
class ModelParams:
    """Couplings of the boson lattice model, in units of the hopping energy.

    ``offsite[k]`` is the two-body coupling at hop distance k+1; couplings
    are parameterized by distance, so the symmetry v(x, y) = v(y, x) holds
    by construction.  ``onsite`` is the coefficient of n (n - 1) per site.
    """

    hopping: float = 1.0
    onsite: float = 0.0
    offsite: tuple[float, ...] = ()
    ordered_hopping: bool = False

    @property
    def range_hops(self) -> int:
        """Smallest r with v(x, y) = 0 whenever d(x, y) >= r."""
        k = len(self.offsite)
        while k > 0 and self.offsite[k - 1] == 0.0:
            k -= 1
        return 1 + k

    def v(self, distance: int) -> float:
        if distance == 0:
            return self.onsite
        if distance - 1 < len(self.offsite):
            return self.offsite[distance - 1]
        return 0.0

    @property
    def v_inf(self) -> float:
        return max([abs(self.onsite)] + [abs(v) for v in self.offsite], default=0.0)


@dataclass(frozen=True)
class SparseOperator:
    """CSR operator bound to a basis, with structural flags.

    ``hermitian`` and ``diagonal`` are set by the assembly routines that
    guarantee them; ``support`` records the sites an observable acts on.
    """

    matrix: sparse.csr_matrix
    basis: FockBasis
    hermitian: bool
    diagonal: bool = False
    support: tuple[int, ...] | None = None

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def apply(self, vec: np.ndarray) -> np.ndarray:
        return self.matrix @ vec

    def dagger(self) -> "SparseOperator":
        if self.hermitian:
            return self
        return SparseOperator(
            _pruned(self.matrix.conj().T.tocsr()), self.basis, False, self.diagonal, self.support
        )

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def __matmul__(self, other: "SparseOperator") -> "SparseOperator":
        _check_same_basis(self, other)
        return SparseOperator(
            _pruned((self.matrix @ other.matrix).tocsr()),
            self.basis,
            False,
            self.diagonal and other.diagonal,
            _union_support(self.support, other.support),
        )


def _union_support(a, b):
    if a is None or b is None:
        return None
    return tuple(sorted(set(a) | set(b)))


def _check_same_basis(*ops: SparseOperator):
    ids = {op.basis.basis_id for op in ops}
    if len(ids) > 1:
        raise InvalidArgumentError("operators live on different bases")


def _pruned(mat: sparse.csr_matrix) -> sparse.csr_matrix:
    mat = mat.tocsr()
    if mat.nnz:
        mat.data[np.abs(mat.data) <= PRUNE_TOL] = 0.0
        mat.eliminate_zeros()
    mat.sort_indices()
    return mat


def _diag_operator(basis: FockBasis, values: np.ndarray, support=None) -> SparseOperator:
    values = np.asarray(values, dtype=np.complex128)
    mat = _pruned(sparse.diags(values, 0, shape=(basis.dimension, basis.dimension), format="csr"))
    hermitian = bool(np.allclose(values.imag, 0.0, atol=0.0))
    return SparseOperator(mat, basis, hermitian, diagonal=True, support=support)


def identity_operator(basis: FockBasis) -> SparseOperator:
    return _diag_operator(basis, np.ones(basis.dimension))


def zero_operator(basis: FockBasis) -> SparseOperator:
    mat = sparse.csr_matrix((basis.dimension, basis.dimension), dtype=np.complex128)
    return SparseOperator(mat, basis, True, diagonal=True)


def _region_columns(basis: FockBasis, region: Region) -> list[int]:
    return [basis.site_column(x) for x in region.sites]


def hop_term(basis: FockBasis, x: int, y: int) -> SparseOperator:
    """Raw ``a_x^* a_y`` on the basis (not hermitian for x != y).

    Moves that would leave the basis (cap exceeded) are dropped, which is
    the hard-wall truncation convention.
    """
    if x == y:
        raise InvalidArgumentError("hop_term needs two distinct sites; use number_operator")
    cx, cy = basis.site_column(x), basis.site_column(y)
    rows, cols, vals = [], [], []
    occ = basis.occupations
    for k in range(basis.dimension):
        ny = occ[k, cy]
        if ny == 0:
            continue
        target = list(basis.state(k))
        target[cy] -= 1
        target[cx] += 1
        j = basis.index.get(tuple(target))
        if j is None:
            continue
        rows.append(j)
        cols.append(k)
        vals.append(np.sqrt(ny * (occ[k, cx] + 1.0)))
    mat = sparse.csr_matrix(
        (np.asarray(vals, dtype=np.complex128), (rows, cols)),
        shape=(basis.dimension, basis.dimension),
    )
    return SparseOperator(_pruned(mat), basis, False, support=(min(x, y), max(x, y)))


def assemble_hopping(
    g: LatticeGraph, region: Region, basis: FockBasis, J: float = 1.0, ordered: bool = False
) -> SparseOperator:
    """Kinetic term ``-J sum_edges (a_x^* a_y + a_y^* a_x)`` within ``region``.

    ``region`` may be a subset of the basis region; only edges with both
    endpoints inside contribute, so the same basis can carry the
    Hamiltonians of nested volumes.
    """
    _check_region_in_basis(basis, region)
    member = region.as_set()
    factor = 2.0 if ordered else 1.0
    rows, cols, vals = [], [], []
    occ = basis.occupations
    cols_of = {x: basis.site_column(x) for x in region.sites}
    for x, y in g.edges():
        if x not in member or y not in member:
            continue
        cx, cy = cols_of[x], cols_of[y]
        for k in range(basis.dimension):
            # a_x^* a_y moves one particle y -> x; the reverse move supplies
            # the conjugate entry, so hermiticity is exact as stored.
            for src, dst in ((cy, cx), (cx, cy)):
                n_src = occ[k, src]
                if n_src == 0:
                    continue
                target = list(basis.state(k))
                target[src] -= 1
                target[dst] += 1
                j = basis.index.get(tuple(target))
                if j is None:
                    continue
                rows.append(j)
                cols.append(k)
                vals.append(-J * factor * np.sqrt(n_src * (occ[k, dst] + 1.0)))
    mat = sparse.csr_matrix(
        (np.asarray(vals, dtype=np.complex128), (rows, cols)),
        shape=(basis.dimension, basis.dimension),
    )
    return SparseOperator(_pruned(mat), basis, True, support=tuple(region.sites))


def _check_region_in_basis(basis: FockBasis, region: Region):
    missing = [x for x in region.sites if x not in basis.region.sites]
    if missing:
        raise InvalidArgumentError(f"sites {missing} of the region are not carried by the basis")


def assemble_interaction(
    g: LatticeGraph,
    region: Region,
    basis: FockBasis,
    params: ModelParams,
    v_table: dict[tuple[int, int], float] | None = None,
) -> SparseOperator:
    """Two-body density-density term, diagonal in the occupation basis.

    On occupation n the value is ``sum_x v(x,x) n_x (n_x - 1) +
    sum_{x != y} v(x,y) n_x n_y`` over ordered pairs in ``region``.  An
    explicit ``v_table`` (keyed by site pairs) overrides the distance
    parameterization and must be symmetric.
    """
    _check_region_in_basis(basis, region)
    if v_table is not None:
        for (x, y), val in v_table.items():
            if x != y and v_table.get((y, x)) != val:
                raise InvalidArgumentError(f"interaction table asymmetric at pair ({x}, {y})")

    def coupling(x: int, y: int) -> float:
        if v_table is not None:
            return v_table.get((x, y), 0.0)
        return params.v(int(g.dist[x, y]))

    occ = basis.occupations
    values = np.zeros(basis.dimension)
    sites = list(region.sites)
    for i, x in enumerate(sites):
        cx = basis.site_column(x)
        nx = occ[:, cx]
        u = coupling(x, x)
        if u != 0.0:
            values += u * nx * (nx - 1)
        for y in sites[i + 1 :]:
            vxy = coupling(x, y)
            if vxy != 0.0:
                values += 2.0 * vxy * nx * occ[:, basis.site_column(y)]
    return _diag_operator(basis, values, support=tuple(region.sites))


def assemble_hamiltonian(
    g: LatticeGraph, region: Region, basis: FockBasis, params: ModelParams
) -> SparseOperator:
    """Full local Hamiltonian, kinetic plus interaction, on ``region``."""
    T = assemble_hopping(g, region, basis, J=params.hopping, ordered=params.ordered_hopping)
    V = assemble_interaction(g, region, basis, params)
    mat = _pruned((T.matrix + V.matrix).tocsr())
    return SparseOperator(mat, basis, True, support=tuple(region.sites))


def number_operator(basis: FockBasis, x: int) -> SparseOperator:
    """Diagonal particle number at site x."""
    col = basis.site_column(x)
    return _diag_operator(basis, basis.occupations[:, col].astype(float), support=(x,))


def number_moment(basis: FockBasis, x: int, p: float) -> SparseOperator:
    """Diagonal ``(1 + n_x)^p``; p >= 1 may be fractional."""
    if p < 1:
        raise InvalidArgumentError("moment exponent must satisfy p >= 1")
    col = basis.site_column(x)
    vals = (1.0 + basis.occupations[:, col]) ** float(p)
    return _diag_operator(basis, vals, support=(x,))


def total_number(basis: FockBasis, region: Region | None = None) -> SparseOperator:
    """Total particle number, optionally restricted to a subregion."""
    if region is None:
        vals = basis.totals.astype(float)
        support = tuple(basis.region.sites)
    else:
        cols = _region_columns(basis, region)
        vals = basis.occupations[:, cols].sum(axis=1).astype(float)
        support = tuple(region.sites)
    return _diag_operator(basis, vals, support=support)


def cutoff_projection(basis: FockBasis, Y: Region, lam: int) -> SparseOperator:
    """Projection onto configurations with at most ``lam`` particles on
    every site of Y.  Diagonal, idempotent, commutes with all number
    operators."""
    if lam < 0:
        raise InvalidArgumentError("cutoff level must be nonnegative")
    cols = _region_columns(basis, Y)
    if cols:
        ok = (basis.occupations[:, cols] <= lam).all(axis=1)
    else:
        ok = np.ones(basis.dimension, dtype=bool)
    return _diag_operator(basis, ok.astype(float), support=tuple(Y.sites))


def sandwich(P: SparseOperator, H: SparseOperator) -> SparseOperator:
    """P H P for a diagonal 0/1 projection P.

    Implemented by masking rows and columns, which keeps surviving entries
    bit-identical to H's; with P = identity the result equals H exactly.
    """
    _check_same_basis(P, H)
    if not P.diagonal:
        raise InvalidArgumentError("sandwich expects a diagonal projection")
    mask = P.matrix.diagonal().real
    if not np.all((mask == 0.0) | (mask == 1.0)):
        raise InvalidArgumentError("sandwich expects a 0/1 projection")
    coo = H.matrix.tocoo()
    keep = (mask[coo.row] != 0.0) & (mask[coo.col] != 0.0)
    mat = sparse.csr_matrix(
        (coo.data[keep], (coo.row[keep], coo.col[keep])), shape=H.matrix.shape
    )
    return SparseOperator(_pruned(mat), H.basis, H.hermitian, H.diagonal, H.support)


def same_matrix(A: SparseOperator, B: SparseOperator) -> bool:
    """Exact structural equality of the stored matrices (no tolerance)."""
    a, b = A.matrix, B.matrix
    return (
        a.shape == b.shape
        and a.nnz == b.nnz
        and np.array_equal(a.indptr, b.indptr)
        and np.array_equal(a.indices, b.indices)
        and np.array_equal(a.data, b.data)
    )


def commutator(A: SparseOperator, B: SparseOperator) -> SparseOperator:
    """A B - B A on a common basis."""
    _check_same_basis(A, B)
    if A.diagonal and B.diagonal:
        return zero_operator(A.basis)
    mat = _pruned((A.matrix @ B.matrix - B.matrix @ A.matrix).tocsr())
    return SparseOperator(mat, A.basis, False, support=_union_support(A.support, B.support))


def operator_norm(
    op,
    tol: float = 1e-8,
    seed: int = 0,
    method: str = "auto",
    max_iter: int = POWER_MAX_ITER,
) -> float:
    """Largest singular value of an operator.

    Dense SVD for dimension <= 1024; larger operators use power iteration
    on A^* A with relative tolerance ``tol`` and a seeded start vector.
    ``method`` forces one path ("dense" or "power").
    """
    if isinstance(op, SparseOperator):
        mat = op.matrix
    elif sparse.issparse(op):
        mat = op.tocsr()
    else:
        mat = np.asarray(op)
    dim = mat.shape[0]
    if dim == 0:
        return 0.0
    if method not in ("auto", "dense", "power"):
        raise InvalidArgumentError(f"unknown norm method {method!r}")
    if method == "dense" or (method == "auto" and dim <= DENSE_NORM_CAP):
        dense = mat.toarray() if sparse.issparse(mat) else mat
        return float(np.linalg.norm(dense, 2))
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    adj = mat.conj().T
    lam = 0.0
    for _ in range(max_iter):
        w = adj @ (mat @ v)
        lam_new = float(np.linalg.norm(w))
        if lam_new == 0.0:
            return 0.0
        v = w / lam_new
        if abs(lam_new - lam) <= tol * lam_new:
            return float(np.sqrt(lam_new))
        lam = lam_new
    raise NumericalFailureError(
        f"operator norm power iteration did not converge in {max_iter} steps "
        f"(last estimate {np.sqrt(lam):.6e})"
    )


_NAMED_FUNCTIONS = {
    "inv_one_plus_n": lambda n: 1.0 / (1.0 + n),
}


def local_observable(basis: FockBasis, spec: dict) -> SparseOperator:
    """Bounded gauge-invariant observable from a declarative spec.

    Supported kinds:

    * ``{"kind": "number_function", "site": x, "fn": name | [table] | callable}``
      -- a bounded function of the on-site particle number;
    * ``{"kind": "number_function", "sites": [..], "fn": callable}``
      -- a function of several on-site numbers (in-process use only);
    * ``{"kind": "indicator", "site": x, "level": k}`` -- the spectral
      projection onto n_x = k;
    * ``{"kind": "normalized_hop", "sites": [x, y]}`` -- the symmetrized
      hop divided by 2 sqrt(cap (cap + 1)), so its norm is at most one.

    The support region is recorded on the returned operator.
    """
    kind = spec.get("kind")
    if kind == "number_function":
        fn = spec.get("fn")
        if isinstance(fn, str):
            if fn not in _NAMED_FUNCTIONS:
                raise InvalidArgumentError(f"unknown observable function {fn!r}")
            func = _NAMED_FUNCTIONS[fn]
        elif isinstance(fn, (list, tuple, np.ndarray)):
            table = np.asarray(fn, dtype=float)

            def func(n, _table=table):
                if n >= len(_table):
                    raise InvalidArgumentError(
                        f"observable table of length {len(_table)} too short for occupation {n}"
                    )
                return _table[int(n)]

        elif callable(fn):
            func = fn
        else:
            raise InvalidArgumentError("number_function needs fn as name, table, or callable")
        if "site" in spec:
            col = basis.site_column(int(spec["site"]))
            vals = np.array([func(int(n)) for n in basis.occupations[:, col]])
            return _diag_operator(basis, vals, support=(int(spec["site"]),))
        sites = [int(s) for s in spec["sites"]]
        cols = [basis.site_column(s) for s in sites]
        vals = np.array([func(*(int(v) for v in row)) for row in basis.occupations[:, cols]])
        return _diag_operator(basis, vals, support=tuple(sorted(sites)))
    if kind == "indicator":
        x, k = int(spec["site"]), int(spec["level"])
        col = basis.site_column(x)
        return _diag_operator(basis, (basis.occupations[:, col] == k).astype(float), support=(x,))
    if kind == "normalized_hop":
        x, y = (int(s) for s in spec["sites"])
        cap = basis.site_cap if basis.site_cap is not None else basis.max_total
        cap = max(int(cap), 1)
        h = hop_term(basis, x, y)
        mat = _pruned(((h.matrix + h.matrix.conj().T) / (2.0 * np.sqrt(cap * (cap + 1.0)))).tocsr())
        return SparseOperator(mat, basis, True, support=(min(x, y), max(x, y)))
    raise InvalidArgumentError(f"unknown observable kind {kind!r}")


def dump_operator(op: SparseOperator, path) -> None:
    """Write the operator in matrix-market coordinate format (1-based,
    complex entries), for offline inspection behind a debug flag."""
    coo = op.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("%%MatrixMarket matrix coordinate complex general\n")
        fh.write(f"% basis_id={op.basis.basis_id} hermitian={op.hermitian}\n")
        fh.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for k in order:
            v = coo.data[k]
            fh.write(f"{coo.row[k] + 1} {coo.col[k] + 1} {v.real:.17g} {v.imag:.17g}\n")
