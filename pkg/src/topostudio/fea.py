"""Plane-stress finite elements on the regular quad grid.

Elements are unit squares with unit thickness, four nodes each, bilinear
shape functions.  Element DOFs are ordered by node [top-left, top-right,
bottom-right, bottom-left], x before y at each node, consistent with the
y-down grid convention of the model module (this node cycle has positive
Jacobian in y-down coordinates).
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import DensityField, FeaSolution, GridDims, ProblemSpec

DENSE_DOF_LIMIT = 2000


class SolverError(RuntimeError):
    """Linear solve failed to converge; typically a disconnected load path."""


def element_stiffness(nu: float) -> np.ndarray:
    """8x8 unit-square Q4 plane-stress stiffness at E=1 for Poisson ratio nu."""
    if not (0.0 < nu < 0.5):
        raise ValueError(f"nu must lie in (0, 0.5), got {nu}")
    k = np.array(
        [
            1 / 2 - nu / 6,
            1 / 8 + nu / 8,
            -1 / 4 - nu / 12,
            -1 / 8 + 3 * nu / 8,
            -1 / 4 + nu / 12,
            -1 / 8 - nu / 8,
            nu / 6,
            1 / 8 - 3 * nu / 8,
        ]
    )
    pattern = np.array(
        [
            [0, 1, 2, 3, 4, 5, 6, 7],
            [1, 0, 7, 6, 5, 4, 3, 2],
            [2, 7, 0, 5, 6, 3, 4, 1],
            [3, 6, 5, 0, 7, 2, 1, 4],
            [4, 5, 6, 7, 0, 1, 2, 3],
            [5, 4, 3, 2, 1, 0, 7, 6],
            [6, 3, 4, 1, 2, 7, 0, 5],
            [7, 2, 1, 4, 3, 6, 5, 0],
        ]
    )
    return k[pattern] / (1.0 - nu * nu)


def element_dof_indices(dims: GridDims) -> np.ndarray:
    """(num_elements, 8) int32 table of global DOF indices per element."""
    nelx, nely = dims.nelx, dims.nely
    ex = np.tile(np.arange(nelx), nely)
    ey = np.repeat(np.arange(nely), nelx)
    n_tl = ey * (nelx + 1) + ex
    n_tr = n_tl + 1
    n_bl = n_tl + (nelx + 1)
    n_br = n_bl + 1
    nodes = np.stack([n_tl, n_tr, n_br, n_bl], axis=1)
    edofs = np.empty((dims.num_elements, 8), dtype=np.int32)
    edofs[:, 0::2] = 2 * nodes
    edofs[:, 1::2] = 2 * nodes + 1
    return edofs


@dataclass(frozen=True, eq=False)
class FeaWorkspace:
    """Cached index structure for one (dims, supports, nu) combination."""

    dims: GridDims
    ke: np.ndarray
    edofs: np.ndarray
    free_index: np.ndarray  # full DOF -> free DOF index, -1 where constrained
    free_dofs: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    slots: np.ndarray  # (num_elements, 8, 8) -> CSR data slot, nnz = discard
    diag_slots: np.ndarray  # CSR data slot of each free diagonal entry

    @property
    def nnz(self) -> int:
        return self.indices.shape[0]

    @property
    def num_free(self) -> int:
        return self.free_dofs.shape[0]


@functools.lru_cache(maxsize=32)
def _workspace(dims: GridDims, supports: tuple, nu: float) -> FeaWorkspace:
    ke = element_stiffness(nu)
    edofs = element_dof_indices(dims)
    fixed = np.zeros(dims.num_dofs, dtype=bool)
    for s in supports:
        if s.fix_x:
            fixed[2 * s.node] = True
        if s.fix_y:
            fixed[2 * s.node + 1] = True
    free_dofs = np.flatnonzero(~fixed)
    nfree = free_dofs.shape[0]
    free_index = np.full(dims.num_dofs, -1, dtype=np.int64)
    free_index[free_dofs] = np.arange(nfree)

    fe = free_index[edofs]  # (nel, 8)
    fi = fe[:, :, None]
    fj = fe[:, None, :]
    valid = (fi >= 0) & (fj >= 0)
    keys = np.where(valid, fi * nfree + fj, -1)
    uniq, inverse = np.unique(keys[valid], return_inverse=True)
    nnz = uniq.shape[0]
    slots = np.full((dims.num_elements, 8, 8), nnz, dtype=np.int64)
    slots[valid] = inverse

    rows = uniq // nfree
    cols = uniq % nfree
    indptr = np.zeros(nfree + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=nfree), out=indptr[1:])
    indices = cols.astype(np.int32)
    diag_slots = np.flatnonzero(rows == cols)
    if diag_slots.shape[0] != nfree:
        raise SolverError("free DOF without a stiffness diagonal entry")
    return FeaWorkspace(
        dims=dims,
        ke=ke,
        edofs=edofs,
        free_index=free_index,
        free_dofs=free_dofs,
        indptr=indptr,
        indices=indices,
        slots=slots,
        diag_slots=diag_slots,
    )


def workspace_for(spec: ProblemSpec) -> FeaWorkspace:
    return _workspace(spec.dims, spec.supports, spec.material.nu)


@dataclass(frozen=True, eq=False)
class AssembledSystem:
    """Global stiffness over free DOFs (CSR) plus the matching load vector."""

    workspace: FeaWorkspace
    data: np.ndarray
    load: np.ndarray  # over free DOFs

    @property
    def num_free(self) -> int:
        return self.workspace.num_free


def young_modulus(density: DensityField, spec: ProblemSpec) -> np.ndarray:
    """Per-element interpolated modulus E = emin + rho^p (e0 - emin)."""
    m = spec.material
    return m.emin + density.values**m.penal * (m.e0 - m.emin)


def assemble(density: DensityField, spec: ProblemSpec) -> AssembledSystem:
    if density.dims != spec.dims:
        raise ValueError("density grid does not match problem grid")
    ws = workspace_for(spec)
    e_mod = young_modulus(density, spec)
    data = _kernels.assemble_values(ws.slots, e_mod, ws.ke, ws.nnz)
    load = np.zeros(ws.num_free)
    for ld in spec.loads:
        for dof, component in ((2 * ld.node, ld.fx), (2 * ld.node + 1, ld.fy)):
            i = ws.free_index[dof]
            if i >= 0:
                load[i] += component
    return AssembledSystem(workspace=ws, data=data, load=load)


def _solve_dense(system: AssembledSystem) -> np.ndarray:
    import scipy.sparse as sp
    from scipy.linalg import cho_factor, cho_solve

    ws = system.workspace
    n = ws.num_free
    k = sp.csr_matrix((system.data, ws.indices, ws.indptr), shape=(n, n)).toarray()
    try:
        factor = cho_factor(k)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"stiffness matrix not positive definite: {exc}") from exc
    u = cho_solve(factor, system.load)
    # one step of iterative refinement keeps F^T U consistent with the
    # element-energy sum even with emin-scaled void regions in the matrix
    residual = system.load - k @ u
    u += cho_solve(factor, residual)
    return u


def solve(
    system: AssembledSystem,
    tol: float = 1e-8,
    max_iter: int | None = None,
    x0: np.ndarray | None = None,
    method: str = "auto",
) -> FeaSolution:
    """Displacements, compliance F^T U, and per-element energies u_e^T k0 u_e.

    method "auto" uses a dense Cholesky under DENSE_DOF_LIMIT free DOFs and
    Jacobi-preconditioned conjugate gradients above it; "dense" and "pcg"
    force a path.  x0 (full-length displacements) warm-starts the iterative
    path and is ignored by the dense one.
    """
    ws = system.workspace
    nfree = ws.num_free
    u_full = np.zeros(ws.dims.num_dofs)
    if nfree == 0 or not np.any(system.load):
        energies = _kernels.element_energies(u_full, ws.edofs, ws.ke)
        return FeaSolution(u_full, 0.0, energies)

    if method == "auto":
        method = "dense" if nfree <= DENSE_DOF_LIMIT else "pcg"
    if method == "dense":
        u_free = _solve_dense(system)
    elif method == "pcg":
        diag = system.data[ws.diag_slots]
        if np.any(diag <= 0.0):
            raise SolverError("nonpositive stiffness diagonal")
        start = np.zeros(nfree)
        if x0 is not None:
            start = np.asarray(x0, dtype=np.float64).ravel()[ws.free_dofs].copy()
        if max_iter is None:
            max_iter = max(1000, 2 * nfree)
        u_free, _, converged = _kernels.pcg_solve(
            ws.indptr,
            ws.indices,
            system.data,
            system.load,
            start,
            1.0 / diag,
            tol,
            max_iter,
        )
        if not converged:
            raise SolverError(
                f"conjugate gradients did not reach tol={tol} in {max_iter} iterations"
            )
    else:
        raise ValueError(f"unknown solve method {method!r}")

    u_full[ws.free_dofs] = u_free
    compliance = float(system.load @ u_free)
    energies = _kernels.element_energies(u_full, ws.edofs, ws.ke)
    return FeaSolution(u_full, compliance, energies)


def analyze(
    density: DensityField,
    spec: ProblemSpec,
    tol: float = 1e-8,
    x0: np.ndarray | None = None,
    method: str = "auto",
) -> FeaSolution:
    """Assemble-and-solve convenience wrapper."""
    return solve(assemble(density, spec), tol=tol, x0=x0, method=method)


def compliance_sensitivities(
    density: DensityField, spec: ProblemSpec, sol: FeaSolution
) -> np.ndarray:
    """dc/drho_e = -p rho^(p-1) (e0 - emin) u_e^T k0 u_e; always <= 0."""
    m = spec.material
    rho = density.values
    return -m.penal * rho ** (m.penal - 1.0) * (m.e0 - m.emin) * sol.element_energy
