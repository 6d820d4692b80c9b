"""P1 assembly of the quadratic forms and Dirichlet elimination.

Coefficients and potentials are sampled once per triangle at the barycenter,
so pointwise ordering of fields carries over exactly to PSD ordering of the
assembled matrices. Constrained vertices are removed rather than penalised,
which makes the Dirichlet space an exact subspace of the Robin/Neumann space.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .fields import CoefficientField, Potential, check_bounded, identity
from .geometry import BoundarySpec, Mesh, MeshError, Tag

_MASS_REF = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]])
_EDGE_REF = np.array([[2.0, 1.0], [1.0, 2.0]])


def _accumulate(rows, cols, vals, n) -> sp.csr_matrix:
    """Sum duplicate entries in input order (triangle-major) and return CSR.

    Contributions to ``(i, j)`` and ``(j, i)`` arrive in the same order, so
    symmetric local matrices give bit-exactly symmetric output.
    """
    rows, cols, vals = rows.ravel(), cols.ravel(), vals.ravel()
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    if len(rows) == 0:
        return sp.csr_matrix((n, n))
    key = rows * n + cols
    start = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
    summed = np.add.reduceat(vals, start)
    r, c = rows[start], cols[start]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, r + 1, 1)
    return sp.csr_matrix((summed, c, np.cumsum(indptr)), shape=(n, n))


def _element_geometry(mesh: Mesh):
    p = mesh.vertices[mesh.triangles]
    area = mesh.signed_areas()
    e0 = p[:, 2] - p[:, 1]
    e1 = p[:, 0] - p[:, 2]
    e2 = p[:, 1] - p[:, 0]
    rot = np.stack([np.stack([-e[:, 1], e[:, 0]], axis=1) for e in (e0, e1, e2)], axis=1)
    # counter-clockwise order: grad(lambda_i) = perp(edge opposite i) / (2 area)
    return area, rot / (2.0 * area)[:, None, None]


def _scatter(mesh: Mesh, local: np.ndarray) -> sp.csr_matrix:
    t = mesh.triangles
    rows = np.repeat(t[:, :, None], 3, axis=2)
    cols = np.repeat(t[:, None, :], 3, axis=1)
    return _accumulate(rows, cols, local, mesh.n_vertices)


def local_mass(area: np.ndarray) -> np.ndarray:
    return (area / 12.0)[:, None, None] * _MASS_REF


def assemble_mass(mesh: Mesh) -> sp.csr_matrix:
    """Consistent P1 mass matrix on all vertices."""
    return _scatter(mesh, local_mass(mesh.signed_areas()))


def assemble_stiffness(mesh: Mesh, coeff: CoefficientField | None = None) -> sp.csr_matrix:
    """``int a grad(u) . grad(v)`` with ``a`` sampled at the barycenter."""
    coeff = coeff or identity()
    area, g = _element_geometry(mesh)
    a = coeff.matrices(mesh.barycenters())
    local = area[:, None, None] * np.einsum("tik,tkl,tjl->tij", g, a, g)
    local = 0.5 * (local + local.transpose(0, 2, 1))
    return _scatter(mesh, local)


def assemble_potential(mesh: Mesh, V: Potential) -> sp.csr_matrix:
    """``int V u v`` with ``V`` piecewise constant (barycenter value) per triangle."""
    vals = V.values(mesh.barycenters())
    check_bounded(V, mesh.barycenters())
    return _scatter(mesh, vals[:, None, None] * local_mass(mesh.signed_areas()))


def assemble_robin_boundary(mesh: Mesh, bc: BoundarySpec | None = None,
                            alpha: float | None = None, tags=(Tag.OMEGA,)) -> sp.csr_matrix:
    """``alpha * int_omega u v`` from 1D P1 edge mass matrices on omega edges."""
    if alpha is None:
        alpha = bc.alpha if bc is not None else 1.0
    e = mesh.edges_tagged(*tags)
    d = mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]]
    length = np.hypot(d[:, 0], d[:, 1])
    local = (alpha * length / 6.0)[:, None, None] * _EDGE_REF
    rows = np.repeat(e[:, :, None], 2, axis=2)
    cols = np.repeat(e[:, None, :], 2, axis=1)
    return _accumulate(rows, cols, local, mesh.n_vertices)


# ---------------------------------------------------------------------------
# constraints


@dataclass(frozen=True, eq=False)
class DofMap:
    n_vertices: int
    free: np.ndarray          # ascending vertex indices
    constrained: np.ndarray

    def expand(self, u: np.ndarray) -> np.ndarray:
        """Zero-extend free-DOF vectors (1D or column stacks) to all vertices."""
        u = np.asarray(u)
        out = np.zeros((self.n_vertices,) + u.shape[1:], dtype=u.dtype)
        out[self.free] = u
        return out


@dataclass(frozen=True, eq=False)
class AssembledSystem:
    A: sp.csr_matrix
    M: sp.csr_matrix
    dof: DofMap
    form: str                 # "dirichlet", "robin_mixed", "neumann", "elliptic"
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.A.shape[0]


def dof_map(mesh: Mesh, mode: str) -> DofMap:
    n = mesh.n_vertices
    if mode == "dirichlet":
        con = mesh.vertices_tagged(Tag.OMEGA, Tag.OMEGA_PRIME, Tag.TRUNC)
    elif mode == "robin_mixed":
        # closure of omega' is constrained: vertices touching any omega' edge
        con = np.union1d(mesh.vertices_tagged(Tag.OMEGA_PRIME), mesh.vertices_tagged(Tag.TRUNC))
    else:
        raise ValueError(f"unknown constraint mode {mode!r}")
    free = np.setdiff1d(np.arange(n), con)
    return DofMap(n, free, np.asarray(con, dtype=np.int64))


def _restrict(K: sp.spmatrix, free: np.ndarray) -> sp.csr_matrix:
    return sp.csr_matrix(K)[free][:, free].tocsr()


def apply_constraints(K, M, B, mesh: Mesh, bc: BoundarySpec | None, mode: str,
                      KV=None, form: str | None = None) -> AssembledSystem:
    """Eliminate constrained vertices and form ``A = K + KV + B`` on the free set.

    ``mode`` is ``"dirichlet"`` (whole obstacle and outer circle constrained) or
    ``"robin_mixed"`` (closure of omega' and outer circle constrained).
    """
    if mode == "robin_mixed" and not np.any(mesh.edge_tags == Tag.OMEGA):
        raise MeshError("robin_mixed system requested but omega is empty")
    dof = dof_map(mesh, mode)
    if mode == "robin_mixed" and not np.any(np.isin(mesh.vertices_tagged(Tag.OMEGA), dof.free)):
        # every omega vertex touches omega': the discrete space equals the Dirichlet one
        raise MeshError("omega has no free vertex on this mesh; widen omega or refine")
    A = sp.csr_matrix(K)
    if KV is not None:
        A = A + KV
    if B is not None and mode == "robin_mixed":
        A = A + B
    meta = {"alpha": bc.alpha if bc is not None else None}
    return AssembledSystem(_restrict(A, dof.free), _restrict(M, dof.free), dof,
                           form or mode, meta)


def dirichlet_system(mesh: Mesh, V: Potential, coeff: CoefficientField | None = None) -> AssembledSystem:
    return apply_constraints(assemble_stiffness(mesh, coeff), assemble_mass(mesh), None, mesh,
                             None, "dirichlet", KV=assemble_potential(mesh, V))


def mixed_system(mesh: Mesh, V: Potential, bc: BoundarySpec,
                 coeff: CoefficientField | None = None) -> AssembledSystem:
    """Robin condition on omega edges of ``mesh`` (already tagged), Dirichlet on omega'."""
    return apply_constraints(assemble_stiffness(mesh, coeff), assemble_mass(mesh),
                             assemble_robin_boundary(mesh, bc), mesh, bc, "robin_mixed",
                             KV=assemble_potential(mesh, V))


def neumann_system(mesh: Mesh, V: Potential, coeff: CoefficientField | None = None) -> AssembledSystem:
    """Natural condition on the whole obstacle; only the outer circle is constrained."""
    n = mesh.n_vertices
    con = mesh.vertices_tagged(Tag.TRUNC)
    dof = DofMap(n, np.setdiff1d(np.arange(n), con), con)
    A = assemble_stiffness(mesh, coeff) + assemble_potential(mesh, V)
    return AssembledSystem(_restrict(A, dof.free), _restrict(assemble_mass(mesh), dof.free),
                           dof, "neumann", {"alpha": 0.0})


def write_coo(matrix: sp.spmatrix, path) -> None:
    """One ``row col value`` line per stored entry, 17 significant digits."""
    m = sp.coo_matrix(matrix)
    order = np.lexsort((m.col, m.row))
    with open(path, "w") as fh:
        fh.write(f"# {m.shape[0]} {m.shape[1]} {m.nnz}\n")
        for i in order:
            fh.write(f"{m.row[i]} {m.col[i]} {m.data[i]:.17g}\n")
