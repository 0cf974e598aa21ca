"""Sparse assembly of the face-field mass and stiffness systems.

The full system couples all face coefficients, ordered interior faces first
and boundary faces last.  The boundary-boundary blocks are diagonal because
a subdivision tetrahedron carries at most one boundary face.  Traction
boundary conditions enter twice: a surface term added to the stiffness
diagonal on boundary faces, and a per-coarse-face 2x6 homogeneous system over
the six sub-face coefficients whose row reduction yields the constraint map
of the reduced (traction-constrained) basis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.io import mmwrite

from .mesh import MeshError, SimplicialComplex3, boundary_frames, classify, _TET_FACES
from .whitney import WhitneyBasis, tet_quadrature


class AssemblyError(RuntimeError):
    """Structural property of the assembled system failed to hold."""


@dataclass
class SparseSymMatrix:
    """Compressed sparse symmetric matrix with its symmetry certificate."""

    mat: sp.csr_matrix
    symmetric: bool = True

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @property
    def nnz(self) -> int:
        return self.mat.nnz

    def symmetry_residual(self) -> float:
        d = abs(self.mat - self.mat.T)
        scale = abs(self.mat).max()
        return float(d.max() / scale) if scale > 0 else 0.0

    def toarray(self) -> np.ndarray:
        return self.mat.toarray()


@dataclass
class SystemIndex:
    """Block ordering of the full system: interior faces, then boundary faces."""

    interior: np.ndarray   # face ids, ascending
    boundary: np.ndarray   # face ids, ascending

    @property
    def num_interior(self) -> int:
        return len(self.interior)

    @property
    def num_boundary(self) -> int:
        return len(self.boundary)

    @property
    def dim(self) -> int:
        return len(self.interior) + len(self.boundary)

    def face_positions(self, num_faces: int) -> np.ndarray:
        pos = np.empty(num_faces, dtype=np.int64)
        pos[self.interior] = np.arange(len(self.interior))
        pos[self.boundary] = len(self.interior) + np.arange(len(self.boundary))
        return pos

    def face_order(self) -> np.ndarray:
        """Face id at each block position."""
        return np.concatenate([self.interior, self.boundary])


def system_index(sub: SimplicialComplex3) -> SystemIndex:
    interior, boundary, _, _ = classify(sub)
    return SystemIndex(interior=interior, boundary=boundary)


@dataclass
class ConstraintMap:
    """Constraint matrix of the traction conditions and the induced partition.

    Boundary faces split into dependent (``boundary_interior``) and free
    (``boundary_free``) sets with dependent coefficients ``C @ free``.
    ``ranks`` records the numerical rank of each coarse-face subsystem and
    ``null_rows`` the total count of vanished rows.
    """

    c: sp.csr_matrix                 # |dependent| x |free|
    boundary_interior: np.ndarray    # face ids, ascending
    boundary_free: np.ndarray        # face ids, ascending
    ranks: np.ndarray
    null_rows: int

    @property
    def num_subsystems(self) -> int:
        return len(self.ranks)

    def rank_census(self) -> dict[int, int]:
        return {int(r): int(n) for r, n in zip(*np.unique(self.ranks, return_counts=True))}

    def dim_reduced(self, num_faces: int, num_interior: int) -> int:
        return num_interior + len(self.boundary_free)

    def expand_boundary(self, free_coeffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Dependent coefficients from free ones."""
        return self.c @ free_coeffs, free_coeffs


# -- volume assembly -----------------------------------------------------------

# l_i l_j integrates to vol*(1+delta_ij)/20 over a tet: fixed weights on the
# (local face, cross term) x (local face, cross term) grid.
_MASS_W = (1.0 + (_TET_FACES[:, None, :, None] == _TET_FACES[None, :, None, :]).astype(float)) / 20.0
_MASS_W = np.transpose(_MASS_W, (0, 2, 1, 3))  # (p, k, q, l)


def assemble_mass(sub: SimplicialComplex3, basis: WhitneyBasis, rho: float = 1.0,
                  index: SystemIndex | None = None) -> SparseSymMatrix:
    """Mass matrix rho * <W_f, W_g> in interior/boundary block order.

    The boundary-boundary block must come out diagonal; a structural
    violation raises.
    """
    index = index or system_index(sub)
    pos = index.face_positions(sub.num_faces)
    dots = np.einsum("tpkx,tqlx->tpkql", basis.crosses, basis.crosses)
    loc = 4.0 * rho * basis.volumes[:, None, None] * np.einsum("tpkql,pkql->tpq", dots, _MASS_W)
    rows = pos[sub.tet_faces[:, :, None]]
    cols = pos[sub.tet_faces[:, None, :]]
    mat = sp.coo_matrix((loc.ravel(), (np.broadcast_to(rows, loc.shape).ravel(),
                                       np.broadcast_to(cols, loc.shape).ravel())),
                        shape=(index.dim, index.dim)).tocsr()
    _check_boundary_diagonal(mat, index, "mass")
    return SparseSymMatrix(mat)


def assemble_stiffness(sub: SimplicialComplex3, basis: WhitneyBasis, tensor,
                       index: SystemIndex | None = None) -> SparseSymMatrix:
    """Stiffness matrix -<d_i W_f^a, A^{ab}_{ij} d_j W_g^b> plus the boundary surface term.

    The surface term folds the normal-traction pressure contribution into the
    diagonal of the boundary-boundary block: for each boundary face, with
    outward unit normal N, gradient G and trace value W on the face,
    ``area * (<sigma(G)N, W> - (<sigma(G)N, N> + <W'(1)N, N><dW/dN, N>) <W, N>)``.
    """
    index = index or system_index(sub)
    pos = index.face_positions(sub.num_faces)
    a4 = tensor.a_tensor
    loc = -basis.volumes[:, None, None] * np.einsum(
        "tpia,iajb,tqjb->tpq", basis.face_gradients, a4, basis.face_gradients)
    rows = pos[sub.tet_faces[:, :, None]]
    cols = pos[sub.tet_faces[:, None, :]]
    mat = sp.coo_matrix((loc.ravel(), (np.broadcast_to(rows, loc.shape).ravel(),
                                       np.broadcast_to(cols, loc.shape).ravel())),
                        shape=(index.dim, index.dim)).tocsr()

    bids = sub.boundary_face_ids()
    if len(bids):
        t = sub.face_tets[bids, 0]
        j = sub.face_tet_opp[bids, 0]
        normals = sub.face_normals()[bids] * sub.outward_face_signs()[bids, None]
        areas = sub.face_areas()[bids]
        grads = basis.face_gradients[t, j]                  # (nb, 3, 3): G[i, a]
        trace = (2.0 / 3.0) * basis.crosses[t, j].sum(axis=1)  # value at sub-face centroid
        sigma_n = np.einsum("aijb,njb,ni->na", a4, grads, normals)
        w1n = np.einsum("aijj,ni->na", a4, normals)
        dn_n = np.einsum("ni,nia,na->n", normals, grads, normals)
        pressure = np.einsum("na,na->n", sigma_n, normals) + np.einsum("na,na->n", w1n, normals) * dn_n
        bterm = areas * (np.einsum("na,na->n", sigma_n, trace)
                         - pressure * np.einsum("na,na->n", trace, normals))
        p = pos[bids]
        mat = (mat + sp.coo_matrix((bterm, (p, p)), shape=mat.shape)).tocsr()
    _check_boundary_diagonal(mat, index, "stiffness")
    return SparseSymMatrix(mat)


def _check_boundary_diagonal(mat: sp.csr_matrix, index: SystemIndex, label: str) -> None:
    n0 = index.num_interior
    block = mat[n0:, n0:]
    off = block - sp.diags(block.diagonal())
    if off.nnz:
        worst = abs(off).max()
        scale = abs(mat).max()
        if worst > 1e-12 * scale:
            raise AssemblyError(
                f"{label} boundary-boundary block is not diagonal "
                f"(worst off-diagonal {worst:.3e} at scale {scale:.3e})")


# -- boundary constraints --------------------------------------------------------


def _constraint_block(sub: SimplicialComplex3, basis: WhitneyBasis, a4, frame,
                      areas: np.ndarray, clip: float = 1e-12) -> np.ndarray:
    """The raw 2x6 traction system of one coarse boundary face.

    Coefficient of sub-face j in the row of tangent T:
    ``area_j * (<d_T W_j, W'(1)N> + <T, sigma(grad W_j) N>)``.  Entries below
    the roundoff floor of the two contracted terms are clipped to exact
    zero: the pairings cancel identically whenever W'(1)N is parallel to N
    (axis-aligned faces of an orthotropic body), and the rank decision must
    see the analytic zero rather than cancellation noise.
    """
    w1n = np.einsum("aijj,i->a", a4, frame.normal)
    block = np.zeros((2, 6))
    floor = np.zeros((2, 6))
    for jcol, fb in enumerate(frame.subfaces):
        t = sub.face_tets[fb, 0]
        j = sub.face_tet_opp[fb, 0]
        grad = basis.face_gradients[t, j]
        sig_n = np.einsum("aijb,jb,i->a", a4, grad, frame.normal)
        for r, tvec in enumerate((frame.t1, frame.t2)):
            ta = (tvec @ grad) @ w1n
            tb = tvec @ sig_n
            block[r, jcol] = areas[fb] * (ta + tb)
            floor[r, jcol] = areas[fb] * (np.linalg.norm(tvec @ grad) * np.linalg.norm(w1n)
                                          + np.linalg.norm(sig_n))
    block[np.abs(block) <= clip * floor] = 0.0
    return block


def assemble_boundary_constraints(cx: SimplicialComplex3, sub: SimplicialComplex3,
                                  basis: WhitneyBasis, tensor,
                                  rank_tol: float = 1e-9) -> ConstraintMap:
    """Row-reduced traction constraints over each coarse boundary face.

    For every coarse boundary face with outward frame (T1, T2, N), two
    homogeneous equations couple the six sub-face coefficients.  Pivot
    columns of the reduced echelon form become dependent faces, the rest
    stay free; ranks and null rows are recorded.  Subsystems may vanish
    identically (every axis-aligned face of an orthotropic body does), in
    which case they constrain nothing.
    """
    frames = boundary_frames(cx, sub)
    a4 = tensor.a_tensor
    areas = sub.face_areas()

    blocks = np.zeros((len(frames), 2, 6))
    for i, fr in enumerate(frames):
        blocks[i] = _constraint_block(sub, basis, a4, fr, areas)

    svals = np.linalg.svd(blocks, compute_uv=False)
    smax = svals[:, 0]
    ranks = (svals > rank_tol * np.maximum(smax, 1e-300)[:, None]).sum(axis=1)
    ranks[smax == 0] = 0

    # dependent coefficients c_piv = C c_free, read off the reduced echelon form
    # of the rank-truncated block; pivots scan the six columns in global face
    # order, so the partition is deterministic.
    per_frame = []
    dep_faces, free_faces = [], []
    for i, fr in enumerate(frames):
        r = int(ranks[i])
        if r == 0:
            free_faces.extend(int(f) for f in fr.subfaces)
            per_frame.append(None)
            continue
        u, s, vt = np.linalg.svd(blocks[i])
        m = (u[:, :r] * s[:r]) @ vt[:r]
        pivots, rref = _rref(m, r, rank_tol * s[0])
        free = [c for c in range(6) if c not in pivots]
        per_frame.append((pivots, free, rref))
        dep_faces.extend(int(fr.subfaces[c]) for c in pivots)
        free_faces.extend(int(fr.subfaces[c]) for c in free)

    dep_sorted = np.sort(np.asarray(dep_faces, dtype=np.int64))
    free_sorted = np.sort(np.asarray(free_faces, dtype=np.int64))
    dep_pos = {int(f): k for k, f in enumerate(dep_sorted)}
    free_pos = {int(f): k for k, f in enumerate(free_sorted)}

    rows, cols, vals = [], [], []
    for fr, info in zip(frames, per_frame):
        if info is None:
            continue
        pivots, free, rref = info
        for prow, pc in enumerate(pivots):
            gi = dep_pos[int(fr.subfaces[pc])]
            for fc in free:
                v = -rref[prow, fc]
                if v != 0.0:
                    rows.append(gi)
                    cols.append(free_pos[int(fr.subfaces[fc])])
                    vals.append(v)

    cmat = sp.csr_matrix((vals, (rows, cols)), shape=(len(dep_sorted), len(free_sorted)))
    null_rows = int(2 * len(frames) - ranks.sum())
    return ConstraintMap(c=cmat, boundary_interior=dep_sorted, boundary_free=free_sorted,
                         ranks=ranks.astype(np.int64), null_rows=null_rows)


def _rref(m: np.ndarray, rank: int, tol: float) -> tuple[list[int], np.ndarray]:
    """Reduced row echelon form with pivots scanned in column order."""
    r = m.copy()
    pivots: list[int] = []
    row = 0
    for col in range(r.shape[1]):
        piv = int(np.argmax(np.abs(r[row:, col]))) + row
        if abs(r[piv, col]) <= tol:
            continue
        r[[row, piv]] = r[[piv, row]]
        r[row] /= r[row, col]
        for other in range(r.shape[0]):
            if other != row:
                r[other] -= r[other, col] * r[row]
        pivots.append(col)
        row += 1
        if row == rank:
            break
    if len(pivots) != rank:
        raise AssemblyError("echelon reduction found fewer pivots than the numerical rank")
    return pivots, r


def constraint_residuals(cx: SimplicialComplex3, sub: SimplicialComplex3,
                         basis: WhitneyBasis, tensor, cmap: ConstraintMap,
                         coeffs: np.ndarray) -> np.ndarray:
    """Raw per-row residuals of the traction equations for a full coefficient vector.

    Residuals are normalized by the block scale times the coefficient scale,
    so admissible fields come out at solver precision; identically null rows
    contribute zero.
    """
    frames = boundary_frames(cx, sub)
    a4 = tensor.a_tensor
    areas = sub.face_areas()
    out = []
    for fr in frames:
        m = _constraint_block(sub, basis, a4, fr, areas)
        c_local = coeffs[fr.subfaces]
        scale = np.abs(m).max() * max(np.abs(c_local).max(), 1e-300) + 1e-300
        out.append(np.abs(m @ c_local) / scale)
    return np.concatenate(out)


# -- reduction -------------------------------------------------------------------


def reduce_system(mass: SparseSymMatrix, stiff: SparseSymMatrix, cmap: ConstraintMap,
                  index: SystemIndex) -> tuple[SparseSymMatrix, SparseSymMatrix]:
    """Blockwise reduction onto the traction-constrained basis.

    Performed as reduce-then-solve: the constrained basis is substituted into
    the weak form before any solve.  Reduced order: interior faces then free
    boundary faces.
    """
    def reduce_one(m: sp.csr_matrix) -> sp.csr_matrix:
        n0 = index.num_interior
        bpos = {int(f): n0 + k for k, f in enumerate(index.boundary)}
        pi = np.array([bpos[int(f)] for f in cmap.boundary_interior], dtype=np.int64)
        pb = np.array([bpos[int(f)] for f in cmap.boundary_free], dtype=np.int64)
        ii = m[:n0, :n0]
        i_di = m[:n0, :][:, pi]
        i_db = m[:n0, :][:, pb]
        di_i = m[pi, :][:, :n0]
        db_i = m[pb, :][:, :n0]
        di_di = m[pi, :][:, pi]
        db_db = m[pb, :][:, pb]
        c = cmap.c
        top_right = i_di @ c + i_db
        bottom_left = c.T @ di_i + db_i
        bottom_right = c.T @ di_di @ c + db_db
        return sp.bmat([[ii, top_right], [bottom_left, bottom_right]], format="csr")

    return SparseSymMatrix(reduce_one(mass.mat)), SparseSymMatrix(reduce_one(stiff.mat))


def reduced_face_order(index: SystemIndex, cmap: ConstraintMap) -> np.ndarray:
    """Face id at each reduced block position (interior faces then free boundary)."""
    return np.concatenate([index.interior, cmap.boundary_free])


def expand_reduced(coeffs: np.ndarray, index: SystemIndex, cmap: ConstraintMap,
                   num_faces: int) -> np.ndarray:
    """Full face-coefficient vector from reduced coordinates (dependent = C free)."""
    full = np.zeros(num_faces, dtype=float)
    n0 = index.num_interior
    full[index.interior] = coeffs[:n0]
    free = coeffs[n0:]
    full[cmap.boundary_free] = free
    if len(cmap.boundary_interior):
        full[cmap.boundary_interior] = cmap.c @ free
    return full


# -- forcing ---------------------------------------------------------------------


def assemble_forcing(sub: SimplicialComplex3, basis: WhitneyBasis, wave,
                     index: SystemIndex | None = None,
                     quad_order: int = 3, chunk: int = 8192) -> tuple[np.ndarray, np.ndarray]:
    """Projections of the split external wave onto the face fields.

    The pressure wave F0 sin(k.x -+ wt) splits into F0 sin(k.x) cos(wt) -+
    F0 cos(k.x) sin(wt); this returns the two spatial projections
    ``C1_f = <F0 sin(k.x), W_f>`` and ``C2_f = <F0 cos(k.x), W_f>`` in system
    block order, integrated by per-tet conical quadrature (degree 2n-1).
    """
    index = index or system_index(sub)
    pos = index.face_positions(sub.num_faces)
    bary, wq = tet_quadrature(quad_order)
    bary_faces = bary[:, _TET_FACES]                 # (q, 4, 3)
    f0 = np.asarray(wave.amplitude, dtype=float)
    kvec = wave.wavevector
    src = np.asarray(wave.source, dtype=float)

    c1 = np.zeros(index.dim)
    c2 = np.zeros(index.dim)
    nt = sub.num_tets
    for lo in range(0, nt, chunk):
        hi = min(lo + chunk, nt)
        corners = sub.vertices[sub.tets[lo:hi]]
        pts = np.einsum("qk,tkx->tqx", bary, corners)
        phase = (pts - src) @ kvec
        f0w = 2.0 * np.einsum("qjk,tjka,a->tjq", bary_faces, basis.crosses[lo:hi], f0)
        vw = basis.volumes[lo:hi, None] * wq[None, :]
        s = np.einsum("tq,tjq->tj", vw * np.sin(phase), f0w)
        c = np.einsum("tq,tjq->tj", vw * np.cos(phase), f0w)
        np.add.at(c1, pos[sub.tet_faces[lo:hi]].ravel(), s.ravel())
        np.add.at(c2, pos[sub.tet_faces[lo:hi]].ravel(), c.ravel())
    return c1, c2


def reduce_forcing(vec: np.ndarray, index: SystemIndex, cmap: ConstraintMap) -> np.ndarray:
    """Forcing vector in the reduced basis: free rows pick up C^T times dependent rows."""
    n0 = index.num_interior
    bpos = {int(f): k for k, f in enumerate(index.boundary)}
    vi = vec[[n0 + bpos[int(f)] for f in cmap.boundary_interior]]
    vb = vec[[n0 + bpos[int(f)] for f in cmap.boundary_free]]
    return np.concatenate([vec[:n0], cmap.c.T @ vi + vb])


# -- export ----------------------------------------------------------------------


def write_matrix_market(path, matrix) -> None:
    """Matrix Market coordinate export of a sparse matrix or wrapped system matrix."""
    mat = matrix.mat if isinstance(matrix, SparseSymMatrix) else matrix
    mmwrite(str(path), sp.coo_matrix(mat))


def write_vector_csv(path, vec: np.ndarray, header: str = "value") -> None:
    with open(path, "w") as fh:
        fh.write(f"index,{header}\n")
        for i, v in enumerate(np.asarray(vec).ravel()):
            fh.write(f"{i},{float(v)!r}\n")
