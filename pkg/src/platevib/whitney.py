"""Whitney edge and face vector fields with exact integration of their products.

The face field of an oriented face [p0,p1,p2] is
``2 (x_p0 grad x_p1 x grad x_p2 + cyclic)`` and the edge field of [p0,p1] is
``x_p0 grad x_p1 - x_p1 grad x_p0``, both supported on the closed star of
their simplex.  Face fields have unit flux through their own face and zero
through every other; edge fields have unit line integral along their own
edge.  All mass and stiffness pairings are polynomial per tetrahedron and
integrated exactly through barycentric monomials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import roots_jacobi

from .mesh import MeshError, SimplicialComplex3, _TET_EDGES, _TET_FACES

_CYCLIC = np.array([[1, 2], [2, 0], [0, 1]])


class OutsidePolytopeError(ValueError):
    """Evaluation point lies outside the body."""


@dataclass
class FaceField:
    """Coefficient vector over the faces of a complex, c -> sum_f c_f W_f."""

    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs)


class WhitneyBasis:
    """Per-tetrahedron geometry backing the face and edge fields of a complex.

    Stores constant barycentric gradients, volumes and the cross-product
    vectors that realize each face field on its supporting tetrahedra.
    """

    def __init__(self, cx: SimplicialComplex3):
        self.complex = cx
        corners = cx.vertices[cx.tets]                    # (nt, 4, 3)
        rel = corners[:, 1:] - corners[:, :1]             # rows v_i - v_0
        inv = np.linalg.inv(rel)                          # columns are grads of l1..l3
        g = np.transpose(inv, (0, 2, 1))                  # (nt, 3, 3): grad l_i rows
        self.gradients = np.concatenate([-g.sum(axis=1, keepdims=True), g], axis=1)  # (nt,4,3)
        self.volumes = np.abs(np.linalg.det(rel)) / 6.0
        self.centroids = corners.mean(axis=1)

        # face j of tet t has vertices _TET_FACES[j] (increasing); cross term k
        # pairs the other two gradients cyclically.
        gz = self.gradients[:, _TET_FACES]                # (nt, 4, 3, 3)
        self.crosses = np.cross(gz[:, :, _CYCLIC[:, 0]], gz[:, :, _CYCLIC[:, 1]])  # (nt,4,3,3)
        # constant gradient of W_f on tet t: G[i, a] = d_i W^a = 2 sum_k g_k[i] C_k[a]
        self.face_gradients = 2.0 * np.einsum("tjki,tjka->tjia", gz, self.crosses)

        self._edge_tets = None

    # -- geometry helpers ----------------------------------------------------

    def barycentric(self, t: int, x: np.ndarray) -> np.ndarray:
        """Barycentric coordinates of ``x`` in tet ``t`` (exact for affine maps)."""
        return 0.25 + self.gradients[t] @ (np.asarray(x, dtype=float) - self.centroids[t])

    def tets_containing(self, x: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        lam = 0.25 + np.einsum("tki,ti->tk", self.gradients,
                               np.asarray(x, dtype=float)[None, :] - self.centroids)
        return np.flatnonzero(lam.min(axis=1) >= -tol)

    def _require_inside(self, x) -> None:
        if len(self.tets_containing(x)) == 0:
            raise OutsidePolytopeError(f"point {np.asarray(x)} lies outside the body")

    def edge_tets(self, e: int) -> np.ndarray:
        if self._edge_tets is None:
            cx = self.complex
            order = np.argsort(cx.tet_edges.ravel(), kind="stable")
            self._edge_starts = np.searchsorted(cx.tet_edges.ravel()[order], np.arange(cx.num_edges + 1))
            self._edge_tet_list = order // 6
            self._edge_local = order % 6
        s, t = self._edge_starts[e], self._edge_starts[e + 1]
        return self._edge_tet_list[s:t], self._edge_local[s:t]

    # -- pointwise evaluation --------------------------------------------------

    def face_field_on_tet(self, f: int, t: int, x: np.ndarray) -> np.ndarray:
        """Value of the face field of ``f`` inside supporting tet ``t``."""
        slot = np.flatnonzero(self.complex.face_tets[f] == t)
        if len(slot) == 0:
            raise MeshError(f"tet {t} does not support face {f}")
        j = self.complex.face_tet_opp[f, slot[0]]
        lam = self.barycentric(t, x)
        return 2.0 * lam[_TET_FACES[j]] @ self.crosses[t, j]

    def edge_field_on_tet(self, e: int, t: int, x: np.ndarray) -> np.ndarray:
        """Value of the edge field of ``e`` evaluated from tet ``t`` (zero off its star)."""
        p0, p1 = self.complex.edges[e]
        loc = self.complex.tets[t]
        i0 = np.flatnonzero(loc == p0)
        i1 = np.flatnonzero(loc == p1)
        if len(i0) == 0 or len(i1) == 0:
            return np.zeros(3)
        lam = self.barycentric(t, x)
        g = self.gradients[t]
        return lam[i0[0]] * g[i1[0]] - lam[i1[0]] * g[i0[0]]


def eval_face_field(basis: WhitneyBasis, f: int, x: np.ndarray) -> np.ndarray:
    """Face field of ``f`` at a point of the body; zero outside the closed star.

    Units 1/m^2.  On star boundaries the value is taken from the supporting
    tet of lowest id (only the normal component is continuous there).
    """
    basis._require_inside(x)
    for t in basis.complex.face_tets[f]:
        if t < 0:
            continue
        if basis.barycentric(int(t), x).min() >= -1e-12:
            return basis.face_field_on_tet(f, int(t), x)
    return np.zeros(3)


def eval_edge_field(basis: WhitneyBasis, e: int, x: np.ndarray) -> np.ndarray:
    """Edge field of ``e`` at a point of the body; zero outside the closed star.  Units 1/m."""
    basis._require_inside(x)
    tets, _ = basis.edge_tets(e)
    for t in tets:
        if basis.barycentric(int(t), x).min() >= -1e-12:
            return basis.edge_field_on_tet(e, int(t), x)
    return np.zeros(3)


def curl_edge_field(basis: WhitneyBasis, e: int) -> FaceField:
    """Curl of an edge field as an exact integer face-coefficient vector.

    The curl is piecewise constant and expands over the face fields with the
    edge-face incidence numbers as coefficients.
    """
    if not 0 <= e < basis.complex.num_edges:
        raise MeshError(f"unknown edge id {e}")
    row = np.zeros(basis.complex.num_faces, dtype=np.int64)
    seg = basis.complex.b_ef.getrow(e).tocoo()
    row[seg.col] = seg.data
    return FaceField(row)


def divergence_flux_sums(basis: WhitneyBasis, field: FaceField) -> np.ndarray:
    """Per-tet weighted incidence sums; exact integers for integer coefficients."""
    return basis.complex.b_ft.T @ field.coeffs


def divergence(basis: WhitneyBasis, field: FaceField) -> np.ndarray:
    """Piecewise constant divergence per tetrahedron of ``sum_f c_f W_f``.

    Vanishes exactly when every tet's weighted four-face incidence sum is zero.
    """
    if len(field.coeffs) != basis.complex.num_faces:
        raise MeshError("coefficient length does not match the number of faces")
    return divergence_flux_sums(basis, field) / basis.volumes


def integrate_monomial(basis: WhitneyBasis, t: int, exponents) -> float:
    """Exact integral over tet ``t`` of a barycentric monomial l0^a l1^b l2^c l3^d."""
    a, b, c, d = (int(k) for k in exponents)
    if min(a, b, c, d) < 0:
        raise MeshError("exponents must be non-negative")
    num = math.factorial(a) * math.factorial(b) * math.factorial(c) * math.factorial(d)
    return 6.0 * basis.volumes[t] * num / math.factorial(a + b + c + d + 3)


# l_i l_j integrates to vol*(1+delta_ij)/20; fixed weight table over the
# (local face, cross term) pairs used by the mass pairing.
_MASS_W = (1.0 + (_TET_FACES[:, None, :, None] == _TET_FACES[None, :, None, :]).astype(float)) / 20.0
_MASS_W = np.transpose(_MASS_W, (0, 2, 1, 3))  # index (p, k, q, l)


def pair_mass(basis: WhitneyBasis, f: int, g: int) -> float:
    """Exact L2 inner product of two face fields; zero for disjoint stars."""
    cx = basis.complex
    total = 0.0
    for slot_f, t in enumerate(cx.face_tets[f]):
        if t < 0:
            continue
        slot_g = np.flatnonzero(cx.face_tets[g] == t)
        if len(slot_g) == 0:
            continue
        p = cx.face_tet_opp[f, slot_f]
        q = cx.face_tet_opp[g, slot_g[0]]
        dots = np.einsum("kx,lx->kl", basis.crosses[t, p], basis.crosses[t, q])
        total += 4.0 * basis.volumes[t] * np.sum(dots * _MASS_W[p, :, q, :])
    return float(total)


def pair_stiffness(basis: WhitneyBasis, f: int, g: int, tensor) -> float:
    """Stiffness entry -<d_i W_f^a, A^{ab}_{ij} d_j W_g^b>; exact, symmetric in (f, g)."""
    cx = basis.complex
    a4 = tensor.a_tensor
    total = 0.0
    for slot_f, t in enumerate(cx.face_tets[f]):
        if t < 0:
            continue
        slot_g = np.flatnonzero(cx.face_tets[g] == t)
        if len(slot_g) == 0:
            continue
        p = cx.face_tet_opp[f, slot_f]
        q = cx.face_tet_opp[g, slot_g[0]]
        total -= basis.volumes[t] * np.einsum(
            "ia,iajb,jb->", basis.face_gradients[t, p], a4, basis.face_gradients[t, q])
    return float(total)


# -- integrals for tests and diagnostics -------------------------------------

def flux_through_face(basis: WhitneyBasis, f: int, through: int) -> float:
    """Flux of the face field of ``f`` through face ``through`` (its oriented normal).

    The normal component is single-valued on interior faces; both one-sided
    evaluations are formed and must agree.
    """
    cx = basis.complex
    verts = cx.vertices[cx.faces[through]]
    n = np.cross(verts[1] - verts[0], verts[2] - verts[0])
    area = 0.5 * np.linalg.norm(n)
    n = n / np.linalg.norm(n)
    centroid = verts.mean(axis=0)
    vals = []
    for t in cx.face_tets[through]:
        if t < 0:
            continue
        if t in cx.face_tets[f]:
            w = basis.face_field_on_tet(f, int(t), centroid)
        else:
            w = np.zeros(3)
        vals.append(float(w @ n) * area)
    if len(vals) == 2 and abs(vals[0] - vals[1]) > 1e-9 * (1.0 + abs(vals[0])):
        raise MeshError(f"normal component of face field {f} jumps across face {through}")
    return vals[0]


def line_integral_over_edge(basis: WhitneyBasis, e: int, along: int) -> float:
    """Line integral of the edge field of ``e`` along oriented edge ``along``.

    The tangential component is continuous, and affine along the edge, so the
    midpoint rule from any containing tet is exact.
    """
    cx = basis.complex
    p0, p1 = cx.edges[along]
    a, b = cx.vertices[p0], cx.vertices[p1]
    mid = 0.5 * (a + b)
    tets, _ = basis.edge_tets(along)
    w = basis.edge_field_on_tet(e, int(tets[0]), mid)
    return float(w @ (b - a))


def tet_quadrature(n: int = 3) -> tuple[np.ndarray, np.ndarray]:
    """Conical-product quadrature on the reference tet, exact to degree 2n-1.

    Returns barycentric nodes (m, 4) and weights summing to one; integrals
    are ``vol * sum_q w_q f(x_q)``.
    """
    x1, w1 = roots_jacobi(n, 2.0, 0.0)
    x2, w2 = roots_jacobi(n, 1.0, 0.0)
    x3, w3 = roots_jacobi(n, 0.0, 0.0)
    x1, x2, x3 = (x1 + 1) / 2, (x2 + 1) / 2, (x3 + 1) / 2
    w1, w2, w3 = w1 / 8, w2 / 4, w3 / 2
    u, v, w = np.meshgrid(x1, x2, x3, indexing="ij")
    wu, wv, ww = np.meshgrid(w1, w2, w3, indexing="ij")
    a = u.ravel()
    b = (v * (1 - u)).ravel()
    c = (w * (1 - v) * (1 - u)).ravel()
    weights = 6.0 * (wu * wv * ww).ravel()  # raw weights sum to the reference volume 1/6
    bary = np.stack([1 - a - b - c, a, b, c], axis=1)
    return bary, weights


def dump_gradients_csv(basis: WhitneyBasis, path) -> None:
    """Debug dump of per-tet barycentric gradients and volumes."""
    with open(path, "w") as fh:
        fh.write("tet,local_vertex,gx,gy,gz,volume\n")
        for t in range(basis.complex.num_tets):
            for k in range(4):
                g = basis.gradients[t, k]
                fh.write(f"{t},{k},{g[0]!r},{g[1]!r},{g[2]!r},{basis.volumes[t]!r}\n")


def gradient_span_field(basis: WhitneyBasis, p: int, x: np.ndarray) -> np.ndarray:
    """Sum of incidence-weighted edge fields of vertex ``p`` at ``x`` (= grad x_p)."""
    row = basis.complex.b_pe.getrow(p).tocoo()
    val = np.zeros(3)
    tets = basis.tets_containing(x)
    if len(tets) == 0:
        raise OutsidePolytopeError(f"point {np.asarray(x)} lies outside the body")
    t = int(tets[0])
    for e, s in zip(row.col, row.data):
        val += s * basis.edge_field_on_tet(int(e), t, x)
    return val
