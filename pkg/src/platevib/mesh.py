"""Oriented tetrahedral complexes for block-built bodies.

Bodies are assembled from axis-aligned blocks, each cut into five tetrahedra
with a checkerboard parity so neighbouring blocks share identical face
diagonals.  The first barycentric subdivision refines every tetrahedron into
24, with new vertices ordered by decreasing dimension of the parent simplex.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class MeshError(ValueError):
    """Invalid body specification or degenerate geometry."""


# Local faces/edges of a tetrahedron stored with increasing vertex ids.
# Face j is the tet minus local vertex j; its incidence sign is (-1)^j.
_TET_FACES = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])
_TET_FACE_SIGNS = np.array([1, -1, 1, -1])
_TET_EDGES = np.array([[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]])
# Edge k of a face [q0,q1,q2] is the face minus vertex k, sign (-1)^k.
_FACE_EDGES = np.array([[1, 2], [0, 2], [0, 1]])
_FACE_EDGE_SIGNS = np.array([1, -1, 1])

# Five-tet cube split.  Corner codes are bit triples (x,y,z); the central
# tetrahedron takes the four corners of one parity, each remaining corner
# spans a tet with its three neighbours.
_EVEN_CORNERS = (0b000, 0b110, 0b101, 0b011)
_ODD_CORNERS = (0b100, 0b010, 0b001, 0b111)


def _five_tet_codes(parity: int) -> np.ndarray:
    central, corners = (_EVEN_CORNERS, _ODD_CORNERS) if parity == 0 else (_ODD_CORNERS, _EVEN_CORNERS)
    tets = [list(central)]
    for c in corners:
        tets.append([c, c ^ 0b100, c ^ 0b010, c ^ 0b001])
    return np.asarray(tets)


@dataclass
class SimplicialComplex3:
    """Oriented tetrahedral complex with derived faces, edges and incidences.

    Simplices are stored with strictly increasing vertex ids; ``tet_signs``
    records the ambient orientation of each stored 4-tuple (+1 when the
    increasing tuple has positive volume).  Faces and edges carry the
    orientation induced by increasing vertex order, and the incidence tables
    absorb every orientation mismatch, so that the composite incidences
    vanish and, for a boundary face f with supporting tet t, the outward
    normal is ``b_ft * (oriented 2-simplex normal of f)``.
    """

    vertices: np.ndarray          # (nv, 3) float, meters
    tets: np.ndarray              # (nt, 4) int, increasing
    tet_signs: np.ndarray         # (nt,) +-1
    faces: np.ndarray             # (nf, 3) int, lexicographic order
    edges: np.ndarray             # (ne, 2) int
    tet_faces: np.ndarray         # (nt, 4) face id opposite local vertex j
    tet_edges: np.ndarray         # (nt, 6) edge ids, _TET_EDGES order
    face_tets: np.ndarray         # (nf, 2) tet ids, -1 when absent
    face_tet_opp: np.ndarray      # (nf, 2) local index of the opposite vertex
    face_edges: np.ndarray        # (nf, 3) edge ids, _FACE_EDGES order
    b_pe: sp.csr_matrix           # vertex-edge incidence (nv x ne)
    b_ef: sp.csr_matrix           # edge-face incidence (ne x nf)
    b_ft: sp.csr_matrix           # face-tet incidence (nf x nt)
    boundary_faces: np.ndarray    # (nf,) bool: faces in exactly one tet
    boundary_edges: np.ndarray    # (ne,) bool: edges of boundary faces
    boundary_vertices: np.ndarray  # (nv,) bool: vertices of boundary faces
    # Set on barycentric subdivisions: parent simplex (dimension, id) per
    # vertex, and the coarse complex the subdivision came from.
    vertex_parent_dim: np.ndarray | None = None
    vertex_parent_id: np.ndarray | None = None
    parent: "SimplicialComplex3 | None" = field(default=None, repr=False)

    # -- construction ------------------------------------------------------

    @classmethod
    def from_tets(cls, vertices: np.ndarray, tets: np.ndarray) -> "SimplicialComplex3":
        vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        tets = np.sort(np.asarray(tets, dtype=np.int64), axis=1)
        nv, nt = len(vertices), len(tets)
        if nt == 0:
            raise MeshError("complex has no tetrahedra")
        if np.unique(tets, axis=0).shape[0] != nt:
            raise MeshError("duplicate tetrahedra")

        corners = vertices[tets]
        dets = np.linalg.det(corners[:, 1:] - corners[:, :1])
        if np.any(np.abs(dets) < 1e-300):
            raise MeshError("degenerate tetrahedron (zero volume)")
        tet_signs = np.where(dets > 0, 1, -1).astype(np.int64)

        # Faces: unique sorted triples, lexicographic global order.
        all_faces = tets[:, _TET_FACES].reshape(-1, 3)
        faces, tet_faces = np.unique(all_faces, axis=0, return_inverse=True)
        tet_faces = tet_faces.reshape(nt, 4)
        nf = len(faces)

        all_edges = tets[:, _TET_EDGES].reshape(-1, 2)
        edges, tet_edges = np.unique(all_edges, axis=0, return_inverse=True)
        tet_edges = tet_edges.reshape(nt, 6)
        ne = len(edges)

        # face -> supporting tets (1 or 2) with the local opposite vertex.
        counts = np.bincount(tet_faces.ravel(), minlength=nf)
        if counts.max() > 2:
            raise MeshError("face shared by more than two tetrahedra")
        face_tets = np.full((nf, 2), -1, dtype=np.int64)
        face_tet_opp = np.full((nf, 2), -1, dtype=np.int64)
        order = np.argsort(tet_faces.ravel(), kind="stable")
        fid = tet_faces.ravel()[order]
        tid = order // 4
        opp = order % 4
        slot = np.zeros(len(order), dtype=np.int64)
        first = np.ones(nf, dtype=bool)
        # positions within each face group (groups of size 1 or 2)
        starts = np.searchsorted(fid, np.arange(nf))
        slot = np.arange(len(order)) - starts[fid]
        face_tets[fid, slot] = tid
        face_tet_opp[fid, slot] = opp
        del first

        # edge lookup keys for face->edge ids
        edge_keys = edges[:, 0] * nv + edges[:, 1]
        fe = faces[:, _FACE_EDGES].reshape(-1, 2)
        fe_keys = fe[:, 0] * nv + fe[:, 1]
        face_edges = np.searchsorted(edge_keys, fe_keys).reshape(nf, 3)

        # incidence tables
        b_pe = sp.csr_matrix(
            (
                np.concatenate([-np.ones(ne, dtype=np.int64), np.ones(ne, dtype=np.int64)]),
                (np.concatenate([edges[:, 0], edges[:, 1]]), np.concatenate([np.arange(ne)] * 2)),
            ),
            shape=(nv, ne),
        )
        b_ef = sp.csr_matrix(
            (
                np.tile(_FACE_EDGE_SIGNS, nf).astype(np.int64),
                (face_edges.ravel(), np.repeat(np.arange(nf), 3)),
            ),
            shape=(ne, nf),
        )
        b_ft = sp.csr_matrix(
            (
                (tet_signs[:, None] * _TET_FACE_SIGNS[None, :]).ravel(),
                (tet_faces.ravel(), np.repeat(np.arange(nt), 4)),
            ),
            shape=(nf, nt),
        )

        boundary_faces = counts == 1
        boundary_edges = np.zeros(ne, dtype=bool)
        boundary_edges[face_edges[boundary_faces].ravel()] = True
        boundary_vertices = np.zeros(nv, dtype=bool)
        boundary_vertices[faces[boundary_faces].ravel()] = True

        return cls(
            vertices=vertices, tets=tets, tet_signs=tet_signs, faces=faces,
            edges=edges, tet_faces=tet_faces, tet_edges=tet_edges,
            face_tets=face_tets, face_tet_opp=face_tet_opp, face_edges=face_edges,
            b_pe=b_pe, b_ef=b_ef, b_ft=b_ft,
            boundary_faces=boundary_faces, boundary_edges=boundary_edges,
            boundary_vertices=boundary_vertices,
        )

    # -- basic queries -----------------------------------------------------

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_faces(self) -> int:
        return len(self.faces)

    @property
    def num_tets(self) -> int:
        return len(self.tets)

    @property
    def euler_characteristic(self) -> int:
        return self.num_vertices - self.num_edges + self.num_faces - self.num_tets

    def tet_volumes(self) -> np.ndarray:
        corners = self.vertices[self.tets]
        return np.abs(np.linalg.det(corners[:, 1:] - corners[:, :1])) / 6.0

    def face_areas(self) -> np.ndarray:
        c = self.vertices[self.faces]
        return 0.5 * np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1)

    def face_normals(self) -> np.ndarray:
        """Unit normals of the oriented 2-simplices (increasing vertex order)."""
        c = self.vertices[self.faces]
        n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        return n / np.linalg.norm(n, axis=1)[:, None]

    def boundary_face_ids(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_faces)

    def outward_face_signs(self) -> np.ndarray:
        """Per-face sign s with outward normal = s * oriented normal (boundary faces only).

        Read off the face-tet incidence of the unique supporting tet; zero
        for interior faces.
        """
        sign = np.zeros(self.num_faces, dtype=np.int64)
        bids = self.boundary_face_ids()
        t = self.face_tets[bids, 0]
        sign[bids] = np.asarray(self.b_ft[bids, t]).ravel()
        return sign

    def incidence(self, a: tuple[int, int], b: tuple[int, int]) -> int:
        """Incidence number of simplex ``a=(dim, id)`` in cosimplex ``b=(dim, id)``.

        Requires ``dim b = dim a + 1``; returns +-1 for incident pairs and 0
        otherwise.
        """
        (da, ia), (db, ib) = a, b
        if db != da + 1:
            raise MeshError(f"dimension mismatch: {da} -> {db}")
        table = {0: self.b_pe, 1: self.b_ef, 2: self.b_ft}[da]
        return int(table[ia, ib])

    def star_of_face(self, f: int) -> list[int]:
        """Tets whose closure contains face ``f`` (one for boundary, two inside)."""
        if not 0 <= f < self.num_faces:
            raise MeshError(f"unknown face id {f}")
        return [int(t) for t in self.face_tets[f] if t >= 0]

    def star_of_edge(self, e: int) -> list[int]:
        if not 0 <= e < self.num_edges:
            raise MeshError(f"unknown edge id {e}")
        return sorted(int(t) for t in np.flatnonzero(np.any(self.tet_edges == e, axis=1)))

    def star_of_vertex(self, p: int) -> list[int]:
        if not 0 <= p < self.num_vertices:
            raise MeshError(f"unknown vertex id {p}")
        return sorted(int(t) for t in np.flatnonzero(np.any(self.tets == p, axis=1)))

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        doc = {
            "vertices": [[float(x) for x in v] for v in self.vertices],
            "tets": [[int(i) for i in t] for t in self.tets],
            "boundary_faces": [int(i) for i in self.boundary_face_ids()],
        }
        return json.dumps(doc, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "SimplicialComplex3":
        doc = json.loads(text)
        cx = cls.from_tets(np.asarray(doc["vertices"], dtype=np.float64),
                           np.asarray(doc["tets"], dtype=np.int64))
        stored = np.asarray(doc["boundary_faces"], dtype=np.int64)
        if not np.array_equal(np.sort(stored), cx.boundary_face_ids()):
            raise MeshError("stored boundary faces disagree with derived complex")
        return cx


def build_slab(nx: int, ny: int, nz: int, dx: float, dy: float, dz: float) -> SimplicialComplex3:
    """Block slab of ``nx*ny*nz`` cells of size ``dx*dy*dz`` meters, five tets per cell.

    Splitting parity alternates checkerboard-fashion so adjacent cells share
    the same face diagonals; without this the result is not a triangulation.
    """
    if min(nx, ny, nz) < 1:
        raise MeshError("block counts must be at least 1")
    if min(dx, dy, dz) <= 0:
        raise MeshError("cell dimensions must be positive")
    # vertex (i,j,k) -> id in lexicographic (x, y, z) coordinate order
    ii, jj, kk = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), np.arange(nz + 1), indexing="ij")
    vertices = np.stack([ii.ravel() * dx, jj.ravel() * dy, kk.ravel() * dz], axis=1)

    def vid(i, j, k):
        return (i * (ny + 1) + j) * (nz + 1) + k

    bi, bj, bk = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    bi, bj, bk = bi.ravel(), bj.ravel(), bk.ravel()
    parity = (bi + bj + bk) % 2
    codes = np.stack([_five_tet_codes(0), _five_tet_codes(1)])  # (2, 5, 4)
    c = codes[parity]                                           # (nblocks, 5, 4)
    tets = vid(bi[:, None, None] + ((c >> 2) & 1),
               bj[:, None, None] + ((c >> 1) & 1),
               bk[:, None, None] + (c & 1)).reshape(-1, 4)
    return SimplicialComplex3.from_tets(vertices, tets)


def build_heightfield_plate(mask: np.ndarray, thickness_map: np.ndarray,
                            elevation_map: np.ndarray, cell: float) -> SimplicialComplex3:
    """Plate built from one block column per masked footprint cell.

    ``mask`` selects cells of an ``(nx, nz)`` footprint grid with spacing
    ``cell`` meters; each selected cell becomes one block whose bottom is
    ``elevation_map`` and whose height is ``thickness_map``.  Block corner
    heights are averaged over the masked cells meeting at each grid node, so
    neighbouring columns stay conforming; the five-tet split and parity rule
    match :func:`build_slab`.
    """
    mask = np.asarray(mask, dtype=bool)
    thickness_map = np.asarray(thickness_map, dtype=np.float64)
    elevation_map = np.asarray(elevation_map, dtype=np.float64)
    if mask.shape != thickness_map.shape or mask.shape != elevation_map.shape:
        raise MeshError("mask, thickness and elevation grids must share dimensions")
    if cell <= 0:
        raise MeshError("cell size must be positive")
    if not mask.any():
        raise MeshError("mask selects no cells")
    if np.any(thickness_map[mask] <= 0):
        raise MeshError("thickness must be positive on masked cells")
    if not _mask_connected(mask):
        raise MeshError("masked footprint is disconnected")

    nx, nz = mask.shape
    # node heights: average over adjacent masked cells
    wsum = np.zeros((nx + 1, nz + 1))
    bot = np.zeros((nx + 1, nz + 1))
    top = np.zeros((nx + 1, nz + 1))
    cells = np.argwhere(mask)
    for di in (0, 1):
        for dj in (0, 1):
            idx = (cells[:, 0] + di, cells[:, 1] + dj)
            np.add.at(wsum, idx, 1.0)
            np.add.at(bot, idx, elevation_map[mask])
            np.add.at(top, idx, elevation_map[mask] + thickness_map[mask])
    used = wsum > 0
    bot[used] /= wsum[used]
    top[used] /= wsum[used]

    node_id = -np.ones((nx + 1, nz + 1, 2), dtype=np.int64)  # last axis: 0 bottom, 1 top
    order = np.argwhere(used)
    nid = 0
    verts = []
    for i, j in order:
        for lv, h in ((0, bot[i, j]), (1, top[i, j])):
            node_id[i, j, lv] = nid
            verts.append((i * cell, h, j * cell))
            nid += 1
    vertices = np.asarray(verts)

    tets = []
    for i, j in cells:
        parity = (i + j) % 2
        for code_row in _five_tet_codes(parity):
            tets.append([node_id[i + ((c >> 2) & 1), j + (c & 1), (c >> 1) & 1] for c in code_row])
    return SimplicialComplex3.from_tets(vertices, np.asarray(tets))


def _mask_connected(mask: np.ndarray) -> bool:
    # 4-connectivity flood fill over masked cells
    cells = np.argwhere(mask)
    seen = np.zeros(mask.shape, dtype=bool)
    stack = [tuple(cells[0])]
    seen[tuple(cells[0])] = True
    while stack:
        i, j = stack.pop()
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            a, b = i + di, j + dj
            if 0 <= a < mask.shape[0] and 0 <= b < mask.shape[1] and mask[a, b] and not seen[a, b]:
                seen[a, b] = True
                stack.append((a, b))
    return bool(seen[mask].all())


def barycentric_subdivision(cx: SimplicialComplex3) -> SimplicialComplex3:
    """First barycentric subdivision.

    New vertices are the barycenters of all simplices, ordered by decreasing
    parent dimension (tets, faces, edges, vertices; ties by parent id); each
    tetrahedron yields the 24 tets of its flag chains.
    """
    nt, nf, ne, nv = cx.num_tets, cx.num_faces, cx.num_edges, cx.num_vertices
    tet_b = cx.vertices[cx.tets].mean(axis=1)
    face_b = cx.vertices[cx.faces].mean(axis=1)
    edge_b = cx.vertices[cx.edges].mean(axis=1)
    vertices = np.concatenate([tet_b, face_b, edge_b, cx.vertices])
    parent_dim = np.concatenate([np.full(nt, 3), np.full(nf, 2), np.full(ne, 1), np.full(nv, 0)])
    parent_id = np.concatenate([np.arange(nt), np.arange(nf), np.arange(ne), np.arange(nv)])

    # chains t > f > e > v: 4 faces per tet, 3 edges per face, 2 vertices per edge
    f_of_t = cx.tet_faces                              # (nt, 4)
    e_of_f = cx.face_edges[f_of_t]                     # (nt, 4, 3)
    v_of_e = cx.edges[e_of_f]                          # (nt, 4, 3, 2)
    t_col = np.broadcast_to(np.arange(nt)[:, None, None, None], (nt, 4, 3, 2))
    f_col = np.broadcast_to(f_of_t[:, :, None, None] + nt, (nt, 4, 3, 2))
    e_col = e_of_f[:, :, :, None] + (nt + nf)
    e_col = np.broadcast_to(e_col, (nt, 4, 3, 2))
    v_col = v_of_e + (nt + nf + ne)
    tets = np.stack([t_col, f_col, e_col, v_col], axis=-1).reshape(-1, 4)

    out = SimplicialComplex3.from_tets(vertices, tets)
    out.vertex_parent_dim = parent_dim
    out.vertex_parent_id = parent_id
    out.parent = cx
    return out


def classify(cx: SimplicialComplex3) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vertex-based interior/boundary partition of faces and edges.

    A face is a boundary face when all three of its vertices lie on the
    boundary, interior when at least one vertex is interior; edges likewise
    with both endpoints.  Returns ``(interior_faces, boundary_faces,
    interior_edges, boundary_edges)`` as sorted id arrays.
    """
    bv = cx.boundary_vertices
    fb = bv[cx.faces].all(axis=1)
    eb = bv[cx.edges].all(axis=1)
    return (np.flatnonzero(~fb), np.flatnonzero(fb),
            np.flatnonzero(~eb), np.flatnonzero(eb))


@dataclass
class BoundaryFrame:
    """Orthonormal frame and subdivision sub-faces of one coarse boundary face.

    ``normal`` is the outward unit normal; ``(t1, t2, normal)`` is positively
    oriented; ``subfaces`` lists the six sub-face ids in the subdivision.
    """

    face: int
    normal: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    subfaces: np.ndarray


def boundary_frames(cx: SimplicialComplex3, sub: SimplicialComplex3) -> list[BoundaryFrame]:
    """Outward frames of the coarse boundary faces with their six sub-faces in ``sub``."""
    if sub.parent is not cx:
        raise MeshError("subdivision does not belong to this complex")
    normals = cx.face_normals()
    out_sign = cx.outward_face_signs()

    # group boundary sub-faces by the coarse face their dim-2 vertex subdivides
    nt = cx.num_tets
    sub_bids = sub.boundary_face_ids()
    first_vertex = sub.faces[sub_bids, 0]
    if not np.all(sub.vertex_parent_dim[first_vertex] == 2):
        raise MeshError("boundary sub-face without a face barycenter vertex")
    coarse = sub.vertex_parent_id[first_vertex]
    order = np.argsort(coarse, kind="stable")

    frames = []
    for grp in np.split(sub_bids[order], np.flatnonzero(np.diff(coarse[order])) + 1):
        fid = int(sub.vertex_parent_id[sub.faces[grp[0], 0]])
        if len(grp) != 6:
            raise MeshError(f"coarse boundary face {fid} has {len(grp)} sub-faces")
        n = out_sign[fid] * normals[fid]
        k = int(np.argmin(np.abs(n)))
        t1 = np.cross(np.eye(3)[k], n)
        t1 /= np.linalg.norm(t1)
        t2 = np.cross(n, t1)
        frames.append(BoundaryFrame(face=fid, normal=n, t1=t1, t2=t2, subfaces=np.sort(grp)))
    frames.sort(key=lambda fr: fr.face)
    return frames
