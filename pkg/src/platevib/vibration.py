"""Forced resonance waves, time sampling, Chladni nodal extraction, flux diagnostics.

A sinusoidal pressure wave drives the body; near a natural mode the response
combines the drive frequency with the mode frequency so that both the field
and its velocity vanish at t = 0.  Nodal points are observation points on
the far boundary side whose amplitude stays within a threshold band of the
per-time minimum across one full drive cycle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .mesh import MeshError, SimplicialComplex3, _TET_FACES
from .whitney import FaceField, WhitneyBasis
from .assembly import ConstraintMap, SystemIndex, expand_reduced
from .solver import EigenPair, SolverError, solve_forced

SPEED_OF_SOUND_AIR = 343.0  # m/s, dry air at 20 C


@dataclass
class ForcingWave:
    """External sinusoidal pressure wave F0 sin(k.x -+ wt) as a body force.

    ``sign=-1`` selects the minus branch (the default), ``+1`` the plus
    branch.  The wavevector has magnitude w/v along ``direction`` and the
    phase is referenced to ``source``.
    """

    amplitude: np.ndarray
    direction: np.ndarray
    frequency: float
    source: np.ndarray
    speed: float = SPEED_OF_SOUND_AIR
    sign: int = -1

    def __post_init__(self):
        self.amplitude = np.asarray(self.amplitude, dtype=float)
        self.direction = np.asarray(self.direction, dtype=float)
        self.source = np.asarray(self.source, dtype=float)
        if abs(np.linalg.norm(self.direction) - 1.0) > 1e-9:
            raise ValueError("direction must be a unit vector")
        if self.frequency <= 0 or self.speed <= 0:
            raise ValueError("frequency and speed must be positive")
        if self.sign not in (-1, 1):
            raise ValueError("sign selects one of the two branches: -1 or +1")

    @property
    def omega(self) -> float:
        return 2.0 * np.pi * self.frequency

    @property
    def wavevector(self) -> np.ndarray:
        return (self.omega / self.speed) * self.direction


@dataclass
class ResonanceWave:
    """Forced response combining the drive with one or more nearby modes.

    Coefficients at time t are, summed over contributing mode frequencies wr,
    ``(c1 (cos wt - cos wr t) + s c2 (sin wt - (w/wr) sin wr t)) / (wr^2 - w^2)``
    with s the external wave's branch sign; both the field and its time
    derivative vanish at t = 0.  ``c1``, ``c2`` are full face-coefficient
    vectors (reduced solutions are expanded through the constraint map).
    """

    c1: np.ndarray
    c2: np.ndarray
    mode_omegas: np.ndarray
    omega: float
    sign: int
    basis: str = "coarse"

    def time_factors(self, t: float) -> tuple[float, float]:
        a = b = 0.0
        w = self.omega
        for wr in self.mode_omegas:
            den = wr * wr - w * w
            a += (np.cos(w * t) - np.cos(wr * t)) / den
            b += self.sign * (np.sin(w * t) - (w / wr) * np.sin(wr * t)) / den
        return a, b

    def time_factors_dt(self, t: float) -> tuple[float, float]:
        a = b = 0.0
        w = self.omega
        for wr in self.mode_omegas:
            den = wr * wr - w * w
            a += (-w * np.sin(w * t) + wr * np.sin(wr * t)) / den
            b += self.sign * w * (np.cos(w * t) - np.cos(wr * t)) / den
        return a, b

    def coefficients(self, t: float) -> np.ndarray:
        a, b = self.time_factors(t)
        return a * self.c1 + b * self.c2

    def coefficients_dt(self, t: float) -> np.ndarray:
        a, b = self.time_factors_dt(t)
        return a * self.c1 + b * self.c2


def resonance_wave(frequency: float, modes: list[EigenPair], c1_rhs: np.ndarray,
                   c2_rhs: np.ndarray, stiff, mass, sign: int = -1,
                   basis: str = "coarse", index: SystemIndex | None = None,
                   cmap: ConstraintMap | None = None,
                   num_faces: int | None = None) -> ResonanceWave:
    """Solve the forced system at the drive frequency and attach nearby modes.

    Every contributing mode must be oscillatory; for the reduced basis the
    solved coefficient vectors are expanded to full face coefficients through
    the constraint map.
    """
    omega = 2.0 * np.pi * frequency
    mode_omegas = []
    for m in modes:
        fr = m.frequency
        if fr.kind != "oscillatory":
            raise SolverError(f"mode of kind '{fr.kind}' cannot drive a resonance wave")
        if abs(2.0 * np.pi * fr.hertz - omega) < 1e-12 * omega:
            raise SolverError("drive frequency equals a mode frequency; detune it")
        mode_omegas.append(2.0 * np.pi * fr.hertz)
    c1 = solve_forced(stiff, mass, omega, c1_rhs)
    c2 = solve_forced(stiff, mass, omega, c2_rhs)
    if basis == "fine":
        if index is None or cmap is None or num_faces is None:
            raise ValueError("fine basis requires the system index and constraint map")
        c1 = expand_reduced(c1, index, cmap, num_faces)
        c2 = expand_reduced(c2, index, cmap, num_faces)
    elif index is not None and num_faces is not None:
        full1 = np.zeros(num_faces)
        full1[index.face_order()] = c1
        c1 = full1
        full2 = np.zeros(num_faces)
        full2[index.face_order()] = c2
        c2 = full2
    return ResonanceWave(c1=c1, c2=c2, mode_omegas=np.asarray(mode_omegas),
                         omega=omega, sign=sign, basis=basis)


# -- observation points -------------------------------------------------------


@dataclass
class ObservationSet:
    """Far-side observation points with their evaluation tetrahedra.

    Points are the union of the sub-face vertices (kind 0) and sub-face
    barycenters (kind 1) of the selected boundary patch; each point evaluates
    the field one-sidedly from a fixed supporting tetrahedron.
    """

    points: np.ndarray     # (n, 3)
    tets: np.ndarray       # (n,)
    kinds: np.ndarray      # (n,) 0 vertex, 1 barycenter
    ids: np.ndarray        # vertex id or face id
    faces: np.ndarray      # selected boundary sub-face ids


def observation_points(sub: SimplicialComplex3, direction: np.ndarray,
                       min_cos: float = 0.99) -> ObservationSet:
    """Observation points on the boundary patch whose outward normal faces ``direction``.

    Selects boundary sub-faces with outward normal within ``min_cos`` of the
    unit ``direction`` and returns the unique union of their vertices and
    barycenters, vertices first (ascending id), then barycenters (ascending
    face id).
    """
    direction = np.asarray(direction, dtype=float)
    nrm = np.linalg.norm(direction)
    if nrm == 0:
        raise MeshError("far-side direction must be nonzero")
    direction = direction / nrm
    bids = sub.boundary_face_ids()
    outward = sub.face_normals()[bids] * sub.outward_face_signs()[bids, None]
    sel = bids[outward @ direction >= min_cos]
    if len(sel) == 0:
        raise MeshError("far-side selector matches no boundary faces")

    vids = np.unique(sub.faces[sel].ravel())
    # evaluation tet of a vertex: supporting tet of the lowest selected face containing it
    vtet = {}
    for f in sel:
        t = int(sub.face_tets[f, 0])
        for v in sub.faces[f]:
            vtet.setdefault(int(v), t)
    vpoints = sub.vertices[vids]
    bpoints = sub.vertices[sub.faces[sel]].mean(axis=1)
    points = np.concatenate([vpoints, bpoints])
    tets = np.concatenate([np.array([vtet[int(v)] for v in vids], dtype=np.int64),
                           sub.face_tets[sel, 0]])
    kinds = np.concatenate([np.zeros(len(vids), dtype=np.int64),
                            np.ones(len(sel), dtype=np.int64)])
    ids = np.concatenate([vids, sel])
    return ObservationSet(points=points, tets=tets, kinds=kinds, ids=ids, faces=sel)


def evaluation_matrix(basis: WhitneyBasis, obs: ObservationSet) -> sp.csr_matrix:
    """Sparse map from face coefficients to stacked field values at the observation points.

    Row block 3i holds the field at point i: each point sees the four face
    fields of its assigned tetrahedron.
    """
    cx = basis.complex
    n = len(obs.points)
    rows, cols, vals = [], [], []
    lam = 0.25 + np.einsum("nki,ni->nk", basis.gradients[obs.tets],
                           obs.points - basis.centroids[obs.tets])
    for i in range(n):
        t = int(obs.tets[i])
        for j in range(4):
            f = int(cx.tet_faces[t, j])
            w = 2.0 * lam[i, _TET_FACES[j]] @ basis.crosses[t, j]
            for ax in range(3):
                rows.append(3 * i + ax)
                cols.append(f)
                vals.append(w[ax])
    return sp.csr_matrix((vals, (rows, cols)), shape=(3 * n, cx.num_faces))


# -- time sampling and nodal extraction ----------------------------------------


@dataclass
class SampleReport:
    """Field norms at observation points over the sample times."""

    times: np.ndarray      # (nt,)
    norms: np.ndarray      # (nt, npoints)
    max_t: np.ndarray
    min_t: np.ndarray
    delta_t: np.ndarray    # (max - min) / 10

    @property
    def worst_time_index(self) -> int:
        """Index (0-based) of the sample with the largest max/min ratio."""
        with np.errstate(divide="ignore"):
            ratio = np.where(self.min_t > 0, self.max_t / self.min_t, np.inf)
        return int(np.argmax(ratio))


def default_sample_times(omega: float, count: int = 10) -> np.ndarray:
    """Equally spaced times t_j = j 2pi/(count w), j = 1..count: one drive cycle."""
    j = np.arange(1, count + 1)
    return j * 2.0 * np.pi / (count * omega)


def sample_norms(wave: ResonanceWave, emat: sp.csr_matrix,
                 times: np.ndarray | None = None) -> SampleReport:
    """Euclidean field norms at every observation point and sample time."""
    if times is None:
        times = default_sample_times(wave.omega)
    v1 = (emat @ wave.c1).reshape(-1, 3)
    v2 = (emat @ wave.c2).reshape(-1, 3)
    norms = np.empty((len(times), v1.shape[0]))
    for i, t in enumerate(times):
        a, b = wave.time_factors(float(t))
        norms[i] = np.linalg.norm(a * v1 + b * v2, axis=1)
    mx = norms.max(axis=1)
    mn = norms.min(axis=1)
    return SampleReport(times=np.asarray(times), norms=norms, max_t=mx, min_t=mn,
                        delta_t=(mx - mn) / 10.0)


@dataclass
class NodalReport:
    """Nodal classification of the observation points at threshold factor c_omega."""

    obs: ObservationSet
    sample: SampleReport
    c_omega: float
    nodal_at: np.ndarray    # (nt, npoints) bool
    nodal: np.ndarray       # (npoints,) bool: nodal at every sample time

    @property
    def num_nodal(self) -> int:
        return int(self.nodal.sum())


def nodal_points(obs: ObservationSet, sample: SampleReport, c_omega: float) -> NodalReport:
    """Points whose norm stays within min + c_omega*delta at every sample time.

    Monotone in c_omega, and invariant under global rescaling of the forcing
    amplitude since all norms scale together.
    """
    if c_omega <= 0:
        raise ValueError("c_omega must be positive")
    thresh = sample.min_t[:, None] + c_omega * sample.delta_t[:, None]
    nodal_at = sample.norms <= thresh
    return NodalReport(obs=obs, sample=sample, c_omega=c_omega,
                       nodal_at=nodal_at, nodal=nodal_at.all(axis=0))


# -- flux diagnostics ------------------------------------------------------------


def boundary_flux(sub: SimplicialComplex3, field: FaceField | np.ndarray) -> float:
    """Outward flux of a face-coefficient field through the whole boundary.

    By the unit-flux duality only boundary faces contribute, each with its
    coefficient times the orientation sign against the outward normal; exact
    up to the sign arithmetic.
    """
    coeffs = field.coeffs if isinstance(field, FaceField) else np.asarray(field)
    if len(coeffs) != sub.num_faces:
        raise MeshError("coefficient length does not match the number of faces")
    bids = sub.boundary_face_ids()
    signs = sub.outward_face_signs()[bids]
    return float(coeffs[bids] @ signs)


@dataclass
class FluxRow:
    """One line of the flux diagnostics table."""

    body: str
    basis: str
    frequency: float
    mode_frequency: float
    eigenvector_flux: float
    wave_flux: float
    worst_time_index: int   # 1-based sample index


def flux_report(rows: list[FluxRow]) -> str:
    """Aligned flux table: drive frequency, nearest mode, eigenvector and wave fluxes."""
    header = (f"{'body':<14}{'basis':<8}{'f':>8}{'f_r':>16}"
              f"{'flux eigvec':>16}{'flux wave':>16}{'t_j':>5}")
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append(f"{r.body:<14}{r.basis:<8}{r.frequency:>8.1f}{r.mode_frequency:>16.8f}"
                     f"{r.eigenvector_flux:>16.10f}{r.wave_flux:>16.10f}{r.worst_time_index:>5d}")
    return "\n".join(lines) + "\n"


def flux_report_csv(rows: list[FluxRow]) -> str:
    lines = ["body,basis,f,f_r,flux_eigenvector,flux_wave,worst_time_index"]
    for r in rows:
        lines.append(f"{r.body},{r.basis},{r.frequency!r},{r.mode_frequency!r},"
                     f"{r.eigenvector_flux!r},{r.wave_flux!r},{r.worst_time_index}")
    return "\n".join(lines) + "\n"


# -- reports ---------------------------------------------------------------------


def nodal_csv(report: NodalReport) -> str:
    """Nodal report as CSV: point coordinates, nodal flag, per-time relative norms.

    Norms are reported relative to the global maximum over all points and
    times, which makes the file invariant under rescaling of the forcing
    amplitude (exactly so for power-of-two factors).
    """
    ncols = report.sample.norms.shape[0]
    scale = float(report.sample.norms.max()) or 1.0
    head = "x,y,z,kind,id,nodal," + ",".join(f"relnorm_t{j + 1}" for j in range(ncols))
    lines = [head]
    for i, p in enumerate(report.obs.points):
        kind = "vertex" if report.obs.kinds[i] == 0 else "barycenter"
        vals = ",".join(repr(float(v) / scale) for v in report.sample.norms[:, i])
        lines.append(f"{p[0]!r},{p[1]!r},{p[2]!r},{kind},{report.obs.ids[i]},"
                     f"{int(report.nodal[i])},{vals}")
    return "\n".join(lines) + "\n"


def chladni_svg(report: NodalReport, plane: tuple[int, int] = (0, 2),
                size: float = 640.0) -> str:
    """Scatter plot of the nodal points over the outline of the observed patch.

    Projects onto the given coordinate plane; nodal points are filled black,
    the rest light gray.  Output is deterministic byte-for-byte.
    """
    a, b = plane
    pts = report.obs.points
    lo = pts[:, [a, b]].min(axis=0)
    hi = pts[:, [a, b]].max(axis=0)
    span = np.maximum(hi - lo, 1e-12)
    scale = (size - 40.0) / span.max()
    w = span[0] * scale + 40.0
    h = span[1] * scale + 40.0

    def sx(v):
        return 20.0 + (v - lo[0]) * scale

    def sy(v):
        return h - 20.0 - (v - lo[1]) * scale

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.1f}" height="{h:.1f}" '
           f'viewBox="0 0 {w:.1f} {h:.1f}">',
           f'<rect x="{sx(lo[0]):.2f}" y="{sy(hi[1]):.2f}" '
           f'width="{span[0] * scale:.2f}" height="{span[1] * scale:.2f}" '
           'fill="none" stroke="#999" stroke-width="1"/>']
    order = np.argsort(report.nodal.astype(int), kind="stable")  # nodal drawn on top
    for i in order:
        x, y = sx(pts[i, a]), sy(pts[i, b])
        if report.nodal[i]:
            out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2.2" fill="#000"/>')
        else:
            out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="0.8" fill="#ccc"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
