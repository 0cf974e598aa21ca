"""Orthotropic elastic tensors from engineering constants.

The nine independent moduli of an orthotropic material (three elastic
moduli, three rigidity moduli, six Poisson ratios constrained pairwise)
determine a 6x6 elastic-constant matrix in pair ordering
(11, 22, 33, 23, 31, 12): the upper 3x3 block is the inverse of the
compliance block assembled from moduli and ratios, and the shear block is
diagonal with the rigidity moduli.  Axes 1, 2, 3 are the radial, tangential
and longitudinal material directions, identified with the Cartesian x, y, z
axes; the plate's thin direction sits on axis 2.

Contractions of the four-index tensor are always derived from the four-index
components themselves, never from the 6x6 matrix, which keeps the symmetric
index-pair multiplicities of the shear terms out of harm's way.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np


class MaterialError(ValueError):
    """Non-coercive or inconsistent material description."""


_PAIRS = ((0, 0), (1, 1), (2, 2), (1, 2), (2, 0), (0, 1))  # Voigt pair order


@dataclass(frozen=True)
class EngineeringConstants:
    """Engineering constants in Pa (moduli) and dimensionless Poisson ratios.

    Subscripts r, t, z are the radial, tangential and longitudinal axes.
    """

    e_r: float
    e_t: float
    e_z: float
    g_tz: float
    g_rz: float
    g_rt: float
    mu_rt: float
    mu_tr: float
    mu_rz: float
    mu_zr: float
    mu_tz: float
    mu_zt: float

    def __post_init__(self):
        if min(self.e_r, self.e_t, self.e_z, self.g_tz, self.g_rz, self.g_rt) <= 0:
            raise MaterialError("all moduli must be positive")

    def compatibility_residuals(self) -> np.ndarray:
        """Relative mismatch of the three pairwise ratio relations."""
        pairs = [
            (self.mu_rt / self.e_r, self.mu_tr / self.e_t),
            (self.mu_rz / self.e_r, self.mu_zr / self.e_z),
            (self.mu_tz / self.e_t, self.mu_zt / self.e_z),
        ]
        return np.array([abs(a - b) / max(abs(a), abs(b), 1e-300) for a, b in pairs])

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        return bool(self.compatibility_residuals().max() <= tol)


def symmetrize(raw: EngineeringConstants) -> EngineeringConstants:
    """Average each pair of scaled Poisson ratios so the reciprocity relations hold.

    Each pair (mu_ij/e_i, mu_ji/e_j) is replaced by its arithmetic mean and
    the ratios back-solved; the map is idempotent and leaves compatible data
    unchanged.
    """
    def avg(mu_ij, e_i, mu_ji, e_j):
        v = 0.5 * (mu_ij / e_i + mu_ji / e_j)
        return v * e_i, v * e_j

    mu_rt, mu_tr = avg(raw.mu_rt, raw.e_r, raw.mu_tr, raw.e_t)
    mu_rz, mu_zr = avg(raw.mu_rz, raw.e_r, raw.mu_zr, raw.e_z)
    mu_tz, mu_zt = avg(raw.mu_tz, raw.e_t, raw.mu_zt, raw.e_z)
    return replace(raw, mu_rt=mu_rt, mu_tr=mu_tr, mu_rz=mu_rz,
                   mu_zr=mu_zr, mu_tz=mu_tz, mu_zt=mu_zt)


@dataclass(frozen=True)
class ElasticTensor:
    """Elastic constants in 6x6 pair form plus the cached four-index tensor.

    ``voigt`` is block diagonal: the normal 3x3 block and the shear diagonal
    (g_tz, g_rz, g_rt).  ``w4`` carries the full minor and major symmetries;
    ``a_tensor[i, a, j, b]`` is the second-order coefficient array contracted
    by the stiffness pairings.
    """

    voigt: np.ndarray     # (6, 6) Pa
    w4: np.ndarray        # (3, 3, 3, 3) Pa
    rho: float            # kg/m^3

    @property
    def a_tensor(self) -> np.ndarray:
        return self.w4

    @property
    def normal_block(self) -> np.ndarray:
        return self.voigt[:3, :3]

    @property
    def shear_block(self) -> np.ndarray:
        return self.voigt[3:, 3:]

    @classmethod
    def from_blocks(cls, normal: np.ndarray, shear: np.ndarray, rho: float = 1.0) -> "ElasticTensor":
        """Assemble from a normal 3x3 block and a shear 3x3 block (order tz, rz, rt)."""
        voigt = np.zeros((6, 6))
        voigt[:3, :3] = normal
        voigt[3:, 3:] = shear
        if not np.allclose(voigt, voigt.T, rtol=0, atol=1e-8 * max(1.0, np.abs(voigt).max())):
            raise MaterialError("elastic constant matrix must be symmetric")
        voigt = 0.5 * (voigt + voigt.T)  # exact major symmetry
        w4 = np.zeros((3, 3, 3, 3))
        for a, (i, j) in enumerate(_PAIRS):
            for b, (k, l) in enumerate(_PAIRS):
                v = voigt[a, b]
                for ii, jj in ((i, j), (j, i)):
                    for kk, ll in ((k, l), (l, k)):
                        w4[ii, jj, kk, ll] = v
        return cls(voigt=voigt, w4=w4, rho=float(rho))

    def linear_stress_normal(self, n: np.ndarray) -> np.ndarray:
        """Stress of the identity deformation against a unit normal: W4^{a i j j} n_i."""
        return np.einsum("aijj,i->a", self.w4, n)

    def stress(self, grad: np.ndarray) -> np.ndarray:
        """Stress tensor of a displacement gradient ``grad[j, b] = d_j u^b``."""
        return np.einsum("aijb,jb->ai", self.w4, grad)


def from_engineering(c: EngineeringConstants, rho: float) -> ElasticTensor:
    """Elastic tensor from symmetrized engineering constants and density.

    Inverts the upper 3x3 compliance block (rows and columns ordered r, t, z)
    and places the rigidity moduli on the shear diagonal.  Cartesian
    components are taken equal to the material-frame ones, which is exact for
    flat plates and a small-wedge approximation otherwise.
    """
    if not c.is_symmetric(1e-9):
        raise MaterialError("constants violate the reciprocity relations; symmetrize first")
    compliance = np.array([
        [1.0 / c.e_r, -c.mu_tr / c.e_t, -c.mu_zr / c.e_z],
        [-c.mu_rt / c.e_r, 1.0 / c.e_t, -c.mu_zt / c.e_z],
        [-c.mu_rz / c.e_r, -c.mu_tz / c.e_t, 1.0 / c.e_z],
    ])
    det = np.linalg.det(compliance)
    if abs(det) < 1e-12 * np.abs(compliance).max() ** 3:
        raise MaterialError("singular compliance block: material is not coercive")
    normal = np.linalg.inv(compliance)
    shear = np.diag([c.g_tz, c.g_rz, c.g_rt])
    tensor = ElasticTensor.from_blocks(normal, shear, rho)
    if np.any(np.linalg.eigvalsh(tensor.voigt) <= 0):
        raise MaterialError("elastic constant matrix is not positive definite")
    return tensor


def coercivity_eigenvalues(t: ElasticTensor) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues of the normal block and of the shear block (its diagonal).

    All six must be positive for the stored energy to be coercive.
    """
    return np.linalg.eigvalsh(t.normal_block), np.diag(t.shear_block).copy()


def boundary_products(t: ElasticTensor, n: np.ndarray, grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Normal traction pair used by the boundary conditions.

    Returns ``(W'(1)N, sigma(G)N)`` for unit outward normal ``n`` and
    displacement gradient ``grad[j, b] = d_j u^b``; indices are raised and
    lowered freely in the orthonormal frame.
    """
    n = np.asarray(n, dtype=float)
    if abs(np.linalg.norm(n) - 1.0) > 1e-9:
        raise MaterialError("normal must be a unit vector")
    w1n = t.linear_stress_normal(n)
    sigma_n = np.einsum("aijb,jb,i->a", t.w4, np.asarray(grad, dtype=float), n)
    return w1n, sigma_n


# -- presets and material files ----------------------------------------------

def engelmann_spruce_raw() -> EngineeringConstants:
    """Published engineering constants for Engelmann spruce (12% moisture).

    Moduli are ratios of e_z = 9790 MPa; the Poisson ratios fail the
    reciprocity relations and must be symmetrized before use.
    """
    e_z = 9790e6
    return EngineeringConstants(
        e_r=0.128 * e_z, e_t=0.059 * e_z, e_z=e_z,
        g_tz=0.120 * e_z, g_rz=0.124 * e_z, g_rt=0.010 * e_z,
        mu_rt=0.530, mu_tr=0.255, mu_rz=0.083, mu_zr=0.422,
        mu_tz=0.058, mu_zt=0.462,
    )


SPRUCE_DENSITY = 360.0  # kg/m^3

PRESETS = {"engelmann-spruce": (engelmann_spruce_raw, SPRUCE_DENSITY)}


def load_preset(name: str) -> ElasticTensor:
    if name not in PRESETS:
        raise MaterialError(f"unknown material preset '{name}'")
    raw_fn, rho = PRESETS[name]
    return from_engineering(symmetrize(raw_fn()), rho)


def load_material_file(path) -> ElasticTensor:
    """Material description from JSON: engineering constants in MPa plus density.

    Keys: e_r, e_t, e_z, g_tz, g_rz, g_rt (MPa); mu_rt, mu_tr, mu_rz, mu_zr,
    mu_tz, mu_zt; rho (kg/m^3).
    """
    with open(path) as fh:
        doc = json.load(fh)
    kwargs = {}
    for key in ("e_r", "e_t", "e_z", "g_tz", "g_rz", "g_rt"):
        kwargs[key] = float(doc[key]) * 1e6
    for key in ("mu_rt", "mu_tr", "mu_rz", "mu_zr", "mu_tz", "mu_zt"):
        kwargs[key] = float(doc[key])
    return from_engineering(symmetrize(EngineeringConstants(**kwargs)), float(doc["rho"]))
