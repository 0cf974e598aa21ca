"""Sparse generalized eigensolves near a shift, and forced-response solves.

Eigenpairs of the pencil ``stiffness c = lam mass c`` (mass symmetric
positive definite, stiffness symmetric indefinite) are found by Lanczos
iteration on the shift-inverted operator, with the shifted matrix factorized
sparsely.  Oscillatory modes have negative eigenvalues and frequency
``sqrt(-lam)/2pi``; positive eigenvalues belong to exponentially decaying
modes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import SparseSymMatrix


class SolverError(RuntimeError):
    """Factorization or eigeniteration failure."""


def _as_sparse(m) -> sp.csr_matrix:
    return m.mat if isinstance(m, SparseSymMatrix) else sp.csr_matrix(m)


@dataclass
class ModeFrequency:
    """Frequency classification of a pencil eigenvalue."""

    kind: str          # 'oscillatory' | 'damped' | 'rigid'
    hertz: float | None


def frequency_of(lam: float) -> ModeFrequency:
    """Frequency of an eigenvalue of (mass^-1 stiffness).

    Negative eigenvalues give undamped oscillation at sqrt(-lam)/2pi Hz;
    positive ones decay exponentially; zero is a rigid mode.
    """
    if lam < 0:
        return ModeFrequency("oscillatory", float(np.sqrt(-lam) / (2 * np.pi)))
    if lam > 0:
        return ModeFrequency("damped", None)
    return ModeFrequency("rigid", 0.0)


@dataclass
class EigenPair:
    """Eigenpair of stiffness c = lam mass c, mass-normalized (c^T M c = 1)."""

    eigenvalue: float
    vector: np.ndarray
    residual: float

    @property
    def frequency(self) -> ModeFrequency:
        return frequency_of(self.eigenvalue)

    @property
    def mass_pencil_eigenvalue(self) -> float:
        """Eigenvalue of the transposed pencil mass c = lam' stiffness c."""
        return float("inf") if self.eigenvalue == 0 else 1.0 / self.eigenvalue


@dataclass
class Factorization:
    """Sparse LU of (stiffness - sigma * mass) with fill-reducing ordering."""

    lu: spla.SuperLU
    sigma: float
    shape: tuple[int, int]
    shifted: sp.csc_matrix | None = None

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self.lu.solve(np.asarray(rhs, dtype=float))

    def write_matrix_market(self, path) -> None:
        """Dump the shifted matrix for external inspection."""
        from scipy.io import mmwrite
        mmwrite(str(path), sp.coo_matrix(self.shifted))


def factorize_shifted(stiff, mass, sigma: float) -> Factorization:
    """LU-factorize stiffness - sigma*mass with threshold pivoting.

    Exact singularity (sigma an eigenvalue of the pencil) raises with a hint
    to perturb the shift.
    """
    k = _as_sparse(stiff).tocsc()
    m = _as_sparse(mass).tocsc()
    if k.shape != m.shape:
        raise SolverError("stiffness and mass dimensions differ")
    shifted = (k - sigma * m).tocsc()
    try:
        lu = spla.splu(shifted, permc_spec="MMD_AT_PLUS_A",
                       diag_pivot_thresh=1e-3,
                       options={"SymmetricMode": True})
    except RuntimeError as exc:  # SuperLU signals exact singularity this way
        raise SolverError(
            f"shifted matrix is singular at sigma={sigma!r}; perturb the shift") from exc
    if not np.all(np.isfinite(lu.U.diagonal())) or np.any(lu.U.diagonal() == 0):
        raise SolverError(
            f"shifted matrix is singular at sigma={sigma!r}; perturb the shift")
    return Factorization(lu=lu, sigma=sigma, shape=k.shape, shifted=shifted)


def eigs_near(stiff, mass, sigma: float, k: int, tol: float = 1e-8,
              seed: int = 0, maxiter: int | None = None, log=None) -> list[EigenPair]:
    """The k eigenpairs of stiffness c = lam mass c with eigenvalues nearest sigma.

    Shift-invert Lanczos with full reorthogonalization (ARPACK) on the
    factorized shifted operator; the starting vector is pseudo-random with a
    fixed seed so repeated runs agree to machine precision.  Pairs come back
    sorted by |lam - sigma|, unit mass norm, with the largest-magnitude
    coefficient positive, and each residual is re-verified.  ``log`` takes a
    writable text stream for line-oriented solve diagnostics.
    """
    km = _as_sparse(stiff)
    mm = _as_sparse(mass)
    n = km.shape[0]
    if not 1 <= k <= n - 1:
        raise SolverError(f"cannot extract {k} eigenpairs from a system of size {n}")
    fact = factorize_shifted(km, mm, sigma)
    opinv = spla.LinearOperator(km.shape, matvec=fact.solve, dtype=float)
    v0 = np.random.default_rng(seed).standard_normal(n)
    if maxiter is None:
        maxiter = max(50 * k, 1000)
    try:
        vals, vecs = spla.eigsh(km, k=k, M=mm, sigma=sigma, which="LM",
                                mode="normal", OPinv=opinv, v0=v0,
                                maxiter=maxiter, tol=0)
    except spla.ArpackNoConvergence as exc:
        ritz = getattr(exc, "eigenvalues", None)
        raise SolverError(
            f"eigeniteration did not converge within {maxiter} iterations; "
            f"converged Ritz values: {ritz}") from exc

    order = np.argsort(np.abs(vals - sigma), kind="stable")
    k_norm = abs(km).max()
    if log is not None:
        log.write(f"eigs_near n={n} sigma={sigma!r} k={k} seed={seed} maxiter={maxiter}\n")
    pairs = []
    for i in order:
        v = vecs[:, i]
        mn = float(v @ (mm @ v))
        v = v / np.sqrt(mn)
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        res = float(np.linalg.norm(km @ v - vals[i] * (mm @ v)))
        rel = res / (k_norm * np.linalg.norm(v))
        if log is not None:
            log.write(f"pair {len(pairs)}: eigenvalue={float(vals[i])!r} residual={rel:.3e}\n")
        if rel > tol:
            raise SolverError(
                f"eigenpair residual {rel:.3e} exceeds tolerance {tol:.1e} "
                f"at eigenvalue {vals[i]!r}")
        pairs.append(EigenPair(eigenvalue=float(vals[i]), vector=v, residual=rel))
    return pairs


def solve_forced(stiff, mass, omega: float, rhs: np.ndarray,
                 tol: float = 1e-9) -> np.ndarray:
    """Solve -(omega^2 mass + stiffness) c = rhs by sparse factorization.

    One step of iterative refinement is applied; failure to reach the
    residual tolerance means omega sits numerically on a resonance and the
    drive should be detuned.
    """
    km = _as_sparse(stiff).tocsc()
    mm = _as_sparse(mass).tocsc()
    a = (-(omega ** 2) * mm - km).tocsc()
    rhs = np.asarray(rhs, dtype=float)
    try:
        lu = spla.splu(a, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=1e-3,
                       options={"SymmetricMode": True})
    except RuntimeError as exc:
        raise SolverError(
            f"forced system is singular at omega={omega!r}: drive frequency "
            "matches a resonance; detune it") from exc
    x = lu.solve(rhs)
    x += lu.solve(rhs - a @ x)
    scale = abs(a).max() * np.linalg.norm(x) + np.linalg.norm(rhs)
    res = np.linalg.norm(rhs - a @ x)
    if scale > 0 and res / scale > tol:
        raise SolverError(
            f"forced solve residual {res / scale:.3e} exceeds {tol:.1e}: omega "
            "is too close to an eigenfrequency; detune the drive")
    return x
