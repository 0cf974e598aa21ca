import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp

from platevib.solver import (EigenPair, Factorization, SolverError, eigs_near,
                             factorize_shifted, frequency_of, solve_forced)


def random_pencil(rng, n, definite_stiffness=False):
    a = rng.standard_normal((n, n))
    k = 0.5 * (a + a.T)
    if definite_stiffness:
        k = a @ a.T + n * np.eye(n)
    b = rng.standard_normal((n, n))
    m = b @ b.T + n * np.eye(n)
    return sp.csr_matrix(k), sp.csr_matrix(m)


class TestFactorization:
    def test_identity_solve_with_zero_shift(self):
        rng = np.random.default_rng(0)
        k, m = random_pencil(rng, 40, definite_stiffness=True)
        fact = factorize_shifted(k, m, 0.0)
        for i in (0, 13, 39):
            e = np.zeros(40)
            e[i] = 1.0
            x = fact.solve(k @ e)
            assert np.abs(x - e).max() <= 1e-10

    def test_two_by_two_analytic(self):
        k = sp.csr_matrix(np.array([[2.0, 1.0], [1.0, 3.0]]))
        m = sp.identity(2, format="csr")
        sigma = 0.5
        fact = factorize_shifted(k, m, sigma)
        shifted = np.array([[1.5, 1.0], [1.0, 2.5]])
        rhs = np.array([1.0, -1.0])
        assert np.allclose(fact.solve(rhs), np.linalg.solve(shifted, rhs), rtol=1e-13)

    def test_refactorization_reproduces_shifted_matrix(self):
        rng = np.random.default_rng(1)
        k, m = random_pencil(rng, 30)
        sigma = -2.0
        fact = factorize_shifted(k, m, sigma)
        lu = fact.lu
        # SuperLU convention: Pr (K - sigma M) Pc = L U
        shifted = (k - sigma * m).toarray()
        pr = np.zeros((30, 30))
        pr[lu.perm_r, np.arange(30)] = 1.0
        pc = np.zeros((30, 30))
        pc[np.arange(30), lu.perm_c] = 1.0
        recon = pr.T @ (lu.L @ lu.U).toarray() @ pc.T
        assert np.abs(recon - shifted).max() <= 1e-8 * np.abs(shifted).max()

    def test_forward_backward_residual(self):
        rng = np.random.default_rng(2)
        k, m = random_pencil(rng, 50, definite_stiffness=True)
        fact = factorize_shifted(k, m, 0.0)
        rhs = rng.standard_normal(50)
        x = fact.solve(rhs)
        assert np.linalg.norm(k @ x - rhs) / np.linalg.norm(rhs) <= 1e-10

    def test_exact_singularity_detected(self):
        k = sp.diags([1.0, 2.0, 3.0]).tocsr()
        m = sp.identity(3, format="csr")
        with pytest.raises(SolverError, match="perturb"):
            factorize_shifted(k, m, 2.0)

    def test_dimension_mismatch(self):
        with pytest.raises(SolverError):
            factorize_shifted(sp.identity(3, format="csr"), sp.identity(4, format="csr"), 0.0)


class TestEigsNear:
    def test_diagonal_pencil(self):
        k = sp.diags(np.arange(1.0, 11.0)).tocsr()
        m = sp.identity(10, format="csr")
        pairs = eigs_near(k, m, 4.2, 1)
        assert pairs[0].eigenvalue == pytest.approx(4.0, abs=1e-10)
        v = np.abs(pairs[0].vector)
        assert np.argmax(v) == 3
        assert v[3] == pytest.approx(1.0, rel=1e-10)

    def test_random_pencils_match_dense_oracle(self):
        rng = np.random.default_rng(3)
        for trial in range(20):
            n = int(rng.integers(40, 200))
            k, m = random_pencil(rng, n)
            sigma = float(rng.normal(scale=2.0))
            kk = int(rng.integers(1, 6))
            pairs = eigs_near(k, m, sigma, kk, seed=trial)
            dense = sla.eigh(k.toarray(), m.toarray(), eigvals_only=True)
            nearest = dense[np.argsort(np.abs(dense - sigma))[:kk]]
            got = np.sort([p.eigenvalue for p in pairs])
            scale = np.abs(dense).max()
            assert np.abs(got - np.sort(nearest)).max() <= 1e-8 * scale

    def test_sorted_by_shift_distance(self):
        rng = np.random.default_rng(4)
        k, m = random_pencil(rng, 80)
        pairs = eigs_near(k, m, 0.7, 5)
        d = [abs(p.eigenvalue - 0.7) for p in pairs]
        assert d == sorted(d)

    def test_six_distinct_values_with_residuals(self):
        rng = np.random.default_rng(5)
        k, m = random_pencil(rng, 100)
        pairs = eigs_near(k, m, -1.0, 6)
        vals = [p.eigenvalue for p in pairs]
        assert len(np.unique(np.round(vals, 10))) == 6
        for p in pairs:
            assert p.residual <= 1e-8

    def test_mass_orthogonality(self):
        rng = np.random.default_rng(6)
        k, m = random_pencil(rng, 90)
        pairs = eigs_near(k, m, 0.0, 5)
        vmat = np.stack([p.vector for p in pairs], axis=1)
        gram = vmat.T @ (m @ vmat)
        assert np.abs(gram - np.diag(np.diag(gram))).max() <= 1e-6
        assert np.allclose(np.diag(gram), 1.0, rtol=1e-10)

    def test_determinism(self):
        rng = np.random.default_rng(7)
        k, m = random_pencil(rng, 70)
        a = eigs_near(k, m, 0.3, 4, seed=11)
        b = eigs_near(k, m, 0.3, 4, seed=11)
        for pa, pb in zip(a, b):
            assert abs(pa.eigenvalue - pb.eigenvalue) <= 1e-10 * max(1.0, abs(pa.eigenvalue))

    def test_too_many_pairs_rejected(self):
        k = sp.identity(5, format="csr")
        with pytest.raises(SolverError):
            eigs_near(k, k, 0.0, 5)


class TestSolveForced:
    def test_zero_rhs(self):
        rng = np.random.default_rng(8)
        k, m = random_pencil(rng, 40)
        x = solve_forced(k, m, 2.0, np.zeros(40))
        assert np.all(x == 0)

    def test_constructed_solution(self):
        rng = np.random.default_rng(9)
        k, m = random_pencil(rng, 60)
        omega = 3.0
        e1 = np.zeros(60)
        e1[0] = 1.0
        rhs = -(omega ** 2 * m + k) @ e1
        x = solve_forced(k, m, omega, rhs)
        assert np.abs(x - e1).max() <= 1e-9

    def test_dense_oracle(self):
        rng = np.random.default_rng(10)
        for trial in range(10):
            n = int(rng.integers(20, 120))
            k, m = random_pencil(rng, n)
            omega = float(rng.uniform(0.5, 4.0))
            rhs = rng.standard_normal(n)
            x = solve_forced(k, m, omega, rhs)
            want = np.linalg.solve(-(omega ** 2 * m + k).toarray(), rhs)
            assert np.abs(x - want).max() <= 1e-9 * max(1.0, np.abs(want).max())

    def test_resonant_drive_rejected(self):
        # -omega^2 equals an eigenvalue of the pencil: the forced system is singular
        k = sp.diags([-4.0, -9.0]).tocsr()
        m = sp.identity(2, format="csr")
        with pytest.raises(SolverError, match="detune|resonance"):
            solve_forced(k, m, 2.0, np.array([1.0, 1.0]))


class TestFrequencyOf:
    def test_oscillatory(self):
        f = frequency_of(-(2 * np.pi * 100.0) ** 2)
        assert f.kind == "oscillatory"
        assert f.hertz == pytest.approx(100.0, rel=1e-12)

    def test_damped(self):
        f = frequency_of(1.0)
        assert f.kind == "damped"
        assert f.hertz is None

    def test_rigid(self):
        f = frequency_of(0.0)
        assert f.kind == "rigid"
        assert f.hertz == 0.0

    def test_eigenpair_properties(self):
        p = EigenPair(eigenvalue=-(2 * np.pi * 50.0) ** 2, vector=np.ones(3), residual=0.0)
        assert p.frequency.hertz == pytest.approx(50.0)
        assert p.mass_pencil_eigenvalue == pytest.approx(1.0 / p.eigenvalue)
        rigid = EigenPair(eigenvalue=0.0, vector=np.ones(3), residual=0.0)
        assert rigid.mass_pencil_eigenvalue == float("inf")


class TestDiagnostics:
    def test_eigs_log_lines(self):
        import io
        rng = np.random.default_rng(20)
        a = rng.standard_normal((30, 30))
        k = sp.csr_matrix(0.5 * (a + a.T))
        m = sp.identity(30, format="csr")
        buf = io.StringIO()
        pairs = eigs_near(k, m, 0.1, 3, log=buf)
        lines = buf.getvalue().splitlines()
        assert lines[0].startswith("eigs_near n=30 sigma=0.1 k=3")
        assert len(lines) == 1 + len(pairs)
        assert all("residual=" in ln for ln in lines[1:])

    def test_shifted_matrix_dump(self, tmp_path):
        from scipy.io import mmread
        k = sp.diags([1.0, 2.0, 3.0]).tocsr()
        m = sp.identity(3, format="csr")
        fact = factorize_shifted(k, m, -0.5)
        path = tmp_path / "shifted.mtx"
        fact.write_matrix_market(path)
        again = mmread(str(path)).toarray()
        assert np.allclose(again, (k + 0.5 * m).toarray())
