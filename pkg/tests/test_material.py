import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from platevib.material import (ElasticTensor, EngineeringConstants, MaterialError,
                               boundary_products, coercivity_eigenvalues,
                               engelmann_spruce_raw, from_engineering, load_material_file,
                               load_preset, symmetrize)

# printed reference blocks for Engelmann spruce, in units of 1e7 Pa
SPRUCE_W3 = np.array([
    [157.198269069862, 44.1920517114940, 116.065341927474],
    [44.1920517114940, 72.0200103705017, 75.6887031695923],
    [116.065341927474, 75.6887031695923, 1095.80735919001],
])
SPRUCE_D3 = np.array([117.480, 121.396, 9.790])
SPRUCE_W3_EIGS = np.array([52.5760348742398, 156.292790395160, 1116.15681336097])


def rel_err(a, b):
    return np.abs(a - b) / np.abs(b)


class TestSymmetrize:
    def test_spruce_becomes_compatible(self):
        s = symmetrize(engelmann_spruce_raw())
        assert s.is_symmetric(1e-14)

    def test_compatible_input_unchanged(self):
        c = EngineeringConstants(2e9, 1e9, 4e9, 1e8, 2e8, 3e8,
                                 mu_rt=0.2, mu_tr=0.1, mu_rz=0.1, mu_zr=0.2,
                                 mu_tz=0.05, mu_zt=0.2)
        assert c.is_symmetric(1e-14)
        assert symmetrize(c) == c

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.1, 10),
           st.floats(0.01, 0.9), st.floats(0.01, 0.9), st.floats(0.01, 0.9),
           st.floats(0.01, 0.9), st.floats(0.01, 0.9), st.floats(0.01, 0.9))
    def test_idempotent(self, er, et, ez, m1, m2, m3, m4, m5, m6):
        raw = EngineeringConstants(er * 1e9, et * 1e9, ez * 1e9, 1e8, 1e8, 1e8,
                                   mu_rt=m1, mu_tr=m2, mu_rz=m3, mu_zr=m4,
                                   mu_tz=m5, mu_zt=m6)
        once = symmetrize(raw)
        assert once.is_symmetric(1e-12)
        twice = symmetrize(once)
        for f in ("mu_rt", "mu_tr", "mu_rz", "mu_zr", "mu_tz", "mu_zt"):
            assert getattr(twice, f) == pytest.approx(getattr(once, f), rel=1e-13)

    def test_positive_moduli_required(self):
        with pytest.raises(MaterialError):
            EngineeringConstants(-1.0, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0)


class TestFromEngineering:
    def test_spruce_printed_blocks(self, spruce):
        assert rel_err(spruce.normal_block / 1e7, SPRUCE_W3).max() < 1e-6
        assert rel_err(np.diag(spruce.shear_block) / 1e7, SPRUCE_D3).max() < 1e-6
        assert spruce.rho == 360.0

    def test_spruce_six_significant_digits(self, spruce):
        w_eigs, d_eigs = coercivity_eigenvalues(spruce)
        assert rel_err(np.sort(w_eigs) / 1e7, np.sort(SPRUCE_W3_EIGS)).max() < 1e-6
        assert rel_err(d_eigs / 1e7, SPRUCE_D3).max() < 1e-6

    def test_requires_symmetrized_constants(self):
        with pytest.raises(MaterialError, match="reciprocity"):
            from_engineering(engelmann_spruce_raw(), 360.0)

    def test_identity_compliance_gives_identity(self):
        ident = from_engineering(
            EngineeringConstants(1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0), 1.0)
        assert np.allclose(ident.voigt, np.eye(6))

    def test_isotropic_two_distinct_eigenvalues(self):
        # equal moduli and ratios: closed-form inversion gives a bulk-like
        # eigenvalue E(1+mu)/((1+mu)(1-2mu)) ... appearing once, and a
        # shear-like one E/(1+mu) twice
        e, mu = 2.0e9, 0.25
        c = EngineeringConstants(e, e, e, 1e8, 1e8, 1e8, mu, mu, mu, mu, mu, mu)
        t = from_engineering(c, 1.0)
        w_eigs, _ = coercivity_eigenvalues(t)
        lam = e * mu / ((1 + mu) * (1 - 2 * mu))
        g2 = e / (1 + mu)
        expected = np.sort([3 * lam + g2, g2, g2])
        assert np.allclose(np.sort(w_eigs), expected, rtol=1e-12)
        assert len(np.unique(np.round(w_eigs, 0))) == 2

    def test_singular_compliance_rejected(self):
        # mu -> extreme values make the compliance block singular
        c = EngineeringConstants(1.0, 1.0, 1.0, 1, 1, 1,
                                 mu_rt=1.0, mu_tr=1.0, mu_rz=-1.0, mu_zr=-1.0,
                                 mu_tz=-1.0, mu_zt=-1.0)
        with pytest.raises(MaterialError):
            from_engineering(c, 1.0)

    def test_compliance_round_trip(self, spruce):
        s = symmetrize(engelmann_spruce_raw())
        compliance = np.array([
            [1 / s.e_r, -s.mu_tr / s.e_t, -s.mu_zr / s.e_z],
            [-s.mu_rt / s.e_r, 1 / s.e_t, -s.mu_zt / s.e_z],
            [-s.mu_rz / s.e_r, -s.mu_tz / s.e_t, 1 / s.e_z],
        ])
        assert np.allclose(np.linalg.inv(spruce.normal_block), compliance, rtol=1e-10)


class TestTensorStructure:
    def test_orthotropic_block_structure(self, spruce):
        assert np.abs(spruce.voigt[:3, 3:]).max() == 0
        assert np.abs(spruce.voigt[3:, :3]).max() == 0
        off = spruce.voigt[3:, 3:] - np.diag(np.diag(spruce.voigt[3:, 3:]))
        assert np.abs(off).max() == 0

    def test_positive_definite(self, spruce):
        assert np.all(np.linalg.eigvalsh(spruce.voigt) > 0)

    def test_minor_and_major_symmetries(self, spruce):
        w = spruce.w4
        assert np.abs(w - np.transpose(w, (1, 0, 2, 3))).max() == 0
        assert np.abs(w - np.transpose(w, (0, 1, 3, 2))).max() == 0
        assert np.abs(w - np.transpose(w, (2, 3, 0, 1))).max() == 0

    def test_strain_energy_positive(self, spruce):
        rng = np.random.default_rng(0)
        for _ in range(10000):
            g = rng.standard_normal((3, 3))
            e = 0.5 * (g + g.T)
            if np.abs(e).max() == 0:
                continue
            assert np.einsum("ijkl,ij,kl->", spruce.w4, e, e) > 0

    def test_contraction_matches_engineering_voigt(self, spruce):
        # sigma from the 4-index contraction equals the standard Voigt
        # machinery with engineering shear strains
        rng = np.random.default_rng(1)
        cmat = np.zeros((6, 6))
        cmat[:3, :3] = spruce.normal_block
        cmat[3:, 3:] = spruce.shear_block
        for _ in range(20):
            g = rng.standard_normal((3, 3))
            e = 0.5 * (g + g.T)
            sigma4 = np.einsum("ijkl,kl->ij", spruce.w4, e)
            ve = np.array([e[0, 0], e[1, 1], e[2, 2], 2 * e[1, 2], 2 * e[2, 0], 2 * e[0, 1]])
            vs = cmat @ ve
            expect = np.array([[vs[0], vs[5], vs[4]],
                               [vs[5], vs[1], vs[3]],
                               [vs[4], vs[3], vs[2]]])
            assert np.allclose(sigma4, expect, rtol=1e-12)


class TestBoundaryProducts:
    def test_zero_gradient(self, spruce):
        _, sn = boundary_products(spruce, np.array([0.0, 0.0, 1.0]), np.zeros((3, 3)))
        assert np.all(sn == 0)

    def test_brute_force_contraction(self, spruce):
        rng = np.random.default_rng(2)
        n = rng.standard_normal(3)
        n /= np.linalg.norm(n)
        g = rng.standard_normal((3, 3))
        w1n, sn = boundary_products(spruce, n, g)
        w1n_ref = np.zeros(3)
        sn_ref = np.zeros(3)
        for a in range(3):
            for i in range(3):
                for j in range(3):
                    w1n_ref[a] += spruce.w4[a, i, j, j] * n[i]
                    for b in range(3):
                        sn_ref[a] += spruce.w4[a, i, j, b] * g[j, b] * n[i]
        assert np.allclose(w1n, w1n_ref, rtol=1e-13)
        assert np.allclose(sn, sn_ref, rtol=1e-13)

    def test_linearity(self, spruce):
        rng = np.random.default_rng(3)
        n = np.array([1.0, 0.0, 0.0])
        g1, g2 = rng.standard_normal((2, 3, 3))
        _, s1 = boundary_products(spruce, n, g1)
        _, s2 = boundary_products(spruce, n, g2)
        _, s12 = boundary_products(spruce, n, 2.0 * g1 - 0.5 * g2)
        assert np.allclose(s12, 2.0 * s1 - 0.5 * s2, rtol=1e-12)

    def test_unit_normal_required(self, spruce):
        with pytest.raises(MaterialError):
            boundary_products(spruce, np.array([0.0, 0.0, 2.0]), np.zeros((3, 3)))

    def test_w1n_along_axis_is_axis_parallel(self, spruce):
        # orthotropy makes W'(1) diagonal, so axis normals return axis vectors;
        # this is what empties the slab's tangential traction constraints
        for k in range(3):
            n = np.eye(3)[k]
            w1n, _ = boundary_products(spruce, n, np.zeros((3, 3)))
            off = np.delete(w1n, k)
            assert np.abs(off).max() == 0
            assert w1n[k] == pytest.approx(spruce.normal_block[k].sum(), rel=1e-12)


class TestPresetsAndFiles:
    def test_preset_available(self):
        t = load_preset("engelmann-spruce")
        assert t.rho == 360.0

    def test_unknown_preset(self):
        with pytest.raises(MaterialError):
            load_preset("unobtainium")

    def test_material_file_round_trip(self, tmp_path, spruce):
        s = symmetrize(engelmann_spruce_raw())
        doc = {k: getattr(s, k) / 1e6 for k in ("e_r", "e_t", "e_z", "g_tz", "g_rz", "g_rt")}
        doc.update({k: getattr(s, k) for k in ("mu_rt", "mu_tr", "mu_rz", "mu_zr", "mu_tz", "mu_zt")})
        doc["rho"] = 360.0
        path = tmp_path / "spruce.json"
        import json
        path.write_text(json.dumps(doc))
        t = load_material_file(path)
        assert np.allclose(t.voigt, spruce.voigt, rtol=1e-12)
