import json

import numpy as np
import pytest

from platevib.cli import main


def run(args):
    return main(args)


class TestMeshCommand:
    def test_census_output(self, tmp_path, capsys):
        assert run(["mesh", "--slab", "2x1x2", "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "vertices=18 edges=53 faces=56 tets=20 boundary_faces=32 euler=1" in out
        assert (tmp_path / "slab2x1x2_mesh.json").exists()
        assert (tmp_path / "slab2x1x2_census.txt").exists()

    def test_paper_slab_census(self, tmp_path, capsys):
        assert run(["mesh", "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "vertices=693 edges=3212 faces=4520 tets=2000 boundary_faces=1040" in out
        assert "vertices=10425 edges=61544 faces=99120 tets=48000 boundary_faces=6240" in out

    def test_rerun_byte_identical(self, tmp_path):
        run(["mesh", "--slab", "2x1x2", "--out", str(tmp_path / "a")])
        run(["mesh", "--slab", "2x1x2", "--out", str(tmp_path / "b")])
        fa = (tmp_path / "a" / "slab2x1x2_mesh.json").read_bytes()
        fb = (tmp_path / "b" / "slab2x1x2_mesh.json").read_bytes()
        assert fa == fb

    def test_invalid_body_fails_cleanly(self, tmp_path, capsys):
        assert run(["mesh", "--slab", "0x1x1", "--out", str(tmp_path)]) == 2
        err = capsys.readouterr().err
        assert err.startswith("error: ")
        assert "\n" not in err.strip()

    def test_plate_body(self, tmp_path, capsys):
        doc = {"cell_cm": 0.5, "mask": [[1, 1], [1, 0]],
               "thickness_cm": [[0.3, 0.3], [0.3, 0.3]],
               "elevation_cm": [[0, 0], [0, 0]]}
        plate = tmp_path / "tri.json"
        plate.write_text(json.dumps(doc))
        assert run(["mesh", "--plate", str(plate), "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "tets=15" in out


class TestAssembleCommand:
    def test_outputs_and_census(self, tmp_path, capsys):
        assert run(["assemble", "--slab", "2x1x2", "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "subsystems: 32" in out
        for suffix in ("I", "K", "I_red", "K_red", "C"):
            assert (tmp_path / f"slab2x1x2_{suffix}.mtx").exists()
        text = (tmp_path / "slab2x1x2_constraints.txt").read_text()
        for line in text.splitlines():
            if "symmetry_residual" in line:
                assert float(line.split(":")[1]) <= 1e-9

    def test_zero_material_census(self, tmp_path, capsys):
        mat = {k: 1.0 for k in ("e_r", "e_t", "e_z", "g_tz", "g_rz", "g_rt")}
        mat.update({k: 0.0 for k in ("mu_rt", "mu_tr", "mu_rz", "mu_zr", "mu_tz", "mu_zt")})
        mat["rho"] = 1.0
        # an isotropic-unit material still has axis-aligned null subsystems
        mfile = tmp_path / "unit.json"
        mfile.write_text(json.dumps(mat))
        assert run(["assemble", "--slab", "1x1x1", "--material", str(mfile),
                    "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "null_rows: 24" in out  # 12 boundary faces, all null


class TestEigsCommand:
    def test_table_and_vectors(self, tmp_path, capsys):
        assert run(["eigs", "--slab", "2x1x2", "--freqs", "80", "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "f_r" in out
        table = (tmp_path / "slab2x1x2_coarse_eigs.txt").read_text()
        row = table.splitlines()[1].split()
        assert float(row[0]) == 80.0
        assert float(row[2]) <= 1e-8   # residual column
        assert (tmp_path / "slab2x1x2_coarse_80Hz_modes.csv").exists()

    def test_invalid_frequency(self, tmp_path):
        assert run(["eigs", "--slab", "2x1x2", "--freqs", "-5", "--out", str(tmp_path)]) == 2


class TestResonateCommand:
    def test_outputs(self, tmp_path):
        assert run(["resonate", "--slab", "2x1x2", "--freqs", "80",
                    "--out", str(tmp_path)]) == 0
        nodal = tmp_path / "slab2x1x2_coarse_80Hz_nodal.csv"
        svg = tmp_path / "slab2x1x2_coarse_80Hz_chladni.svg"
        assert nodal.exists() and svg.exists()
        assert (tmp_path / "slab2x1x2_coarse_flux.txt").exists()
        header = nodal.read_text().splitlines()[0]
        assert header.startswith("x,y,z,kind,id,nodal")

    def test_f0_scaling_invariance(self, tmp_path):
        run(["resonate", "--slab", "2x1x2", "--freqs", "80", "--f0", "1",
             "--out", str(tmp_path / "a")])
        run(["resonate", "--slab", "2x1x2", "--freqs", "80", "--f0", "2",
             "--out", str(tmp_path / "b")])
        fa = (tmp_path / "a" / "slab2x1x2_coarse_80Hz_nodal.csv").read_bytes()
        fb = (tmp_path / "b" / "slab2x1x2_coarse_80Hz_nodal.csv").read_bytes()
        assert fa == fb
        sa = (tmp_path / "a" / "slab2x1x2_coarse_80Hz_chladni.svg").read_bytes()
        sb = (tmp_path / "b" / "slab2x1x2_coarse_80Hz_chladni.svg").read_bytes()
        assert sa == sb

    def test_comega_ladder_nested(self, tmp_path):
        run(["resonate", "--slab", "2x1x2", "--freqs", "80", "--modes", "3",
             "--comega", "0.04,0.02,0.01,0.005", "--out", str(tmp_path)])
        nodal_sets = []
        for co in ("0.04", "0.02", "0.01", "0.005"):
            path = tmp_path / f"slab2x1x2_coarse_80Hz_nodal_c{co}.csv"
            flags = [line.split(",")[5] for line in path.read_text().splitlines()[1:]]
            nodal_sets.append({i for i, f in enumerate(flags) if f == "1"})
        for smaller, larger in zip(nodal_sets[1:], nodal_sets[:-1]):
            assert smaller <= larger

    def test_determinism(self, tmp_path):
        for sub in ("a", "b"):
            run(["resonate", "--slab", "2x1x2", "--freqs", "80", "--seed", "3",
                 "--out", str(tmp_path / sub)])
        for name in ("slab2x1x2_coarse_80Hz_nodal.csv", "slab2x1x2_coarse_80Hz_chladni.svg",
                     "slab2x1x2_coarse_flux.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestFluxCommand:
    def test_both_bases_reported(self, tmp_path, capsys):
        assert run(["flux", "--slab", "2x1x2", "--freqs", "80", "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "coarse" in out and "fine" in out
        csv = (tmp_path / "slab2x1x2_flux_tables.csv").read_text()
        assert len(csv.splitlines()) == 3  # header + coarse + fine


class TestEnvDefaults:
    def test_outdir_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PLATEVIB_OUT", str(tmp_path))
        assert run(["mesh", "--slab", "1x1x1"]) == 0
        assert (tmp_path / "slab1x1x1_census.txt").exists()
