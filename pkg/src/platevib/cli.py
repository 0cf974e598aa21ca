"""Batch command line front-end: mesh, assemble, eigs, resonate, flux.

Lengths at the CLI are centimeters and frequencies Hertz; everything is
converted to SI on entry.  Outputs are deterministic byte-for-byte under a
fixed seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import mesh as meshmod
from .mesh import MeshError, SimplicialComplex3, barycentric_subdivision, build_heightfield_plate, build_slab
from .whitney import WhitneyBasis
from . import material as matmod
from .assembly import (assemble_boundary_constraints, assemble_forcing, assemble_mass,
                       assemble_stiffness, reduce_forcing, reduce_system, expand_reduced,
                       system_index, write_matrix_market, write_vector_csv)
from .solver import SolverError, eigs_near
from .vibration import (FluxRow, ForcingWave, chladni_svg, boundary_flux,
                        evaluation_matrix, flux_report, flux_report_csv, nodal_csv,
                        nodal_points, observation_points, resonance_wave, sample_norms)

DEFAULT_FREQS = (80.0, 147.0, 222.0, 304.0, 349.0)


@dataclass
class RunConfig:
    """Validated run description shared by all subcommands."""

    body_kind: str                  # 'slab' | 'plate'
    label: str
    slab_counts: tuple[int, int, int] | None
    slab_cell: tuple[float, float, float] | None   # meters
    plate_file: str | None
    material: str
    frequencies: tuple[float, ...]
    basis: str
    modes: int
    c_omega: tuple[float, ...] | None
    f0: float
    sign: int
    out: Path
    seed: int

    def __post_init__(self):
        if any(f <= 0 for f in self.frequencies):
            raise ValueError("frequencies must be positive")
        if self.modes < 1:
            raise ValueError("mode count must be at least 1")


def _parse_counts(text: str) -> tuple[int, int, int]:
    parts = text.lower().replace(",", "x").split("x")
    if len(parts) != 3:
        raise ValueError(f"expected NXxNYxNZ, got '{text}'")
    counts = tuple(int(p) for p in parts)
    if min(counts) < 1:
        raise ValueError("block counts must be positive")
    return counts


def _parse_cell_cm(text: str) -> tuple[float, float, float]:
    parts = text.lower().replace("cm", "").replace(",", "x").split("x")
    if len(parts) != 3:
        raise ValueError(f"expected CXxCYxCZ in cm, got '{text}'")
    cell = tuple(float(p) / 100.0 for p in parts)
    if min(cell) <= 0:
        raise ValueError("cell dimensions must be positive")
    return cell


def _config(args) -> RunConfig:
    if args.plate:
        kind = "plate"
        label = args.label or Path(args.plate).stem
    else:
        kind = "slab"
        n = _parse_counts(args.slab)
        label = args.label or f"slab{n[0]}x{n[1]}x{n[2]}"
    out = Path(args.out or os.environ.get("PLATEVIB_OUT", "."))
    comega = tuple(float(c) for c in args.comega.split(",")) if getattr(args, "comega", None) else None
    return RunConfig(
        body_kind=kind, label=label,
        slab_counts=None if args.plate else _parse_counts(args.slab),
        slab_cell=None if args.plate else _parse_cell_cm(args.cell),
        plate_file=args.plate, material=args.material,
        frequencies=tuple(float(f) for f in args.freqs.split(",")) if getattr(args, "freqs", None) else DEFAULT_FREQS,
        basis=getattr(args, "basis", "coarse"), modes=getattr(args, "modes", 1),
        c_omega=comega, f0=getattr(args, "f0", 1.0), sign=-1 if getattr(args, "sign", "-") == "-" else 1,
        out=out, seed=args.seed,
    )


def _build_body(cfg: RunConfig) -> SimplicialComplex3:
    if cfg.body_kind == "slab":
        nx, ny, nz = cfg.slab_counts
        dx, dy, dz = cfg.slab_cell
        return build_slab(nx, ny, nz, dx, dy, dz)
    with open(cfg.plate_file) as fh:
        doc = json.load(fh)
    cell = float(doc["cell_cm"]) / 100.0
    mask = np.asarray(doc["mask"], dtype=bool)
    thick = np.asarray(doc["thickness_cm"], dtype=float) / 100.0
    elev = np.asarray(doc.get("elevation_cm", np.zeros_like(thick)), dtype=float) / 100.0
    return build_heightfield_plate(mask, thick, elev, cell)


def _material(cfg: RunConfig):
    if cfg.material in matmod.PRESETS:
        return matmod.load_preset(cfg.material)
    return matmod.load_material_file(cfg.material)


def _default_c_omega(cfg: RunConfig) -> float:
    return 0.8 if cfg.body_kind == "slab" else 0.04


def _forcing_wave(cx: SimplicialComplex3, frequency: float, f0: float, sign: int) -> ForcingWave:
    # source 62 cm below the body on the vertical line through its center
    lo = cx.vertices.min(axis=0)
    hi = cx.vertices.max(axis=0)
    center = 0.5 * (lo + hi)
    source = np.array([center[0], lo[1] - 0.62, center[2]])
    return ForcingWave(amplitude=np.array([0.0, f0, 0.0]), direction=np.array([0.0, 1.0, 0.0]),
                       frequency=frequency, source=source, sign=sign)


def _census_text(label: str, cx: SimplicialComplex3, sub: SimplicialComplex3) -> str:
    def line(tag, c):
        return (f"{tag}: vertices={c.num_vertices} edges={c.num_edges} faces={c.num_faces} "
                f"tets={c.num_tets} boundary_faces={int(c.boundary_faces.sum())} "
                f"euler={c.euler_characteristic}\n")
    return f"body: {label}\n" + line("K ", cx) + line("K'", sub)


def cmd_mesh(cfg: RunConfig) -> int:
    cx = _build_body(cfg)
    sub = barycentric_subdivision(cx)
    text = _census_text(cfg.label, cx, sub)
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / f"{cfg.label}_mesh.json").write_text(cx.to_json())
    (cfg.out / f"{cfg.label}_census.txt").write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_assemble(cfg: RunConfig) -> int:
    cx = _build_body(cfg)
    tensor = _material(cfg)
    sub = barycentric_subdivision(cx)
    basis = WhitneyBasis(sub)
    idx = system_index(sub)
    mass = assemble_mass(sub, basis, rho=tensor.rho, index=idx)
    stiff = assemble_stiffness(sub, basis, tensor, index=idx)
    cmap = assemble_boundary_constraints(cx, sub, basis, tensor)
    mred, kred = reduce_system(mass, stiff, cmap, idx)
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_matrix_market(cfg.out / f"{cfg.label}_I.mtx", mass)
    write_matrix_market(cfg.out / f"{cfg.label}_K.mtx", stiff)
    write_matrix_market(cfg.out / f"{cfg.label}_I_red.mtx", mred)
    write_matrix_market(cfg.out / f"{cfg.label}_K_red.mtx", kred)
    write_matrix_market(cfg.out / f"{cfg.label}_C.mtx", cmap.c)
    census = cmap.rank_census()
    dim_b = idx.num_interior + len(cmap.boundary_free)
    text = (f"body: {cfg.label}\n"
            f"subsystems: {cmap.num_subsystems}\n"
            f"rank2: {census.get(2, 0)}\nrank1: {census.get(1, 0)}\nrank0: {census.get(0, 0)}\n"
            f"null_rows: {cmap.null_rows}\n"
            f"dim_constrained_basis: {dim_b}\n"
            f"mass_symmetry_residual: {mass.symmetry_residual():.3e}\n"
            f"stiffness_symmetry_residual: {stiff.symmetry_residual():.3e}\n"
            f"reduced_mass_symmetry_residual: {mred.symmetry_residual():.3e}\n"
            f"reduced_stiffness_symmetry_residual: {kred.symmetry_residual():.3e}\n")
    (cfg.out / f"{cfg.label}_constraints.txt").write_text(text)
    sys.stdout.write(text)
    return 0


@dataclass
class _System:
    cx: SimplicialComplex3
    sub: SimplicialComplex3
    basis: WhitneyBasis
    tensor: object
    idx: object
    mass: object
    stiff: object
    cmap: object
    mass_red: object
    stiff_red: object


def _assemble_all(cfg: RunConfig) -> _System:
    cx = _build_body(cfg)
    tensor = _material(cfg)
    sub = barycentric_subdivision(cx)
    basis = WhitneyBasis(sub)
    idx = system_index(sub)
    mass = assemble_mass(sub, basis, rho=tensor.rho, index=idx)
    stiff = assemble_stiffness(sub, basis, tensor, index=idx)
    cmap = assemble_boundary_constraints(cx, sub, basis, tensor)
    mred, kred = reduce_system(mass, stiff, cmap, idx)
    return _System(cx, sub, basis, tensor, idx, mass, stiff, cmap, mred, kred)


def _system_pair(s: _System, basis: str):
    if basis == "fine":
        return s.stiff_red, s.mass_red
    return s.stiff, s.mass


def _full_vector(s: _System, basis: str, coeffs: np.ndarray) -> np.ndarray:
    if basis == "fine":
        return expand_reduced(coeffs, s.idx, s.cmap, s.sub.num_faces)
    full = np.zeros(s.sub.num_faces)
    full[s.idx.face_order()] = coeffs
    return full


def cmd_eigs(cfg: RunConfig) -> int:
    s = _assemble_all(cfg)
    stiff, mass = _system_pair(s, cfg.basis)
    cfg.out.mkdir(parents=True, exist_ok=True)
    lines = [f"{'f':>8}{'f_r':>18}{'residual':>12}{'flux_t0':>16}"]
    for f in cfg.frequencies:
        sigma = -(2.0 * np.pi * f) ** 2
        pairs = eigs_near(stiff, mass, sigma, k=cfg.modes, seed=cfg.seed)
        best = pairs[0]
        fr = best.frequency
        fr_hz = fr.hertz if fr.hertz is not None else float("nan")
        flux = boundary_flux(s.sub, _full_vector(s, cfg.basis, best.vector))
        lines.append(f"{f:>8.1f}{fr_hz:>18.8f}{best.residual:>12.1e}{flux:>16.10f}")
        rows = np.stack([p.vector for p in pairs], axis=1)
        with open(cfg.out / f"{cfg.label}_{cfg.basis}_{f:g}Hz_modes.csv", "w") as fh:
            fh.write(",".join(f"lam_{p.eigenvalue!r}" for p in pairs) + "\n")
            for r in rows:
                fh.write(",".join(repr(float(v)) for v in r) + "\n")
    table = "\n".join(lines) + "\n"
    (cfg.out / f"{cfg.label}_{cfg.basis}_eigs.txt").write_text(table)
    sys.stdout.write(table)
    return 0


def cmd_resonate(cfg: RunConfig) -> int:
    s = _assemble_all(cfg)
    stiff, mass = _system_pair(s, cfg.basis)
    obs = observation_points(s.sub, np.array([0.0, 1.0, 0.0]),
                             min_cos=0.99 if cfg.body_kind == "slab" else 0.0)
    emat = evaluation_matrix(s.basis, obs)
    comegas = cfg.c_omega or (_default_c_omega(cfg),)
    cfg.out.mkdir(parents=True, exist_ok=True)
    rows = []
    for f in cfg.frequencies:
        wave_in = _forcing_wave(s.cx, f, cfg.f0, cfg.sign)
        c1, c2 = assemble_forcing(s.sub, s.basis, wave_in, s.idx)
        if cfg.basis == "fine":
            c1 = reduce_forcing(c1, s.idx, s.cmap)
            c2 = reduce_forcing(c2, s.idx, s.cmap)
        with open(cfg.out / f"{cfg.label}_{cfg.basis}_{f:g}Hz_forcing.csv", "w") as fh:
            fh.write("index,c1,c2\n")
            for i, (a, b) in enumerate(zip(c1, c2)):
                fh.write(f"{i},{float(a)!r},{float(b)!r}\n")
        sigma = -(2.0 * np.pi * f) ** 2
        pairs = eigs_near(stiff, mass, sigma, k=cfg.modes, seed=cfg.seed)
        wave = resonance_wave(f, pairs, c1, c2, stiff, mass, sign=cfg.sign,
                              basis=cfg.basis, index=s.idx, cmap=s.cmap,
                              num_faces=s.sub.num_faces)
        rep = sample_norms(wave, emat)
        for co in comegas:
            nr = nodal_points(obs, rep, co)
            suffix = f"_c{co:g}" if len(comegas) > 1 else ""
            (cfg.out / f"{cfg.label}_{cfg.basis}_{f:g}Hz_nodal{suffix}.csv").write_text(nodal_csv(nr))
            (cfg.out / f"{cfg.label}_{cfg.basis}_{f:g}Hz_chladni{suffix}.svg").write_text(chladni_svg(nr))
        worst = rep.worst_time_index
        cworst = wave.coefficients(float(rep.times[worst]))
        # normalize the wave snapshot to unit mass norm before taking its flux
        order = s.idx.face_order()
        mnorm = float(np.sqrt(cworst[order] @ (s.mass.mat @ cworst[order])))
        if mnorm > 0:
            cw = cworst / mnorm
            if cw[np.argmax(np.abs(cw))] < 0:
                cw = -cw
        else:
            cw = cworst
        fr_hz = pairs[0].frequency.hertz or float("nan")
        rows.append(FluxRow(body=cfg.label, basis=cfg.basis, frequency=f,
                            mode_frequency=fr_hz,
                            eigenvector_flux=boundary_flux(s.sub, _full_vector(s, cfg.basis, pairs[0].vector)),
                            wave_flux=boundary_flux(s.sub, cw),
                            worst_time_index=worst + 1))
    text = flux_report(rows)
    (cfg.out / f"{cfg.label}_{cfg.basis}_flux.txt").write_text(text)
    (cfg.out / f"{cfg.label}_{cfg.basis}_flux.csv").write_text(flux_report_csv(rows))
    sys.stdout.write(text)
    return 0


def cmd_flux(cfg: RunConfig) -> int:
    s = _assemble_all(cfg)
    obs = observation_points(s.sub, np.array([0.0, 1.0, 0.0]),
                             min_cos=0.99 if cfg.body_kind == "slab" else 0.0)
    emat = evaluation_matrix(s.basis, obs)
    cfg.out.mkdir(parents=True, exist_ok=True)
    rows = []
    for f in cfg.frequencies:
        for basis in ("coarse", "fine"):
            stiff, mass = _system_pair(s, basis)
            wave_in = _forcing_wave(s.cx, f, cfg.f0, cfg.sign)
            c1, c2 = assemble_forcing(s.sub, s.basis, wave_in, s.idx)
            if basis == "fine":
                c1 = reduce_forcing(c1, s.idx, s.cmap)
                c2 = reduce_forcing(c2, s.idx, s.cmap)
            sigma = -(2.0 * np.pi * f) ** 2
            pairs = eigs_near(stiff, mass, sigma, k=cfg.modes, seed=cfg.seed)
            wave = resonance_wave(f, pairs, c1, c2, stiff, mass, sign=cfg.sign,
                                  basis=basis, index=s.idx, cmap=s.cmap,
                                  num_faces=s.sub.num_faces)
            rep = sample_norms(wave, emat)
            worst = rep.worst_time_index
            cworst = wave.coefficients(float(rep.times[worst]))
            order = s.idx.face_order()
            mnorm = float(np.sqrt(cworst[order] @ (s.mass.mat @ cworst[order])))
            cw = cworst / mnorm if mnorm > 0 else cworst
            if mnorm > 0 and cw[np.argmax(np.abs(cw))] < 0:
                cw = -cw
            rows.append(FluxRow(body=cfg.label, basis=basis, frequency=f,
                                mode_frequency=pairs[0].frequency.hertz or float("nan"),
                                eigenvector_flux=boundary_flux(s.sub, _full_vector(s, basis, pairs[0].vector)),
                                wave_flux=boundary_flux(s.sub, cw),
                                worst_time_index=worst + 1))
    text = flux_report(rows)
    (cfg.out / f"{cfg.label}_flux_tables.txt").write_text(text)
    (cfg.out / f"{cfg.label}_flux_tables.csv").write_text(flux_report_csv(rows))
    sys.stdout.write(text)
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--slab", default="10x2x20", help="block counts NXxNYxNZ (default 10x2x20)")
    p.add_argument("--cell", default="1x0.5x1", help="block size in cm CXxCYxCZ (default 1x0.5x1)")
    p.add_argument("--plate", default=None, help="height-field plate JSON (overrides --slab)")
    p.add_argument("--label", default=None, help="output name stem")
    p.add_argument("--material", default="engelmann-spruce",
                   help="material preset name or JSON file (MPa + density)")
    p.add_argument("--out", default=None, help="output directory (or PLATEVIB_OUT)")
    p.add_argument("--seed", type=int, default=0, help="eigensolver start-vector seed")
    p.add_argument("--threads", type=int, default=None, help="BLAS thread count")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="platevib",
                                     description="Face-field plate vibration pipeline")
    subs = parser.add_subparsers(dest="command", required=True)

    p_mesh = subs.add_parser("mesh", help="build the body and report its census")
    p_asm = subs.add_parser("assemble", help="assemble mass/stiffness/constraints and export")
    p_eigs = subs.add_parser("eigs", help="shift-invert eigensolve near each frequency")
    p_res = subs.add_parser("resonate", help="forced resonance, nodal extraction, Chladni plot")
    p_flux = subs.add_parser("flux", help="flux diagnostics tables for both bases")
    for p in (p_mesh, p_asm, p_eigs, p_res, p_flux):
        _add_common(p)
    for p in (p_eigs, p_res, p_flux):
        p.add_argument("--freqs", default=",".join(f"{f:g}" for f in DEFAULT_FREQS),
                       help="comma-separated drive frequencies in Hz")
        p.add_argument("--modes", type=int, default=1, help="modes per frequency")
        p.add_argument("--f0", type=float, default=1.0, help="forcing amplitude")
        p.add_argument("--sign", choices=("-", "+"), default="-", help="wave branch sign")
    for p in (p_eigs, p_res):
        p.add_argument("--basis", choices=("coarse", "fine"), default="coarse")
    p_res.add_argument("--comega", default=None,
                       help="comma-separated nodal thresholds (default 0.8 slab, 0.04 plate)")

    args = parser.parse_args(argv)
    if args.threads:
        os.environ["OMP_NUM_THREADS"] = str(args.threads)
    try:
        cfg = _config(args)
        handler = {"mesh": cmd_mesh, "assemble": cmd_assemble, "eigs": cmd_eigs,
                   "resonate": cmd_resonate, "flux": cmd_flux}[args.command]
        return handler(cfg)
    except (MeshError, matmod.MaterialError, SolverError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
