"""Command-line front end.

Subcommands: validate, simulate, oracle, moments, compare, export.
Exit codes: 0 ok, 1 check failed, 2 usage or configuration error,
3 runtime abort (blow-up guard).  Diagnostics are CSV with floats printed at
17 significant digits, which round-trips float64 exactly; binary snapshots
use the QDSG format.  Runs are deterministic for a given config and seed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import fock as fk
from .configio import (
    ConfigError,
    SimulationDocument,
    apply_overrides,
    parse_simulation_document,
)
from .grids import SpatialGrid
from .hartree import solve_poisson
from .model import (
    DiffusionForm,
    InvalidDiffusionError,
    LindbladModel,
    check_lindblad_condition,
    diffusion_to_lindblad,
    lindblad_to_diffusion,
)
from .propagator import BlowUpError, SimulationPlan, simulate, wigner_moments
from .snapshots import read_wigner, write_array, write_wigner
from .states import (
    DensityState,
    WignerGrid,
    coherent_state,
    harmonic_ground_state,
    particle_density,
    random_mixed_state,
    wigner_transform,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_ABORT = 3


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_csv(path: Path, header: list[str], rows: list[list[float]]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _load_document(args) -> SimulationDocument:
    if sys.version_info >= (3, 11):
        import tomllib
    else:
        import tomli as tomllib
    try:
        doc = tomllib.loads(Path(args.config).read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error: {exc}") from exc
    if getattr(args, "set", None):
        doc = apply_overrides(doc, args.set)
    return parse_simulation_document(doc)


def _build_grid(doc: SimulationDocument) -> SpatialGrid:
    grid = doc.grid
    if not grid:
        raise ConfigError("[grid] section with points and extent is required")
    for key in ("points", "extent"):
        if key not in grid:
            raise ConfigError(f"[grid] missing '{key}'")
    return SpatialGrid(dim=doc.model_doc.dimension, points=int(grid["points"]),
                       extent=float(grid["extent"]))


def _build_initial(doc: SimulationDocument, grid: SpatialGrid,
                   seed: int) -> DensityState | WignerGrid:
    init = doc.initial or {"type": "ground"}
    kind = init.get("type", "ground")
    d = grid.dim
    if kind == "ground":
        return harmonic_ground_state(grid)
    if kind == "coherent":
        center = init.get("center", [0.0] * (2 * d))
        if len(center) != 2 * d:
            raise ConfigError("[initial] center needs 2*d entries (x..., xi...)")
        return coherent_state(grid, center[:d], center[d:])
    if kind == "mixture":
        comps = init.get("components")
        if not comps:
            raise ConfigError("[initial] mixture needs 'components'")
        weights = []
        vectors = []
        for comp in comps:
            center = comp.get("center", [0.0] * (2 * d))
            state = coherent_state(grid, center[:d], center[d:])
            weights.append(float(comp.get("weight", 1.0)))
            vectors.append(state.vectors[0])
        weights = np.asarray(weights)
        weights = weights / weights.sum()
        return DensityState(grid=grid, weights=weights, vectors=np.stack(vectors))
    if kind == "random":
        rng = np.random.default_rng(seed)
        return random_mixed_state(grid, int(init.get("rank", 3)), rng,
                                  width=float(init.get("width", 0.7)))
    if kind == "snapshot":
        if "path" not in init:
            raise ConfigError("[initial] snapshot needs 'path'")
        w = read_wigner(init["path"])
        if w.grid_x.points != grid.points or abs(
            w.grid_x.extent - grid.extent
        ) > 1e-12 * grid.extent or w.grid_x.dim != grid.dim:
            raise ConfigError(
                "snapshot grid does not match the [grid] section "
                f"({w.grid_x.points} pts, L={w.grid_x.extent} vs "
                f"{grid.points} pts, L={grid.extent})"
            )
        return w
    raise ConfigError(f"[initial] unknown type {kind!r}")


def _build_plan(doc: SimulationDocument, initial, run: dict) -> SimulationPlan:
    for key in ("t_end", "dt"):
        if key not in run:
            raise ConfigError(f"[run] missing '{key}'")
    return SimulationPlan(
        model=doc.model_doc.model,
        initial=initial,
        t_end=float(run["t_end"]),
        dt=float(run["dt"]),
        splitting=run.get("splitting", "strang"),
        hartree=doc.model_doc.hartree,
        diagnostics_every=int(run.get("diagnostics_every", 10)),
        snapshot_every=int(run.get("snapshot_every", 0)),
        track_positivity=bool(run.get("track_positivity", False)),
        confinement=doc.model_doc.confinement,
        v1=doc.model_doc.v1,
    )


def _diffusion_of(doc: SimulationDocument) -> DiffusionForm:
    model = doc.model_doc.model
    if isinstance(model, DiffusionForm):
        return model
    return lindblad_to_diffusion(model, warn_mu_mismatch=False)


def _trajectory_rows(traj) -> list[list[float]]:
    trace0 = traj.reports[0].trace
    rows = []
    for rep in traj.reports:
        drift = (rep.trace - trace0) / trace0 if trace0 else float("nan")
        rows.append([rep.time, rep.trace, rep.min_eig, rep.ekin, rep.eext,
                     rep.esc, rep.etot, drift])
    return rows


_CSV_HEADER = ["t", "trace", "min_eig", "ekin", "eext", "esc", "etot", "mass_drift"]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    doc = _load_document(args)
    form = _diffusion_of(doc)
    report = check_lindblad_condition(form)
    verdict = "valid" if report.valid else "invalid"
    print(f"margin = {_fmt(report.margin)}")
    print(f"verdict: {verdict} (Lindblad condition Dpp*Dqq - Dpq^2 >= eta^2/4, "
          "Dpp, Dqq >= 0)")
    for msg in report.messages:
        print(f"  {msg}")
    return EXIT_OK if report.valid else EXIT_CHECK_FAILED


def cmd_simulate(args) -> int:
    doc = _load_document(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = _build_grid(doc)
    run = doc.run
    seed = int(args.seed if args.seed is not None else run.get("seed", 0))
    initial = _build_initial(doc, grid, seed)
    plan = _build_plan(doc, initial, run)
    try:
        traj = simulate(plan)
    except BlowUpError as exc:
        print(f"ABORT: {exc}", file=sys.stderr)
        _write_csv(out_dir / "diagnostics.csv", _CSV_HEADER,
                   _trajectory_rows(exc.trajectory))
        write_wigner(out_dir / "last_good.qdsg", exc.last_good)
        return EXIT_ABORT
    _write_csv(out_dir / "diagnostics.csv", _CSV_HEADER, _trajectory_rows(traj))
    for t, snap in traj.snapshots:
        write_wigner(out_dir / f"wigner_t{t:011.6f}.qdsg", snap)
    if plan.snapshot_every:
        write_wigner(out_dir / "wigner_final.qdsg", traj.final)
    first, last = traj.reports[0], traj.reports[-1]
    drift = (last.trace - first.trace) / first.trace
    print(f"steps:          {int(round(plan.t_end / plan.dt))}")
    print(f"final time:     {_fmt(last.time)}")
    print(f"mass drift:     {_fmt(drift)}")
    print(f"E_kin:          {_fmt(last.ekin)}")
    print(f"E_ext:          {_fmt(last.eext)}")
    print(f"E_sc:           {_fmt(last.esc)}")
    print(f"E_tot:          {_fmt(last.etot)} (t=0: {_fmt(first.etot)})")
    return EXIT_OK


def cmd_oracle(args) -> int:
    doc = _load_document(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    oracle = doc.oracle
    levels = int(oracle.get("levels", 32))
    t_end = float(oracle.get("time", 1.0))
    cp_tol = float(oracle.get("cp_tolerance", 1e-8))
    center = oracle.get("initial_center", [1.0, 0.0])
    form = _diffusion_of(doc)
    condition = check_lindblad_condition(form)
    model = doc.model_doc.model
    if isinstance(model, DiffusionForm):
        base = LindbladModel(d=model.d, coeffs=[], mu=0.0,
                             confinement=doc.model_doc.confinement,
                             v1=doc.model_doc.v1)
        fock = fk.build_fock(base, levels)
        gen = fk.build_diffusion_generator(model, fock)
    else:
        fock = fk.build_fock(model, levels)
        gen = fk.build_generator(fock)
    rho0 = fk.coherent_fock_state(levels, float(center[0]), float(center[1]))
    rho_t = fk.propagate(gen, rho0, t_end)
    trace_drift = abs(float(np.trace(rho_t).real) - 1.0)
    min_rho_eig = float(np.linalg.eigvalsh(0.5 * (rho_t + rho_t.conj().T))[0])
    is_cp, min_choi = fk.choi_cp_check(gen, min(t_end, 0.1), tol=cp_tol)
    rows = [
        ["trace_drift", trace_drift, 1e-11, float(trace_drift <= 1e-11)],
        ["min_state_eig", min_rho_eig, -1e-10,
         float(min_rho_eig >= -1e-10 or not condition.valid)],
        ["min_choi_eig", min_choi, 0.0, float(is_cp == condition.valid)],
    ]
    lines = ["check,value,threshold,pass"]
    for name, value, thr, ok in rows:
        lines.append(f"{name},{_fmt(value)},{_fmt(thr)},{int(ok)}")
    (out_dir / "oracle_report.csv").write_text("\n".join(lines) + "\n")
    print(f"condition margin:    {_fmt(condition.margin)} "
          f"({'valid' if condition.valid else 'invalid'})")
    print(f"trace drift:         {_fmt(trace_drift)}")
    print(f"min state eig:       {_fmt(min_rho_eig)}")
    print(f"CP verdict:          {is_cp} (min Choi eig {_fmt(min_choi)})")
    all_ok = all(row[3] for row in rows)
    print("oracle checks:", "PASS" if all_ok else "FAIL")
    return EXIT_OK if all_ok else EXIT_CHECK_FAILED


def cmd_moments(args) -> int:
    doc = _load_document(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    run = doc.run
    t_end = float(run.get("t_end", 1.0))
    dt = float(run.get("dt", 1e-3))
    model = doc.model_doc.model
    if isinstance(model, DiffusionForm):
        model = diffusion_to_lindblad(model)
        model.confinement = doc.model_doc.confinement
    system = fk.moment_odes(model)
    center = doc.oracle.get("initial_center", [1.0, 0.0])
    levels = int(doc.oracle.get("levels", 24))
    fock = fk.build_fock(model, levels)
    rho0 = fk.coherent_fock_state(levels, float(center[0]), float(center[1]))
    times, vals = system.integrate(fk.fock_moments(rho0, fock), t_end, dt / 10.0)
    header = ["t", "trace", "mean_x", "mean_d_im", "ekin", "eext", "cross"]
    rows = []
    stride = max(1, len(times) // 2000)
    for i in range(0, len(times), stride):
        cross = float((1j * (0.5 * vals[i, 0] + vals[i, 5])).real)
        rows.append([times[i], vals[i, 0].real, vals[i, 1].real,
                     vals[i, 2].imag, vals[i, 3].real, vals[i, 4].real, -cross])
    _write_csv(out_dir / "moments.csv", header, rows)
    resid = system.imag_residual()
    print(f"imaginary residual: {_fmt(resid)}")
    print(f"final E_kin: {_fmt(vals[-1, 3].real)}  E_ext: {_fmt(vals[-1, 4].real)}")
    if resid > 1e-10:
        print("WARNING: moments acquired imaginary parts above 1e-10",
              file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_compare(args) -> int:
    doc = _load_document(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if doc.model_doc.hartree:
        print("compare: oracle undefined for Hartree models", file=sys.stderr)
        return EXIT_USAGE
    grid = _build_grid(doc)
    run = doc.run
    comp = doc.compare
    initial = doc.initial or {"type": "coherent", "center": [1.0, 0.5]}
    if initial.get("type") != "coherent":
        print("compare: initial state must be 'coherent' (Fock-representable)",
              file=sys.stderr)
        return EXIT_USAGE
    center = initial.get("center", [1.0, 0.5])
    seed = int(args.seed if args.seed is not None else run.get("seed", 0))
    state = _build_initial(doc, grid, seed)
    plan = _build_plan(doc, state, run)
    levels = int(comp.get("fock_levels", 32))
    tol_linf = float(comp.get("tolerance_linf", 1e-4))
    tol_mom = float(comp.get("tolerance_moments", 1e-4))
    sample_every = int(comp.get("sample_every", max(1, plan.diagnostics_every)))

    model = doc.model_doc.model
    if isinstance(model, DiffusionForm):
        base = LindbladModel(d=model.d, coeffs=[], mu=0.0,
                             confinement=doc.model_doc.confinement,
                             v1=doc.model_doc.v1)
        fock = fk.build_fock(base, levels)
        gen = fk.build_diffusion_generator(model, fock)
    else:
        try:
            lindblad_to_diffusion(model, warn_mu_mismatch=False)
        except ValueError as exc:
            print(f"compare: {exc}", file=sys.stderr)
            return EXIT_USAGE
        fock = fk.build_fock(model, levels)
        gen = fk.build_generator(fock)

    plan.diagnostics_every = sample_every
    plan.snapshot_every = sample_every
    traj = simulate(plan)
    d = grid.dim
    rho_f = fk.coherent_fock_state(levels, float(center[0]), float(center[d]))
    rows = []
    worst_linf = 0.0
    worst_mom = 0.0
    prev_t = 0.0
    step_mat = None
    step_dt = None
    for t, snap in traj.snapshots:
        if t > prev_t:
            if step_dt is None or abs((t - prev_t) - step_dt) > 1e-12:
                step_dt = t - prev_t
                step_mat = fk.propagator_matrix(gen, step_dt)
            rho_f = (step_mat @ rho_f.reshape(-1, order="F")).reshape(
                fock.dim, fock.dim, order="F")
            prev_t = t
        w_oracle = wigner_transform(fk.fock_to_position(rho_f, fock, grid))
        linf = float(np.max(np.abs(snap.values - w_oracle.values)))
        worst_linf = max(worst_linf, linf)
        mom_p = wigner_moments(snap, t)
        mom_o = wigner_moments(w_oracle, t)
        mom_diff = max(
            abs(mom_p.mass - mom_o.mass),
            abs(mom_p.ekin - mom_o.ekin),
            abs(mom_p.eext - mom_o.eext),
            float(np.max(np.abs(mom_p.mean_x - mom_o.mean_x))),
            float(np.max(np.abs(mom_p.mean_xi - mom_o.mean_xi))),
        )
        worst_mom = max(worst_mom, mom_diff)
        rows.append([t, linf, mom_diff])
    _write_csv(out_dir / "compare.csv", ["t", "wigner_linf", "moment_diff"], rows)
    print(f"max Wigner L-inf discrepancy: {_fmt(worst_linf)} (tolerance {tol_linf})")
    print(f"max moment discrepancy:       {_fmt(worst_mom)} (tolerance {tol_mom})")
    ok = worst_linf <= tol_linf and worst_mom <= tol_mom
    print("compare:", "PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_export(args) -> int:
    doc = _load_document(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = _build_grid(doc)
    seed = int(args.seed if args.seed is not None else doc.run.get("seed", 0))
    initial = _build_initial(doc, grid, seed)
    w = initial if isinstance(initial, WignerGrid) else wigner_transform(initial)
    write_wigner(out_dir / "wigner_initial.qdsg", w)
    if isinstance(initial, WignerGrid):
        dens = initial.values.sum(axis=tuple(range(grid.dim, 2 * grid.dim))) \
            * initial.grid_xi.cell_volume
    else:
        dens = particle_density(initial)
    write_array(out_dir / "density_initial.qdsg", dens, (grid.extent,) * grid.dim)
    pot = np.zeros(grid.shape)
    if doc.model_doc.confinement:
        pot += 0.5 * grid.radius_squared()
    if doc.model_doc.v1 is not None:
        pot += doc.model_doc.v1.evaluate(*grid.meshgrid())
    if doc.model_doc.hartree:
        pot += solve_poisson(dens, grid)
    write_array(out_dir / "potential_static.qdsg", pot, (grid.extent,) * grid.dim)
    print(f"wrote {out_dir}/wigner_initial.qdsg, density_initial.qdsg, "
          "potential_static.qdsg")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qdslab",
        description="Quasifree Lindblad / Wigner-Fokker-Planck-Poisson laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("validate", cmd_validate), ("simulate", cmd_simulate),
                     ("oracle", cmd_oracle), ("moments", cmd_moments),
                     ("compare", cmd_compare), ("export", cmd_export)):
        p = sub.add_parser(name)
        p.add_argument("config", help="TOML configuration file")
        if name != "validate":
            p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--set", action="append", default=[],
                       metavar="KEY=VALUE", help="dotted-key config override")
        p.add_argument("--seed", type=int, default=None,
                       help="seed for randomized test-state generation")
        p.set_defaults(func=fn)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0,) else 0
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidDiffusionError as exc:
        print(f"invalid model: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
