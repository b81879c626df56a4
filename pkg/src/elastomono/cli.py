"""Command-line front end.

Every command writes its outputs plus ``manifest.json`` and a copy of the
scenario into ``--out``; ``elastomono rerun OUT/manifest.json --out NEW``
repeats the run from the manifest alone.

Exit codes: 0 ok, 2 input error, 3 resonance, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .fem import FemError, assemble
from .linsolve import FactorizationError, ResonanceSuspected, SolveError
from .materials import MaterialError
from .mesh import MeshError
from .monotonicity import MonotonicityError, SweepResult, alpha_variants, make_cover, sweep
from .ntd import NtDError, NtDMatrix, forward_solutions, ntd_matrix
from .reconstruct import reconstruct
from .scenario import Scenario, ScenarioError
from .spectral import compute_M0
from .vtkio import write_structured_points
from .verify import (
    MODERATE_CASE,
    convergence_study,
    oracle_report,
    patch_test,
    wavelengths,
    write_convergence_csv,
)

log = logging.getLogger("elastomono")

EXIT_OK, EXIT_INPUT, EXIT_RESONANCE, EXIT_NUMERICAL = 0, 2, 3, 4
INPUT_ERRORS = (ScenarioError, MeshError, MaterialError, MonotonicityError, FemError)
NUMERICAL_ERRORS = (FactorizationError, SolveError, NtDError)

# verification thresholds
ORDER_RANGE = (1.7, 2.3)
ORACLE_TOL = 1e-6
PATCH_TOL = 1e-10


class InputError(ValueError):
    pass


def _mtilde_arg(text: str):
    if text == "auto":
        return "auto"
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a nonnegative integer or 'auto'") from None
    if v < 0:
        raise argparse.ArgumentTypeError("expected a nonnegative integer or 'auto'")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", default="builtin:two_inclusions", help="scenario JSON path or builtin:NAME")
    common.add_argument("--omega", type=float, action="append", help="angular frequency in rad/s (repeatable)")
    common.add_argument("--mtilde", type=_mtilde_arg, help="threshold N or 'auto'")
    common.add_argument("--mesh-n", type=int, nargs="+", help="elements per axis (m0 accepts several)")
    common.add_argument("--patches", type=int, help="load patches per boundary edge")
    common.add_argument("--directions", choices=("normal", "full"))
    common.add_argument("--rel-tol", type=float, help="relative eigenvalue threshold")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="elastomono", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("forward", parents=[common], help="solve one load case, write displacement VTK")
    f.add_argument("--load-index", type=int, default=0)
    f.add_argument("--background", action="store_true", help="use the background field instead of the phantom")
    sub.add_parser("m0", parents=[common], help="tabulate M0 over frequencies and meshes")
    s = sub.add_parser("sweep", parents=[common], help="run the block tests, write eigencount and verdict CSVs")
    s.add_argument("--measured", help="NtD matrix CSV to use instead of simulating the phantom")
    r = sub.add_parser("reconstruct", parents=[common], help="voxel mask from a sweep directory")
    r.add_argument("--sweep", required=True, help="directory written by 'sweep'")
    sub.add_parser("verify", parents=[common], help="convergence study and oracle report")
    rr = sub.add_parser("rerun", help="repeat a run from its manifest")
    rr.add_argument("manifest")
    rr.add_argument("--out", required=True)
    return p


# -- helpers -----------------------------------------------------------------


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _one(values, default, name):
    if not values:
        return default
    if len(values) > 1:
        raise InputError(f"{name} takes a single value for this command")
    return values[0]


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _versions() -> dict:
    return {
        "elastomono": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


class Run:
    """Output directory plus the manifest being filled in."""

    def __init__(self, args, argv, scenario: Scenario):
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.scenario = scenario
        (self.out / "scenario.json").write_text(scenario.text)
        self.manifest = {
            "command": args.command,
            "argv": list(argv),
            "scenario": {"source": scenario.source, "sha256": _sha256(scenario.text), "content": scenario.data},
            "parameters": {},
            "fingerprints": {},
            "outputs": [],
            "versions": _versions(),
        }

    def param(self, **kw):
        self.manifest["parameters"].update(kw)

    def fingerprint(self, **kw):
        self.manifest["fingerprints"].update(kw)

    def output(self, name: str) -> Path:
        self.manifest["outputs"].append(name)
        return self.out / name

    def close(self, status: str = "ok"):
        self.manifest["status"] = status
        _write_json(self.out / "manifest.json", self.manifest)


def _setup(args, argv) -> Run:
    sc = Scenario.load(args.scenario)
    return Run(args, argv, sc)


def _rel_tol(args, sc):
    return args.rel_tol if args.rel_tol is not None else sc.rel_tol


# -- commands ----------------------------------------------------------------


def cmd_forward(args, run: Run) -> int:
    sc = run.scenario
    omega = _one(args.omega, sc.omegas[0], "--omega")
    mesh = sc.build_mesh(_one(args.mesh_n, None, "--mesh-n"))
    loads = sc.load_set(mesh, args.patches, args.directions)
    if not 0 <= args.load_index < loads.m:
        raise InputError(f"--load-index must lie in [0, {loads.m})")
    field = sc.background_field(mesh) if args.background else sc.true_field(mesh)
    system = assemble(mesh, field)
    run.param(omega=omega, mesh_n=mesh.n_axis, load_index=args.load_index, load_label=loads.labels[args.load_index],
              background_only=args.background, zero_pivot_tol=sc.zero_pivot_tol)
    run.fingerprint(mesh=mesh.fingerprint(), field=field.fingerprint(), loads=loads.fingerprint())
    single = type(loads)((loads.loads[args.load_index],), loads.mesh_fingerprint)
    _, U = forward_solutions(system, single, omega, sc.zero_pivot_tol)
    u = system.expand(U[:, 0]).reshape(-1, 3)
    meta = mesh.vtk_metadata()
    write_structured_points(run.output("displacement.vtk"), meta["dimensions"], meta["spacing"], meta["origin"],
                            point_vectors={"displacement": u},
                            title=f"displacement omega={omega!r} load={loads.labels[args.load_index]}")
    log.info("max |u| = %.4e m", float(np.max(np.linalg.norm(u, axis=1))))
    return EXIT_OK


def cmd_m0(args, run: Run) -> int:
    sc = run.scenario
    omegas = sorted(args.omega or sc.omegas)
    meshes = args.mesh_n or [sc.mesh_n]
    run.param(omegas=omegas, mesh_n=meshes, reference_density=sc.reference_density, zero_pivot_tol=sc.zero_pivot_tol)
    rows = []
    for n in meshes:
        mesh = sc.build_mesh(n)
        system = assemble(mesh, sc.reference_field(mesh))
        for w in omegas:
            res = compute_M0(system, w, sc.zero_pivot_tol)
            if res.flagged:
                log.warning("n=%d omega=%g: %d zero pivots (omega^2 is near an eigenvalue)", n, w, res.n_zero)
            log.info("n=%d omega=%g M0=%d", n, w, res.m0)
            rows.append([n, repr(w), res.m0, res.n_zero, int(res.flagged), sc.mtilde_for(w)])
    with run.output("m0.csv").open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["mesh_n", "omega", "M0", "n_zero", "flagged", "mtilde"])
        for r in rows:
            wr.writerow(["" if x is None else x for x in r])
    return EXIT_OK


def cmd_sweep(args, run: Run) -> int:
    sc = run.scenario
    omega = _one(args.omega, sc.omegas[0], "--omega")
    mesh = sc.build_mesh(_one(args.mesh_n, None, "--mesh-n"))
    loads = sc.load_set(mesh, args.patches, args.directions)
    rel_tol = _rel_tol(args, sc)
    m_tilde = args.mtilde if args.mtilde is not None else sc.mtilde_for(omega)
    if m_tilde is None:
        m_tilde = "auto"

    if args.measured:
        measured = NtDMatrix.from_csv(args.measured)
        if measured.loadset_fingerprint != loads.fingerprint():
            raise InputError("measured NtD matrix does not match the scenario's load set")
    else:
        truth = sc.true_field(mesh)
        measured = ntd_matrix(assemble(mesh, truth), loads, omega, zero_tol=sc.zero_pivot_tol)
        run.fingerprint(true_field=truth.fingerprint())
    measured.to_csv(run.output("ntd_measured.csv"))
    run.manifest["outputs"].append("ntd_measured.json")

    m0 = compute_M0(assemble(mesh, sc.reference_field(mesh)), omega, sc.zero_pivot_tol)
    cover = make_cover(mesh, sc.blocks_per_axis, sc.alpha)
    variants = alpha_variants(sc.alpha, sc.alpha_subsets)
    run.param(omega=omega, mesh_n=mesh.n_axis, patches=loads.m, mtilde=m_tilde, rel_tol=rel_tol,
              zero_pivot_tol=sc.zero_pivot_tol, threads=args.threads, alpha_variants=variants,
              blocks_per_axis=sc.blocks_per_axis, m0=m0.m0)
    run.fingerprint(mesh=mesh.fingerprint(), loads=loads.fingerprint(), measured_field=measured.field_fingerprint)

    result = sweep(measured, cover, variants, omega, m_tilde, mesh, loads, sc.background_values,
                   rel_tol=rel_tol, zero_tol=sc.zero_pivot_tol, threads=args.threads, m0=m0.m0)
    if result.suggestion is not None:
        log.warning("auto M~ = %d from gap %s (separated=%s)", result.suggestion.value, result.suggestion.gap,
                    result.suggestion.separated)
    if result.m_tilde is not None and result.m_tilde > m0.m0:
        log.warning("M~ = %d exceeds M0 = %d", result.m_tilde, m0.m0)
    result.write_eigencount_csv(run.output("eigencounts.csv"))
    result.write_verdict_csv(run.output("verdicts.csv"))
    _write_json(run.output("sweep.json"), result.to_dict())
    failed = sum(not v.valid for v in result.verdicts)
    log.info("inside blocks: %s (M~=%s, M0=%d, %d failed)", result.inside_indices(), result.m_tilde, m0.m0, failed)
    return EXIT_OK


def cmd_reconstruct(args, run: Run) -> int:
    path = Path(args.sweep) / "sweep.json"
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    m_tilde = args.mtilde if isinstance(args.mtilde, int) else None
    result = SweepResult.from_dict(data, m_tilde)
    if result.m_tilde is None:
        raise InputError("sweep has no threshold; pass --mtilde N")
    mask = reconstruct(result)
    sc = run.scenario
    edge = sc.data["domain"]["edge_length"] / np.asarray(result.blocks_per_axis)
    run.param(sweep=str(path), sweep_sha256=_sha256(path.read_text()), mtilde=result.m_tilde)
    mask.write_vtk(run.output("mask.vtk"), block_size=tuple(edge))
    mask.write_csv(run.output("mask_blocks.csv"))
    _write_json(run.output("reconstruction.json"), {
        "blocks_per_axis": list(result.blocks_per_axis),
        "mtilde": result.m_tilde,
        "raw_inside": result.inside_indices(),
        "filled_inside": mask.block_indices(),
    })
    log.info("reconstructed %d blocks", len(mask.block_indices()))
    return EXIT_OK


def cmd_verify(args, run: Run) -> int:
    sc = run.scenario
    ns = args.mesh_n or [4, 8, 16]
    rows = convergence_study(MODERATE_CASE, ns)
    write_convergence_csv(rows, run.output("convergence.csv"))
    orders = [r.order for r in rows if r.order is not None]
    oracle = oracle_report(MODERATE_CASE)
    patch = patch_test(*sc.background_values[:2])
    lam, mu, rho = sc.background_values
    waves = {repr(w): dict(zip(("p", "s"), wavelengths(lam, mu, rho, w))) for w in sc.omegas if w > 0}
    checks = {
        "convergence_order": bool(orders) and all(ORDER_RANGE[0] <= o <= ORDER_RANGE[1] for o in orders),
        "fd_oracle": oracle["max_rel_diff"] <= ORACLE_TOL,
        "patch_test": patch <= PATCH_TOL,
    }
    run.param(mesh_n=ns, case=dataclasses.asdict(MODERATE_CASE),
              order_range=ORDER_RANGE, oracle_tol=ORACLE_TOL, patch_tol=PATCH_TOL)
    _write_json(run.output("verify.json"), {
        "convergence": [{"n": r.n, "h": r.h, "l2_error": r.error, "order": r.order} for r in rows],
        "fd_oracle": oracle,
        "patch_test_max_rel_error": patch,
        "wavelengths_m": waves,
        "checks": checks,
    })
    for name, ok in checks.items():
        log.info("%-18s %s", name, "PASS" if ok else "FAIL")
    return EXIT_OK if all(checks.values()) else EXIT_NUMERICAL


COMMANDS = {
    "forward": cmd_forward,
    "m0": cmd_m0,
    "sweep": cmd_sweep,
    "reconstruct": cmd_reconstruct,
    "verify": cmd_verify,
}


def _rerun(args) -> int:
    try:
        manifest = json.loads(Path(args.manifest).read_text())
        argv = list(manifest["argv"])
        text = (Path(args.manifest).parent / "scenario.json").read_text()
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: cannot use manifest {args.manifest}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if _sha256(text) != manifest["scenario"]["sha256"]:
        print("error: scenario copy next to the manifest does not match its hash", file=sys.stderr)
        return EXIT_INPUT
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "source_scenario.json").write_text(text)
    argv = _replace_flag(argv, "--scenario", str(out / "source_scenario.json"))
    argv = _replace_flag(argv, "--out", str(out))
    return main(argv)


def _replace_flag(argv: list[str], flag: str, value: str) -> list[str]:
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == flag:
            skip = True
            continue
        if a.startswith(flag + "="):
            continue
        out.append(a)
    return out + [flag, value]


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if args.command == "rerun":
        return _rerun(args)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    run = None
    try:
        run = _setup(args, argv)
        code = COMMANDS[args.command](args, run)
        run.close("ok" if code == EXIT_OK else "failed")
        return code
    except (InputError, *INPUT_ERRORS) as exc:
        print(f"error: {exc}", file=sys.stderr)
        code, status = EXIT_INPUT, "input error"
    except ResonanceSuspected as exc:
        print(f"resonance: {exc}", file=sys.stderr)
        code, status = EXIT_RESONANCE, "resonance"
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        code, status = EXIT_NUMERICAL, "numerical failure"
    if run is not None:
        run.close(status)
    return code


if __name__ == "__main__":
    sys.exit(main())
