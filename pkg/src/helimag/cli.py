"""Command-line front end wiring the pipeline.

Exit codes: 0 success, 1 validation failure (arguments, schemas, invalid
meshes), 2 numerical failure (bond-angle overflow, line-search stall,
failed sweep rows).  All structured IO is JSON, tables are CSV, images are
SVG.  Outputs are deterministic; the --deterministic flag is accepted for
symmetry (fixed-order summation is always on) and --threads is validated
but the implementation is single-process.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .chirality import transform, vorticity
from .continuum import MeshPotential, build_example, classify_triple, jump_set, \
    limit_energy, mesh_to_svg, total_variations, validate_mesh
from .energy import energy_H, mm_decomposition, rho
from .lattice import Domain, ModelParams, SpinField
from .optimize import MinimizeOptions, chain_bc, log_to_csv, minimize_H, profile_init
from .recovery import Kernel, SweepSchedule, build_recovery, gamma_sweep, \
    profile_transition_energy

COMMANDS = (
    "groundstate",
    "energy",
    "transform",
    "classify",
    "recover",
    "sweep",
    "minimize",
    "profile1d",
    "selftest",
)

_PAIRS = {"++": (1, 1), "+-": (1, -1), "-+": (-1, 1), "--": (-1, -1)}


class ValidationError(Exception):
    pass


class NumericalError(Exception):
    pass


def canonical_json(config: dict) -> str:
    """Canonical serialization of a run configuration (round-trip stable)."""
    return json.dumps(config, sort_keys=True)


def _outdir(config: dict) -> Path:
    out = Path(config.get("out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _params(config: dict) -> ModelParams:
    try:
        return ModelParams(lam=float(config["lambda"]), delta=float(config["delta"]))
    except (KeyError, ValueError, TypeError) as exc:
        raise ValidationError(f"bad model parameters: {exc}") from exc


def _load_mesh(config: dict) -> MeshPotential:
    if "mesh" in config and config["mesh"]:
        try:
            return MeshPotential.from_json(Path(config["mesh"]).read_text())
        except (OSError, KeyError, ValueError) as exc:
            raise ValidationError(f"cannot load mesh: {exc}") from exc
    kind = config.get("kind")
    if not kind:
        raise ValidationError("either a mesh file or a built-in kind is required")
    try:
        return build_example(kind, n=int(config.get("n_walls", 3)))
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc


def _cmd_groundstate(config: dict) -> dict:
    pair = config.get("pair", "++")
    if pair not in _PAIRS:
        raise ValidationError(f"pair must be one of {sorted(_PAIRS)}")
    p = _params(config)
    n = int(config.get("n", 64))
    if n < 2:
        raise ValidationError("n must be at least 2")
    wsgn, zsgn = _PAIRS[pair]
    jj, ii = np.mgrid[0:n, 0:n]
    psi = p.helix_angle * (wsgn * ii + zsgn * jj)
    u = SpinField.from_angles(psi, p.lam)
    path = _outdir(config) / "groundstate.json"
    path.write_text(u.to_json())
    return {"written": str(path), "pair": pair}


def _read_spin(config: dict) -> SpinField:
    try:
        return SpinField.from_json(Path(config["in"]).read_text())
    except (KeyError, OSError, ValueError) as exc:
        raise ValidationError(f"cannot load spin field: {exc}") from exc


def _cmd_energy(config: dict) -> dict:
    u = _read_spin(config)
    p = ModelParams(lam=u.spacing, delta=float(config["delta"]))
    dom = Domain(width=u.nx * u.spacing, height=u.ny * u.spacing)
    rep = energy_H(u, dom, p)
    dec = mm_decomposition(u, dom, p)
    out = _outdir(config)
    doc = {"direct": json.loads(rep.to_json()), "decomposition": json.loads(dec.to_json())}
    path = out / "energy.json"
    path.write_text(json.dumps(doc))
    if config.get("format") == "csv":
        from .energy import CSV_HEADER

        (out / "energy.csv").write_text(CSV_HEADER + "\n" + dec.csv_row(p) + "\n")
    return {"written": str(path), "total": rep.total}


def _cmd_transform(config: dict) -> dict:
    u = _read_spin(config)
    p = ModelParams(lam=u.spacing, delta=float(config["delta"]))
    theta, pair = transform(u, p)
    try:
        vort = vorticity(theta)
    except ValueError as exc:
        raise NumericalError(str(exc)) from exc
    out = _outdir(config)
    (out / "chirality.json").write_text(pair.to_json())
    (out / "vorticity.json").write_text(vort.to_json())
    return {
        "written": [str(out / "chirality.json"), str(out / "vorticity.json")],
        "vortex_count": int(np.count_nonzero(vort.values)),
    }


def _cmd_classify(config: dict) -> dict:
    m = _load_mesh(config)
    try:
        validate_mesh(m)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    segs = jump_set(m)
    tvs = total_variations(m)
    doc = {
        "segments": [
            {
                "p": list(s.p),
                "q": list(s.q),
                "nu": list(s.nu),
                "plus": list(s.plus),
                "minus": list(s.minus),
                "length": s.length,
                "class": classify_triple(s.plus, s.minus, s.nu),
            }
            for s in segs
        ],
        "total_variations": {
            "D1w": tvs[0], "D2w": tvs[1], "D1z": tvs[2], "D2z": tvs[3]
        },
        "limit_energy": limit_energy(m),
    }
    out = _outdir(config)
    path = out / "classify.json"
    path.write_text(json.dumps(doc))
    if config.get("format") == "svg":
        (out / "mesh.svg").write_text(mesh_to_svg(m))
    return {"written": str(path), "limit_energy": doc["limit_energy"]}


def _cmd_recover(config: dict) -> dict:
    m = _load_mesh(config)
    p = _params(config)
    res = build_recovery(m, p, kernel=Kernel())
    out = _outdir(config)
    (out / "recovery_spin.json").write_text(res.spin.to_json())
    (out / "recovery_chirality.json").write_text(res.pair.to_json())
    (out / "recovery_energy.json").write_text(res.report.to_json())
    if res.overflow_count > 0:
        raise NumericalError(
            f"bond-angle overflow on {res.overflow_count} bonds "
            f"(epsilon too large for this mesh)"
        )
    return {"H_n": res.report.total, "overflow_count": res.overflow_count}


def _schedule(config: dict) -> SweepSchedule:
    spec = config.get("schedule", "default")
    if spec == "default":
        return SweepSchedule.default(
            finest_n=int(config.get("finest_n", 256)),
            levels=int(config.get("levels", 4)),
        )
    try:
        steps = json.loads(Path(spec).read_text())
        return SweepSchedule(
            steps=[ModelParams(lam=float(a), delta=float(b)) for a, b in steps]
        )
    except (OSError, ValueError, TypeError) as exc:
        raise ValidationError(f"bad schedule: {exc}") from exc


def _cmd_sweep(config: dict) -> dict:
    m = _load_mesh(config)
    sched = _schedule(config)
    table = gamma_sweep(m, sched, kernel=Kernel())
    out = _outdir(config)
    path = out / "sweep.csv"
    path.write_text(table.to_csv())
    if any(r.failed for r in table.rows):
        raise NumericalError("one or more sweep rows failed; see " + str(path))
    return {"written": str(path), "final_ratio": table.rows[-1].ratio}


def _cmd_minimize(config: dict) -> dict:
    p = _params(config)
    n = int(config.get("n", 64))
    bc_spec = config.get("bc", "+-")
    if bc_spec not in _PAIRS:
        raise ValidationError(f"bc must be one of {sorted(_PAIRS)}")
    left, right = _PAIRS[bc_spec]
    bc = chain_bc(n, p, left, right)
    psi0 = profile_init(n, p, left, right)
    opts = MinimizeOptions(max_iter=int(config.get("max_iter", 5000)))
    res = minimize_H(psi0, Domain(width=n * p.lam, height=p.lam), p, bc, opts)
    out = _outdir(config)
    (out / "minimize_psi.json").write_text(
        SpinField.from_angles(res.psi, p.lam).to_json()
    )
    (out / "minimize_log.csv").write_text(log_to_csv(res.log))
    (out / "minimize_report.json").write_text(res.report.to_json())
    if res.stalled:
        raise NumericalError("line search stalled; best iterate written")
    return {"energy": res.report.total, "converged": res.converged}


def _cmd_profile1d(config: dict) -> dict:
    total, pot, grad = profile_transition_energy()
    doc = {"total": total, "potential": pot, "gradient": grad, "target": 8.0 / 3.0}
    path = _outdir(config) / "profile1d.json"
    path.write_text(json.dumps(doc))
    if abs(total - 8.0 / 3.0) > 1e-6:
        raise NumericalError(f"transition energy {total} off 8/3 by more than 1e-6")
    return doc


def _cmd_selftest(config: dict) -> dict:
    rng = np.random.default_rng(0)
    counts = {}
    # exact decomposition identity on random fields
    fails = 0
    for _ in range(20):
        nx = int(rng.integers(6, 14))
        p = ModelParams(lam=float(rng.uniform(0.01, 0.1)), delta=float(rng.uniform(0.05, 0.9)))
        u = SpinField.from_angles(rng.uniform(-math.pi, math.pi, (nx, nx)), p.lam)
        dom = Domain(width=nx * p.lam, height=nx * p.lam)
        a = energy_H(u, dom, p).total
        b = mm_decomposition(u, dom, p).total
        if abs(a - b) > 1e-9 * (1.0 + abs(a)):
            fails += 1
    counts["decomposition_identity"] = (20, fails)
    # rho agreement
    t1 = rng.uniform(-math.pi, math.pi, 20000)
    t2 = rng.uniform(-math.pi, math.pi, 20000)
    keep = np.abs(np.cos((t1 + t2) / 4.0)) > 1e-6
    d = np.abs(
        rho(t1[keep], t2[keep], "definition") - rho(t1[keep], t2[keep], "closed_form")
    )
    counts["rho_agreement"] = (int(keep.sum()), int((d > 1e-9).sum()))
    # ground states at zero energy
    fails = 0
    for pair in _PAIRS.values():
        p = ModelParams(lam=1.0 / 32, delta=0.1)
        jj, ii = np.mgrid[0:32, 0:32]
        psi = p.helix_angle * (pair[0] * ii + pair[1] * jj)
        u = SpinField.from_angles(psi, p.lam)
        if energy_H(u, Domain(), p).total > 1e-10:
            fails += 1
    counts["ground_states"] = (4, fails)
    # rigidity enumeration
    traces = [(a, b) for a in (1, -1) for b in (1, -1)]
    r2 = 1.0 / math.sqrt(2.0)
    normals = [(1, 0), (-1, 0), (0, 1), (0, -1), (r2, r2), (-r2, -r2), (r2, -r2), (-r2, r2)]
    adm = sum(
        1
        for a in traces
        for b in traces
        if a != b
        for nu in normals
        if classify_triple(a, b, nu) != "inadmissible"
    )
    counts["admissible_triples"] = (adm, 0 if adm == 24 else 1)
    total_fail = sum(f for _, f in counts.values())
    if total_fail:
        raise NumericalError(f"selftest failures: {counts}")
    return {name: {"checked": n, "failed": f} for name, (n, f) in counts.items()}


_DISPATCH = {
    "groundstate": _cmd_groundstate,
    "energy": _cmd_energy,
    "transform": _cmd_transform,
    "classify": _cmd_classify,
    "recover": _cmd_recover,
    "sweep": _cmd_sweep,
    "minimize": _cmd_minimize,
    "profile1d": _cmd_profile1d,
    "selftest": _cmd_selftest,
}


def run(command: str, config: dict) -> tuple[int, dict]:
    """Execute one command with a config dict; returns (exit status, result)."""
    if command not in _DISPATCH:
        return 1, {"error": f"unknown command {command!r}"}
    threads = int(config.get("threads", 1))
    if threads < 1:
        return 1, {"error": "threads must be >= 1"}
    try:
        return 0, _DISPATCH[command](config)
    except ValidationError as exc:
        return 1, {"error": str(exc)}
    except NumericalError as exc:
        return 2, {"error": str(exc)}


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="helimag", description=__doc__)
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON config file; flags override its keys")
    ap.add_argument("--out", help="output directory (default .)")
    ap.add_argument("--deterministic", action="store_true", default=True)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--format", choices=("json", "csv", "svg"))
    ap.add_argument("--json-errors", action="store_true",
                    help="emit machine-readable error JSON on stderr")
    ap.add_argument("--pair")
    ap.add_argument("--bc")
    ap.add_argument("--delta", type=float)
    ap.add_argument("--lambda", dest="lam", type=float)
    ap.add_argument("--n", type=int)
    ap.add_argument("--n-walls", type=int, dest="n_walls")
    ap.add_argument("--in", dest="infile")
    ap.add_argument("--mesh")
    ap.add_argument("--kind")
    ap.add_argument("--schedule")
    ap.add_argument("--finest-n", type=int, dest="finest_n")
    ap.add_argument("--levels", type=int)
    ap.add_argument("--max-iter", type=int, dest="max_iter")
    return ap


_FLAG_KEYS = {
    "out": "out", "threads": "threads", "format": "format", "pair": "pair",
    "bc": "bc", "delta": "delta", "lam": "lambda", "n": "n",
    "n_walls": "n_walls", "infile": "in", "mesh": "mesh", "kind": "kind",
    "schedule": "schedule", "finest_n": "finest_n", "levels": "levels",
    "max_iter": "max_iter",
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    config: dict = {}
    if args.config:
        try:
            config.update(json.loads(Path(args.config).read_text()))
        except (OSError, ValueError) as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return 1
    for attr, key in _FLAG_KEYS.items():
        val = getattr(args, attr)
        if val is not None:
            config[key] = val
    config.setdefault("deterministic", bool(args.deterministic))
    status, result = run(args.command, config)
    if status == 0:
        print(json.dumps(result))
    else:
        if args.json_errors:
            print(json.dumps({"status": status, **result}), file=sys.stderr)
        else:
            print(f"error: {result.get('error')}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
