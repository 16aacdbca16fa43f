"""Command line entry point: experiment dispatch and bit-stable CSV output.

Usage: ``schwdec <subcommand> --config <path> --out <dir> [--seed N]
[--sweep-sizes a,b,c]``.  Every run writes CSV series (full double precision,
'\\n' newlines, locale independent) plus a JSON manifest with the config
hash, derived seeds and output digests.  BLAS thread count follows the usual
``OMP_NUM_THREADS`` / ``OPENBLAS_NUM_THREADS`` environment variables.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, experiments, oracles
from .config import (
    ExperimentConfig,
    config_hash,
    config_to_dict,
    derive_seed,
    parse_config,
)
from .evolve import TrajectoryRecord


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def write_csv(path: Path, record: TrajectoryRecord, columns=None) -> None:
    cols = list(columns) if columns is not None else record.column_labels()
    lines = [",".join([record.index_name] + cols)]
    for i in range(len(record.times)):
        lines.append(
            ",".join([_fmt(record.times[i])] + [_fmt(record.series[c][i]) for c in cols])
        )
    path.write_text("\n".join(lines) + "\n", newline="\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out_dir: Path, config: ExperimentConfig, seeds: dict, files, started: float) -> None:
    manifest = {
        "artifact_version": __version__,
        "config_hash": config_hash(config),
        "config": config_to_dict(config),
        "master_seed": config.seed,
        "derived_seeds": seeds,
        "started_unix": started,
        "finished_unix": time.time(),
        "outputs": [
            {"file": f.name, "sha256": _sha256(f)} for f in sorted(files)
        ],
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", newline="\n"
    )


def _seed_labels(config: ExperimentConfig, labels) -> dict:
    return {label: derive_seed(config.seed, label) for label in labels}


def _one_row_record(values: dict) -> TrajectoryRecord:
    return TrajectoryRecord(
        np.array([0.0]),
        {k: np.array([v]) for k, v in values.items()},
        index_name="row",
    )


def _cmd_ground_state(config: ExperimentConfig, out: Path) -> list:
    model = experiments.build_model(config)
    h = model.spin_ops.hamiltonian
    resid = float(
        np.linalg.norm(
            h.matvec(model.ground.amplitudes) - model.ground_energy * model.ground.amplitudes
        )
    )
    from .schwinger import staggered_vacuum
    from .tensor import inner

    stag = staggered_vacuum(model.spin_ops.space)
    summary = _one_row_record(
        {
            "energy": model.ground_energy,
            "residual": resid,
            "staggered_fidelity": abs(inner(stag, model.ground)) ** 2,
            "pair_overlap": abs(inner(model.ground, model.pair)),
        }
    )
    sites = np.arange(1, model.n_sites + 1, dtype=float)
    profile = TrajectoryRecord(
        sites,
        {
            "charge_ground": np.array(
                [q.expectation(model.ground) for q in model.spin_ops.charge_density]
            ),
            "charge_pair": np.array(
                [q.expectation(model.pair) for q in model.spin_ops.charge_density]
            ),
            "excitation_ground": np.array(
                [f.expectation(model.ground) for f in model.spin_ops.fermion_density]
            ),
            "excitation_pair": np.array(
                [f.expectation(model.pair) for f in model.spin_ops.fermion_density]
            ),
        },
        index_name="site",
    )
    write_csv(out / "ground_state_summary.csv", summary)
    write_csv(out / "ground_state_profile.csv", profile)
    print(f"ground state energy {model.ground_energy:.12f} (residual {resid:.2e})")
    return [out / "ground_state_summary.csv", out / "ground_state_profile.csv"]


def _cmd_evolve(config: ExperimentConfig, out: Path) -> list:
    result = experiments.run_charge_density_evolution(config)
    files = []
    for label, record in result.branches.items():
        groups = {
            f"charge_density_{label}.csv": [c for c in record.series if c.startswith("q")],
            f"apparatus_{label}.csv": [c for c in record.series if c.startswith("xa")],
            f"environment_{label}.csv": [c for c in record.series if c.startswith("xe")],
            f"conservation_{label}.csv": ["norm", "energy", "charge_total"],
        }
        for name, cols in groups.items():
            write_csv(out / name, record, cols)
            files.append(out / name)
    return files


def _cmd_pointer_sieve(config: ExperimentConfig, out: Path) -> list:
    result = experiments.run_pointer_sieve(config)
    files = [out / "entropy.csv", out / "conservation.csv"]
    write_csv(out / "entropy.csv", result.entropy)
    write_csv(out / "conservation.csv", result.conservation)
    if result.sweep is not None:
        write_csv(out / "entropy_sweep.csv", result.sweep)
        files.append(out / "entropy_sweep.csv")
    return files


def _cmd_decoherence(config: ExperimentConfig, out: Path) -> list:
    result = experiments.run_decoherence_distance(config)
    order = ["dB_rho_rhoD", "dB_rho_random", "dB_random_random", "dB_rho_rho0", "dB_tilde"]
    write_csv(out / "distances.csv", result.distances, order)
    write_csv(out / "charge_top.csv", result.charge_top)
    write_csv(out / "conservation.csv", result.conservation)
    files = [out / "distances.csv", out / "charge_top.csv", out / "conservation.csv"]
    if result.sweep is not None:
        write_csv(out / "distance_sweep.csv", result.sweep)
        files.append(out / "distance_sweep.csv")
    print(
        f"d_B initial {result.initial_distance:.6f} -> min {result.min_distance:.6f} "
        f"at t={result.t_min:g}"
    )
    return files


def _cmd_local_map(config: ExperimentConfig, out: Path) -> list:
    result = experiments.run_local_decoherence_map(config)
    write_csv(out / "map.csv", result.map_record, ["site", "dB", "dB_gsa0", "diff", "logdiff"])
    write_csv(out / "conservation.csv", result.conservation)
    return [out / "map.csv", out / "conservation.csv"]


def _cmd_sweep(config: ExperimentConfig, out: Path) -> list:
    result = experiments.run_size_sweep(config)
    write_csv(out / "sweep.csv", result.table)
    return [out / "sweep.csv"]


def _cmd_oracle_check(config: ExperimentConfig, out: Path | None) -> list:
    results = oracles.run_all(seed=config.seed)
    failed = [r for r in results if not r.passed]
    width = max(len(r.name) for r in results)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status}  {r.name:<{width}}  err={r.max_err:.3e}  tol={r.tol:.0e}")
    files = []
    if out is not None:
        lines = ["name,max_err,tol,passed"]
        for r in results:
            lines.append(f"{r.name},{_fmt(r.max_err)},{_fmt(r.tol)},{int(r.passed)}")
        (out / "oracle_report.csv").write_text("\n".join(lines) + "\n", newline="\n")
        files.append(out / "oracle_report.csv")
    if failed:
        raise RuntimeError(f"{len(failed)} oracle check(s) failed")
    return files


_EXTRA_SEEDS = {
    "pointer-sieve": lambda cfg: [f"sieve-random-{i}" for i in range(cfg.n_random)],
    "decoherence": lambda cfg: ["tilde-a", "tilde-b", "reference-dm-0", "reference-dm-1"],
    "sweep": lambda cfg: [f"sieve-random-{i}" for i in range(cfg.n_random)],
}

_COMMANDS = {
    "ground-state": _cmd_ground_state,
    "evolve": _cmd_evolve,
    "pointer-sieve": _cmd_pointer_sieve,
    "decoherence": _cmd_decoherence,
    "local-map": _cmd_local_map,
    "sweep": _cmd_sweep,
    "oracle-check": _cmd_oracle_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="schwdec",
        description="lattice Schwinger model decoherence experiments",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", "-c", type=Path, default=None, help="config file (key=value or JSON)")
        p.add_argument(
            "--out",
            "-o",
            type=Path,
            default=None,
            required=name != "oracle-check",
            help="output directory for CSV series and the manifest",
        )
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument(
            "--sweep-sizes",
            type=str,
            default=None,
            help="comma-separated apparatus/environment sizes, overrides config.sweep",
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = time.time()
    try:
        config = parse_config(args.config) if args.config else ExperimentConfig()
        if args.seed is not None:
            config.seed = args.seed
        if args.sweep_sizes is not None:
            config.sweep = tuple(int(s) for s in args.sweep_sizes.split(",") if s)
        config.validate()
        out = args.out
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
        files = _COMMANDS[args.subcommand](config, out)
        if out is not None:
            labels = ["ground-start"] + _EXTRA_SEEDS.get(args.subcommand, lambda c: [])(config)
            _write_manifest(out, config, _seed_labels(config, labels), files, started)
            print(f"wrote {len(files)} file(s) + manifest.json to {out}")
    except Exception as exc:  # nonzero exit on any failed invariant or oracle
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
