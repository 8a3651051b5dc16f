"""Command-line interface: subcommand dispatch, deterministic output,
experiment manifests, and the verify-all aggregate runner.

Exit codes: 0 success, 1 metric failure, 2 input error, 3 numerical
non-convergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import evolution, friedrichs_bath, histories, spectral_core, wigner
from ._experiments import EXPERIMENTS, ConvergenceError
from .pointer import extract_weights, pointer_basis

EXIT_OK = 0
EXIT_METRIC_FAILURE = 1
EXIT_INPUT_ERROR = 2
EXIT_NO_CONVERGENCE = 3


class InputError(ValueError):
    pass


# -- deterministic emission ----------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def emit(rows, header, path, fmt: str = "csv") -> None:
    """Write a series bit-deterministically (17 significant digits, LF)."""
    try:
        if fmt == "csv":
            lines = [",".join(header)]
            lines += [",".join(_fmt(v) for v in row) for row in rows]
            payload = "\n".join(lines) + "\n"
        elif fmt == "json":
            payload = (
                json.dumps(
                    {"header": list(header), "rows": [list(r) for r in rows]},
                    sort_keys=True,
                    indent=2,
                )
                + "\n"
            )
        else:
            raise InputError(f"unknown format {fmt!r}")
        with open(path, "w", newline="\n") as fh:
            fh.write(payload)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc


def emit_json(obj, path) -> None:
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(json.dumps(obj, sort_keys=True, indent=2) + "\n")
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc


def _parse_times(text: str) -> np.ndarray:
    """'a:b:n' -> n samples on [a, b]; 'x,y,z' -> explicit list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise InputError(f"bad time range {text!r} (want start:stop:count)")
        return np.linspace(float(parts[0]), float(parts[1]), int(parts[2]))
    return np.array([float(x) for x in text.split(",")])


def _load_json(path) -> dict:
    if not os.path.exists(path):
        raise InputError(f"no such file: {path}")
    with open(path) as fh:
        return json.load(fh)


def _config_path(path_or_none, flag):
    if path_or_none is None:
        root = os.environ.get("DECOLAB_CONFIG")
        if root is None:
            raise InputError(f"missing {flag} and DECOLAB_CONFIG is not set")
        return root
    return path_or_none


# -- subcommand bodies ---------------------------------------------------


def _cmd_evolve(args) -> int:
    state = spectral_core.load_state(args.state)
    obs = spectral_core.load_observable(args.obs)
    times = _parse_times(args.times)
    base = spectral_core.pair(evolution.asymptotic_state(state), obs)
    rows = []
    for t in times:
        mean = evolution.mean_value_at(state, obs, float(t))
        rows.append((float(t), mean, mean - base))
    emit(rows, ("t", "mean", "offdiag"), args.out, args.format)
    return EXIT_OK


def _cmd_pointer(args) -> int:
    state = spectral_core.load_state(args.state)
    frame = pointer_basis(state)
    final = evolution.asymptotic_state(state)
    w_bound, w_cont = extract_weights(final, frame)
    if args.weights:
        rows = [("bound", r, float(w)) for r, w in enumerate(w_bound)]
        for node, x in enumerate(state.model.grid):
            rows += [
                (float(x), r, float(w)) for r, w in enumerate(w_cont[node])
            ]
        emit(rows, ("x", "r", "weight"), args.weights, "csv")
    emit_json(
        {
            "spectrum_bound": frame.spectrum_bound.tolist(),
            "spectrum_cont": frame.spectrum_cont.tolist(),
            "weights_bound": w_bound.tolist(),
            "weights_cont": w_cont.tolist(),
            "unitarity_defect": frame.unitarity_defect(),
            "crossing_nodes": frame.crossing_nodes(),
        },
        args.out,
    )
    return EXIT_OK


def _cmd_bath(args) -> int:
    cfg = _load_json(_config_path(args.config, "--config"))
    model = friedrichs_bath.BathModel.default(
        omega_osc=cfg.get("omega_osc", 1.0),
        coupling=cfg.get("coupling", 0.1),
        omega_c=cfg.get("omega_c"),
        omega_max=cfg.get("omega_max", 20.0),
        nodes=cfg.get("nodes", 2001),
        epsilon=cfg.get("epsilon", 1e-3),
    )
    init_cfg = cfg.get("init", {})
    init = friedrichs_bath.OscillatorInitialState(
        Q0=init_cfg.get("Q0", 1.0),
        P0=init_cfg.get("P0", 0.0),
        nbar=init_cfg.get("nbar", 0.0),
        alpha=complex(init_cfg.get("alpha_re", 0.0), init_cfg.get("alpha_im", 0.0)),
    )
    rows = []
    for t in _parse_times(args.times):
        t = float(t)
        q, p = friedrichs_bath.mean_QP(model, init, t)
        q2, p2 = friedrichs_bath.second_moments(model, init, t)
        rows.append((t, q, p, q2 - q * q, p2 - p * p))
    emit(rows, ("t", "meanQ", "meanP", "varQ", "varP"), args.out, "csv")
    return EXIT_OK


def _cmd_histories(args) -> int:
    rho_data = _load_json(args.rho)
    fam_data = _load_json(args.family)
    rho = np.array([[complex(re, im) for re, im in row] for row in rho_data["matrix"]])
    family = histories.ProjectorFamily(
        fam_data["dim"],
        [
            np.array([[complex(re, im) for re, im in row] for row in proj])
            for proj in fam_data["projectors"]
        ],
    )
    verdict = histories.classify(rho, family, _parse_times(args.times), args.tol)
    emit_json(
        {
            "level": verdict.level,
            "violations": verdict.violations,
            "probabilities": verdict.probabilities,
        },
        args.out,
    )
    return EXIT_OK


def _cmd_experiment(args) -> int:
    """wigner / classical subcommands run their canned experiments; the
    wigner one alternatively transforms an explicit kernel file to CSV."""
    if args.subcommand_name == "wigner" and args.kernel:
        data = _load_json(args.kernel)
        q = np.asarray(data["q_grid"], dtype=float)
        values = np.array(
            [[complex(re, im) for re, im in row] for row in data["values"]]
        )
        kernel = wigner.PositionKernel(q, values, args.hbar)
        grid = wigner.wigner_transform(kernel)
        rows = [
            (float(qi), float(pj), float(grid.values[i, j]))
            for i, qi in enumerate(grid.q_grid)
            for j, pj in enumerate(grid.p_grid)
        ]
        emit(rows, ("q", "p", "W"), args.out, "csv")
        return EXIT_OK
    params = {}
    if args.config:
        params = _load_json(args.config)
    fn = EXPERIMENTS[(args.subcommand_name, args.task)]
    metrics = fn(params)
    emit_json({"metrics": metrics}, args.out)
    return EXIT_OK


# -- manifests -----------------------------------------------------------


@dataclass
class ExperimentManifest:
    name: str
    subcommand: str
    task: str
    inputs: dict
    params: dict
    expected: list  # of {"metric", "value", "tolerance"}

    @classmethod
    def from_json(cls, data: dict) -> "ExperimentManifest":
        exp = data.get("expected", [])
        for e in exp:
            if e["tolerance"] <= 0:
                raise InputError(f"tolerance must be positive in {data.get('name')}")
        key = (data["subcommand"], data.get("task", ""))
        if key not in EXPERIMENTS:
            raise InputError(f"unknown experiment {key}")
        return cls(
            name=data["name"],
            subcommand=data["subcommand"],
            task=data.get("task", ""),
            inputs=data.get("inputs", {}),
            params=data.get("params", {}),
            expected=exp,
        )


def run_manifest(manifest: ExperimentManifest) -> dict:
    for label, path in manifest.inputs.items():
        if not os.path.exists(path):
            raise InputError(f"manifest {manifest.name}: missing input {label}={path}")
    fn = EXPERIMENTS[(manifest.subcommand, manifest.task)]
    metrics = fn(dict(manifest.params))
    checks = {}
    ok = True
    for e in manifest.expected:
        name = e["metric"]
        if name not in metrics:
            raise InputError(f"manifest {manifest.name}: unknown metric {name!r}")
        value = metrics[name]
        delta = value - e["value"]
        passed = abs(delta) <= e["tolerance"]
        ok = ok and passed
        checks[name] = {
            "value": value,
            "expected": e["value"],
            "tolerance": e["tolerance"],
            "delta": delta,
            "pass": passed,
        }
    return {"name": manifest.name, "status": "pass" if ok else "fail", "metrics": checks}


def _load_manifest_file(path) -> ExperimentManifest:
    return ExperimentManifest.from_json(_load_json(path))


def shipped_manifests() -> list:
    base = resources.files("decolab").joinpath("manifests")
    out = []
    for entry in sorted(base.iterdir(), key=lambda p: p.name):
        if entry.name.endswith(".json"):
            out.append(ExperimentManifest.from_json(json.loads(entry.read_text())))
    return out


def _cmd_run_manifest(args) -> int:
    manifest = _load_manifest_file(args.manifest)
    report = run_manifest(manifest)
    if args.out:
        emit_json(report, args.out)
    print(json.dumps(report, sort_keys=True, indent=2))
    return EXIT_OK if report["status"] == "pass" else EXIT_METRIC_FAILURE


def _cmd_verify_all(args) -> int:
    manifests = shipped_manifests()
    if args.parallel:
        with ThreadPoolExecutor() as pool:
            reports = list(pool.map(run_manifest, manifests))
    else:
        reports = [run_manifest(m) for m in manifests]
    overall = all(r["status"] == "pass" for r in reports)
    aggregate = {
        "overall": "pass" if overall else "fail",
        "reports": reports,
    }
    if args.out:
        emit_json(aggregate, args.out)
    print(json.dumps(aggregate, sort_keys=True, indent=2))
    return EXIT_OK if overall else EXIT_METRIC_FAILURE


# -- parser --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="decolab",
        description="numerical laboratory for continuum decoherence models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evolve", help="mean values over time from state/observable files")
    p.add_argument("--state", required=True)
    p.add_argument("--obs", required=True)
    p.add_argument("--times", required=True, help="start:stop:count or comma list")
    p.add_argument("--out", required=True)
    p.add_argument("--format", default="csv", choices=("csv", "json"))
    p.set_defaults(func=_cmd_evolve)

    p = sub.add_parser("pointer", help="pointer frame, spectra, and classical weights")
    p.add_argument("--state", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--weights", help="optional CSV (x,r,weight) output path")
    p.set_defaults(func=_cmd_pointer)

    p = sub.add_parser("bath", help="oscillator-bath moments over time")
    p.add_argument("--config")
    p.add_argument("--times", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_bath)

    p = sub.add_parser("histories", help="classify a projector family on a state")
    p.add_argument("--rho", required=True)
    p.add_argument("--family", required=True)
    p.add_argument("--times", required=True)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_histories)

    for name, default_task in (("wigner", "correspondence"), ("classical", "reconstruction")):
        p = sub.add_parser(name, help=f"run the canned {name} experiment")
        p.add_argument("--config")
        p.add_argument("--task", default=default_task)
        p.add_argument("--out", required=True)
        if name == "wigner":
            p.add_argument("--kernel", help="position-kernel JSON to transform to CSV")
            p.add_argument("--hbar", type=float, default=0.1)
        p.set_defaults(func=_cmd_experiment, subcommand_name=name)

    p = sub.add_parser("run-manifest", help="run one experiment manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_run_manifest)

    p = sub.add_parser("verify-all", help="run every shipped manifest")
    p.add_argument("--out")
    p.add_argument("--parallel", action="store_true")
    p.set_defaults(func=_cmd_verify_all)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except (FileNotFoundError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except ConvergenceError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
