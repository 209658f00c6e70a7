"""Command-line entry point: ``lqriss <command> --config FILE [--seed N]``.

Each command reads one JSON experiment document, validates it against
:data:`CONFIG_SCHEMA` before touching any numerics and writes CSV and JSON
artifacts to ``output_dir``. Every artifact carries the library version and
the validated config, and nothing time-dependent is written, so reruns are
byte-identical.

Exit codes: 0 success, 1 certification found a violation, 2 bad config or
I/O, 3 a flow left the stabilizing set, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .bounds import ALL_LEMMAS, certificate, certify_batch, xi1
from .config import Tolerances
from .errors import ConfigError, LqrIssError, NumericalError
from .estimator import EstimatorConfig, residual_signal
from .flows import CSV_HEADER, DisturbanceSignal, Exit, FlowKind, SignalKind, integrate
from .model import PlantModel, load_plant, plant_from_dict
from .plants import one_dim, random_plant, sample_gain
from .verify import escape_threshold, fit_envelope, run_counterexample, saturation_demo

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2
EXIT_LEFT = 3
EXIT_NUMERICAL = 4

_matrix = {"type": "array", "minItems": 1,
           "items": {"type": "array", "minItems": 1, "items": {"type": "number"}}}
_num_list = {"type": "array", "minItems": 1, "items": {"type": "number"}}
_pos = {"type": "number", "exclusiveMinimum": 0}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


CONFIG_SCHEMA = _obj({
    "plant": {"oneOf": [
        _obj({"builtin": {"const": "one_dim"}}, ["builtin"]),
        _obj({"builtin": {"const": "random"},
              "n": {"type": "integer", "minimum": 1, "maximum": 32},
              "m": {"type": "integer", "minimum": 1},
              "seed": {"type": "integer", "minimum": 0}}, ["builtin", "n", "m", "seed"]),
        _obj({"path": {"type": "string"}}, ["path"]),
        _obj({"inline": _obj({"A": _matrix, "B": _matrix, "Q": _matrix, "R": _matrix},
                             ["A", "B", "Q", "R"])}, ["inline"]),
    ]},
    "flow": _obj({
        "kind": {"enum": [k.value for k in FlowKind]},
        "eta": _pos,
        "K0": {"oneOf": [_matrix, {"const": "optimal"}]},
        "init_radius": _pos,
    }),
    "disturbance": _obj({
        "kind": {"enum": [k.value for k in SignalKind]},
        "amplitude": {"type": "number", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "omega": {"type": "number"},
        "phase": {"type": "number"},
        "direction": _matrix,
        "estimator": _obj({
            "radius": _pos,
            "num_samples": {"type": "integer", "minimum": 1},
            "scheme": {"enum": ["TwoPointSphere", "CoordinateFD"]},
        }, ["radius"]),
    }),
    "integration": _obj({
        "h": _pos,
        "s_max": _pos,
        "record_every": {"type": "integer", "minimum": 1},
    }),
    "sweep": _obj({
        "amplitudes": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}},
        "seeds": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 0}},
        "num_seeds": {"type": "integer", "minimum": 1},
        "kinds": {"type": "array", "minItems": 1, "items": {"enum": [k.value for k in FlowKind]}},
        "signal_kind": {"enum": ["ConstantMatrix", "SinusoidalMatrix", "BoundedNoise"]},
    }),
    "certify": _obj({
        "count": {"type": "integer", "minimum": 1},
        "radii": {"type": "array", "minItems": 1, "items": _pos},
        "lemmas": {"type": "array", "minItems": 1, "items": {"enum": [lem.value for lem in ALL_LEMMAS]}},
    }),
    "counterexample": _obj({
        "w_bar": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.5},
        "chi0": _num_list,
        "t_max": _pos,
    }, ["w_bar", "chi0"]),
    "saturation": _obj({"z_grid": {"type": "array", "minItems": 1,
                                   "items": {"type": "number", "exclusiveMinimum": 1}}}),
    "output_dir": {"type": "string"},
    "seed": {"type": "integer", "minimum": 0},
    "tolerances": _obj({
        "tol_abs": _pos, "tol_rel": _pos, "margin": _pos, "cond_cap": _pos,
    }),
})


# ---------------------------------------------------------------- plumbing


def load_config(path, seed: int | None = None) -> dict:
    """Read and validate a config file; ``seed`` overrides the master seed."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if seed is not None:
        if isinstance(doc, dict):
            doc["seed"] = seed
    validate_config(doc)
    return doc


def validate_config(doc) -> None:
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None


def build_plant(cfg: dict) -> PlantModel:
    tol = Tolerances(**cfg.get("tolerances", {}))
    src = cfg.get("plant", {"builtin": "one_dim"})
    if "inline" in src:
        return plant_from_dict(src["inline"], tol=tol)
    if "path" in src:
        try:
            return load_plant(src["path"], tol=tol)
        except OSError as exc:
            raise ConfigError(f"cannot read plant file: {exc}") from None
    base = one_dim() if src["builtin"] == "one_dim" else random_plant(src["n"], src["m"], src["seed"])
    if "tolerances" not in cfg:
        return base
    return PlantModel(base.A, base.B, base.Q, base.R, tol=tol)


def _header(cfg: dict) -> dict:
    return {"version": __version__, "config": cfg}


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n")


def _write_csv(path: Path, cfg: dict, header, rows) -> None:
    # two comment lines, then a fixed header: read with comment="#"
    with open(path, "w", newline="") as fh:
        fh.write(f"# lqriss {__version__}\n")
        fh.write("# config " + json.dumps(cfg, sort_keys=True, separators=(",", ":")) + "\n")
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def _outdir(cfg: dict) -> Path:
    out = Path(cfg.get("output_dir", "lqriss-out"))
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from None
    return out


def _seed(cfg: dict) -> int:
    return int(cfg.get("seed", 0))


def _integration(cfg: dict) -> dict:
    it = cfg.get("integration", {})
    return {"h": it.get("h", 0.05), "s_max": it.get("s_max", 50.0), "record_every": it.get("record_every", 10)}


def _signal(plant: PlantModel, cfg: dict, eta: float) -> DisturbanceSignal:
    d = cfg.get("disturbance", {})
    kind = SignalKind(d.get("kind", "Zero"))
    seed = int(d.get("seed", _seed(cfg)))
    if kind is SignalKind.EstimatorResidual:
        est = d.get("estimator")
        if est is None:
            raise ConfigError("EstimatorResidual disturbance needs an 'estimator' block")
        ecfg = EstimatorConfig(radius=est["radius"], num_samples=est.get("num_samples", 1), seed=seed,
                               scheme=est.get("scheme", "TwoPointSphere"))
        sig = residual_signal(plant, ecfg, eta)
        sig.amplitude = float(d.get("amplitude", 0.0))
        return sig
    direction = np.array(d["direction"], dtype=float) if "direction" in d else None
    if direction is not None and direction.shape != (plant.m, plant.n):
        raise ConfigError(f"disturbance direction must be {plant.m}x{plant.n}")
    return DisturbanceSignal(kind=kind, amplitude=float(d.get("amplitude", 0.0)), seed=seed,
                             direction=direction, omega=float(d.get("omega", 1.0)),
                             phase=float(d.get("phase", 0.0)))


# ---------------------------------------------------------------- commands


def cmd_certify(cfg: dict) -> int:
    plant = build_plant(cfg)
    c = cfg.get("certify", {})
    count = c.get("count", 100)
    radii = c.get("radii", [0.1, 1.0, 10.0])
    lemmas = c.get("lemmas", [lem.value for lem in ALL_LEMMAS])
    rows = certify_batch(plant, count, radii, _seed(cfg), lemmas)
    out = _outdir(cfg)
    _write_csv(out / "lemmas.csv", cfg, ("lemma_id", "seed", "dist", "lhs", "rhs", "slack"),
               [(r.lemma_id, s, r.distance, r.lhs, r.rhs, r.slack) for s, r in rows])
    summary = {}
    for lem in lemmas:
        reps = [r for _, r in rows if r.lemma_id == lem]
        summary[lem] = {"checked": len(reps), "failed": sum(not r.passed for r in reps),
                        "min_slack": min(r.slack for r in reps)}
    violations = sum(v["failed"] for v in summary.values())
    cert = certificate(plant)
    doc = _header(cfg)
    doc.update(lemmas=summary, violations=violations,
               certificate={k: getattr(cert, k) for k in cert.__dataclass_fields__},
               r_exceeds_one=cert.r_exceeds_one)
    _write_json(out / "certify.json", doc)
    return EXIT_OK if violations == 0 else EXIT_VIOLATION


def cmd_flow(cfg: dict) -> int:
    plant = build_plant(cfg)
    f = cfg.get("flow", {})
    kind = FlowKind(f.get("kind", "Standard"))
    eta = float(f.get("eta", 1.0))
    K0 = f.get("K0")
    if K0 == "optimal":
        K0 = plant.K_star
    elif K0 is None:
        K0 = sample_gain(plant, np.random.default_rng(_seed(cfg)), f.get("init_radius", 1.0)).K
    else:
        K0 = np.array(K0, dtype=float)
        if K0.shape != (plant.m, plant.n):
            raise ConfigError(f"K0 must be {plant.m}x{plant.n}")
    sig = _signal(plant, cfg, eta)
    traj = integrate(plant, K0, kind, eta, sig, **_integration(cfg))
    out = _outdir(cfg)
    _write_csv(out / "trajectory.csv", cfg, CSV_HEADER,
               [[getattr(x, c) for c in CSV_HEADER] for x in traj.samples])
    extra = _header(cfg)
    extra["final_V3"] = traj.final.V3
    extra["K0"] = np.asarray(K0).tolist()
    traj.write_sidecar(out / "trajectory.json", extra)
    return EXIT_LEFT if traj.exit is Exit.LeftAdmissibleSet else EXIT_OK


def cmd_sweep(cfg: dict) -> int:
    plant = build_plant(cfg)
    sw = cfg.get("sweep", {})
    f = cfg.get("flow", {})
    eta = float(f.get("eta", 1.0))
    amplitudes = sorted(sw.get("amplitudes", [0.0, 0.01, 0.02, 0.05, 0.1]))
    if "seeds" in sw:
        seeds = list(sw["seeds"])
    else:
        seeds = [int(x) for x in np.random.SeedSequence(_seed(cfg)).generate_state(sw.get("num_seeds", 5))]
    kinds = sw.get("kinds", [f.get("kind", "Standard")])
    it = _integration(cfg)
    out = _outdir(cfg)
    docs, rows = {}, []
    for kind in kinds:
        env = fit_envelope(plant, kind, eta, amplitudes, seeds, it["s_max"], h=it["h"],
                           signal_kind=sw.get("signal_kind", "ConstantMatrix"),
                           init_radius=f.get("init_radius", 0.5), record_every=it["record_every"])
        docs[kind] = env.to_dict()
        for d, g, sp, ex in zip(env.amplitudes, env.gamma, env.spread, env.exits):
            rows.append((kind, d, g, sp, ex.count(Exit.LeftAdmissibleSet.value)))
    _write_csv(out / "envelope.csv", cfg, ("kind", "amplitude", "gamma", "spread", "left_admissible"), rows)
    doc = _header(cfg)
    doc["envelopes"] = docs
    _write_json(out / "envelope.json", doc)
    return EXIT_OK


def cmd_counterexample(cfg: dict) -> int:
    c = cfg.get("counterexample")
    if c is None:
        raise ConfigError("counterexample command needs a 'counterexample' block")
    w = c["w_bar"]
    out = _outdir(cfg)
    runs = []
    for i, chi0 in enumerate(c["chi0"]):
        run = run_counterexample(w, chi0, t_max=c.get("t_max", 1e8))
        _write_csv(out / f"counterexample_{i}.csv", cfg, ("t", "chi"), run.to_rows())
        runs.append({"chi0": chi0, "diverged": run.diverged, "settled": run.settled,
                     "t_end": float(run.t[-1]), "chi_end": float(run.chi[-1]),
                     "predicted_divergent": chi0 > run.threshold})
    doc = _header(cfg)
    doc.update(w_bar=w, threshold=escape_threshold(w), runs=runs)
    _write_json(out / "counterexample.json", doc)
    return EXIT_OK


def cmd_saturation(cfg: dict) -> int:
    grid = cfg.get("saturation", {}).get("z_grid", [1.5, 2.0, 1 + 2**0.5, 3.0, 10.0, 1e2, 1e3, 1e4, 1e6])
    rows = saturation_demo(grid)
    cert = certificate(one_dim())
    out = _outdir(cfg)
    _write_csv(out / "saturation.csv", cfg, ("z", "grad_abs", "xi1_bound"), rows)
    doc = _header(cfg)
    doc.update(xi1_sup=cert.xi1_sup, max_xi1=max(r[2] for r in rows),
               dominated=all(g >= b - 1e-12 for _, g, b in rows), xi1_at_inf=xi1(cert, 1e300))
    _write_json(out / "saturation.json", doc)
    return EXIT_OK


COMMANDS = {
    "certify": cmd_certify,
    "flow": cmd_flow,
    "sweep": cmd_sweep,
    "counterexample": cmd_counterexample,
    "saturation": cmd_saturation,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="lqriss", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"lqriss {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=(fn.__doc__ or name).strip().splitlines()[0] if fn.__doc__ else name)
        p.add_argument("--config", required=True, help="JSON experiment document")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (LqrIssError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
