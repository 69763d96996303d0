"""Command-line driver: seeding, config canonicalization, CSV/JSON emission.

Subcommands (one verb per module surface):

  smoothness   randomized second-derivative ratio certification -> JSON
  bounds       evaluate any inequality evaluator -> CSV rows
  tower        return-time partition table -> CSV
  ulam         invariant CDF table -> CSV
  simulate     martingale / chain verification checks -> JSON
  experiment   Monte Carlo scaling or tail experiment -> CSV + JSON (+ PNG)
  verify       run the acceptance suite

Exit codes: 0 success, 1 a verified bound or criterion failed, 2 usage or
config error.  All file output is atomic (temp + rename); CSV uses RFC-4180
with '.' decimals and 17 significant digits so doubles round-trip.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime
import hashlib
import io
import json
import os
import sys
import tempfile

import numpy as np

from . import __version__
from . import bounds as bounds_mod
from .acceptance import CRITERIA, run_all
from .bounds import TailBound, ThetaSequence
from .dynamics import build_tower, build_ulam
from .experiments import (
    ExperimentConfig,
    run_deviation,
    run_scaling,
    run_wasserstein,
    spread_check,
    stable_tail_check,
)
from .lq import LqSpace, check_smoothness
from .martingale import (
    MartingaleConfig,
    iid_two_state,
    sticky_two_state,
    verify_hoeffding,
    verify_martingale_mz,
    verify_mz_markov,
)

__all__ = ["main", "dispatch", "canonicalize_config", "RunManifest"]


class ConfigError(Exception):
    """Bad usage or configuration: exit code 2."""


def _fmt(x) -> str:
    if isinstance(x, float) or isinstance(x, np.floating):
        return f"{float(x):.17g}"
    return "" if x is None else str(x)


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temp file in the same directory so readers never see a
    truncated file."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    atomic_write_text(path, buf.getvalue())
    return path


def write_json(path: str, obj) -> str:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def canonicalize_config(raw: dict, defaults: dict) -> tuple[dict, str]:
    """Fill defaults, reject unknown keys, and hash the canonical form.

    Two semantically identical configs (any key order, defaults implied or
    spelled out) get the same digest.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = {**defaults, **raw}
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return cfg, hashlib.sha256(canon.encode()).hexdigest()


@dataclasses.dataclass
class RunManifest:
    """Reproducibility record written alongside every --out run."""

    command: str
    config_hash: str
    master_seed: int
    tool_version: str = __version__
    started: str = ""
    finished: str | None = None
    outputs: list[str] = dataclasses.field(default_factory=list)

    def write(self, out_dir: str) -> str:
        path = os.path.join(out_dir, "manifest.json")
        write_json(path, dataclasses.asdict(self))
        return path


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _start_manifest(args, command: str, config_hash: str) -> RunManifest | None:
    if not getattr(args, "out", None):
        return None
    m = RunManifest(command=command, config_hash=config_hash, master_seed=args.seed, started=_now())
    m.write(args.out)
    return m


def _finish_manifest(m: RunManifest | None, args, outputs: list[str]) -> None:
    if m is None:
        return
    m.finished = _now()
    m.outputs = [os.path.relpath(p, args.out) for p in outputs]
    m.write(args.out)


def _load_config(args) -> dict:
    if not args.config:
        return {}
    try:
        with open(args.config) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {args.config}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}")


def _emit_table(args, name: str, header: list[str], rows, outputs: list[str]) -> None:
    """Table to <out>/<name>.csv, or to stdout as CSV / JSON records."""
    if args.out:
        outputs.append(write_csv(os.path.join(args.out, f"{name}.csv"), header, rows))
    elif args.format == "json":
        records = [dict(zip(header, [None if v is None else (float(v) if isinstance(v, (float, np.floating)) else v) for v in row])) for row in rows]
        print(json.dumps(records, indent=2))
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


# ---------------------------------------------------------------------------
# bounds evaluator registry
# ---------------------------------------------------------------------------


def _theta(v):
    return ThetaSequence(np.asarray(v, dtype=float))


_EVALUATORS = {
    # name: (callable, scalar flags usable on the command line)
    "mz_constant": (lambda q_, params: bounds_mod.mz_constant_K(params["p"], params["c_tilde_p"]), ["p", "c_tilde_p"]),
    "mz": (lambda q_, params: bounds_mod.mz_bound(params["p"], params["c_tilde_p"], params["b_seq"]), []),
    "mz_max": (lambda q_, params: bounds_mod.mz_max_bound(params["p"], params["K"], params["M"], int(params["n"]), _theta(params["theta"])), []),
    "martingale_mz": (lambda q_, params: bounds_mod.martingale_mz_bound(params["p"], params["c_p"], params["increment_norms"]), []),
    "hoeffding": (lambda x, params: bounds_mod.hoeffding_tail(params["q"], params["b"], int(params["n"]), x), ["q", "b", "n", "x"]),
    "pinelis94": (lambda x, params: bounds_mod.pinelis94_tail(params["q"], params["b"], int(params["n"]), x), ["q", "b", "n", "x"]),
    "general": (lambda x, params: bounds_mod.general_tail(params["q"], params["b_n"], int(params["n"]), x), ["q", "b_n", "n", "x"]),
    "rosenthal": (lambda q_, params: bounds_mod.rosenthal_bound(params["p"], params["x0_moment"], params["cond_s2_norms"], int(params["n"])), []),
    "deviation": (lambda x, params: bounds_mod.deviation_bound(int(params["q_lag"]), params["M"], x, _theta(params["theta"]), int(params["n"]), params["c_tilde_2"]), []),
    "deviation_moment": (lambda q_, params: bounds_mod.deviation_moment_bound(params["p"], params["M"], _theta(params["theta"]), int(params["n"]), params["c_tilde_2"]), []),
    "maximal": (lambda q_, params: bounds_mod.maximal_bound(params["p"], params["sn_moment"], params["M"], _theta(params["theta"]), int(params["n"])), []),
}

_X_DRIVEN = {"hoeffding", "pinelis94", "general", "deviation"}


def _cmd_bounds(args) -> int:
    raw = _load_config(args)
    name = args.evaluator or raw.get("evaluator")
    if name not in _EVALUATORS:
        raise ConfigError(f"unknown evaluator {name!r}; choose from {sorted(_EVALUATORS)}")
    fn, _ = _EVALUATORS[name]
    params = dict(raw.get("params", {}))
    for key in ("q", "b", "b_n", "n", "p", "c_tilde_p", "x"):
        val = getattr(args, key, None)
        if val is not None:
            params[key] = val
    xs = params.pop("x", None)
    if name in _X_DRIVEN:
        if xs is None:
            raise ConfigError(f"evaluator {name!r} needs 'x' (flag --x or config params.x)")
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
    else:
        xs = [None]

    rows = []
    pstr = json.dumps(params, sort_keys=True)
    for x in xs:
        try:
            out = fn(float(x) if x is not None else None, params)
        except KeyError as e:
            raise ConfigError(f"evaluator {name!r} missing parameter {e}")
        if isinstance(out, TailBound):
            rows.append([name, pstr, x, out.value, out.regime])
        else:
            rows.append([name, pstr, x, out, ""])

    header = ["evaluator", "params", "x", "value", "regime"]
    cfg_hash = hashlib.sha256(json.dumps({"evaluator": name, "params": params}, sort_keys=True).encode()).hexdigest()
    manifest = _start_manifest(args, "bounds", cfg_hash)
    outputs = []
    _emit_table(args, "bounds", header, rows, outputs)
    _finish_manifest(manifest, args, outputs)
    return 0


def _cmd_tower(args) -> int:
    tower = build_tower(args.gamma, args.k)
    header = ["k", "x_k", "y_k", "mass_k", "tail_k"]
    rows = [
        [k, tower.x[k], tower.y[k - 1], tower.masses[k - 1], tower.tail[k]]
        for k in range(1, args.k + 1)
    ]
    manifest = _start_manifest(args, "tower", hashlib.sha256(f"tower:{args.gamma}:{args.k}".encode()).hexdigest())
    outputs = []
    _emit_table(args, "tower", header, rows, outputs)
    if args.out and args.plot:
        from .plots import tower_figure

        outputs.append(tower_figure(tower, os.path.join(args.out, "tower.png")))
    _finish_manifest(manifest, args, outputs)
    return 0


def _cmd_ulam(args) -> int:
    model = build_ulam(args.gamma, args.m)
    header = ["t", "F"]
    rows = list(zip(model.cdf.knots, model.cdf.values))
    manifest = _start_manifest(args, "ulam", hashlib.sha256(f"ulam:{args.gamma}:{args.m}".encode()).hexdigest())
    outputs = []
    _emit_table(args, "ulam", header, rows, outputs)
    if args.out and args.plot:
        from .plots import cdf_figure

        outputs.append(cdf_figure(model, os.path.join(args.out, "ulam.png")))
    _finish_manifest(manifest, args, outputs)
    return 0


def _cmd_smoothness(args) -> int:
    space = LqSpace.uniform(args.dim, args.q)
    report = check_smoothness(space, args.p, args.samples, rng_seed=args.seed, diagonal=args.diagonal)
    print(report.to_json())
    if args.out:
        manifest = _start_manifest(args, "smoothness", hashlib.sha256(report.to_json().encode()).hexdigest())
        out = os.path.join(args.out, "smoothness.json")
        atomic_write_text(out, report.to_json() + "\n")
        _finish_manifest(manifest, args, [out])
    return 0 if report.passed else 1


_SIMULATE_DEFAULTS = {
    "check": "martingale_mz",
    "p": 2.0,
    "q": 2.0,
    "dim": 1,
    "n": 16,
    "b": 1.0,
    "law": "rademacher_coords",
    "replicas": 10**5,
    "master_seed": 0,
    "chain": "sticky",
    "stay": 0.9,
    "x_grid": None,
}


def _cmd_simulate(args) -> int:
    raw = _load_config(args)
    cfg, cfg_hash = canonicalize_config(raw, _SIMULATE_DEFAULTS)
    seed = args.seed if args.seed is not None else cfg["master_seed"]
    check = cfg["check"]
    if check == "martingale_mz":
        mcfg = MartingaleConfig(dim=int(cfg["dim"]), q=cfg["q"], n=int(cfg["n"]), b=cfg["b"], law=cfg["law"])
        checks = [verify_martingale_mz(mcfg, p=cfg["p"], replicas=int(cfg["replicas"]), seed=seed).to_dict()]
    elif check == "hoeffding":
        mcfg = MartingaleConfig(dim=int(cfg["dim"]), q=cfg["q"], n=int(cfg["n"]), b=cfg["b"], law=cfg["law"])
        rep = verify_hoeffding(mcfg, replicas=int(cfg["replicas"]), x_grid=cfg["x_grid"], seed=seed)
        checks = [rep.to_dict()]
    elif check == "mz_markov":
        inst = sticky_two_state(cfg["stay"], cfg["q"]) if cfg["chain"] == "sticky" else iid_two_state(cfg["q"])
        checks = [c.to_dict() for c in verify_mz_markov(inst, p=cfg["p"], n=int(cfg["n"]), replicas=int(cfg["replicas"]), seed=seed)]
    else:
        raise ConfigError(f"unknown check {check!r}")
    result = {"check": check, "config": cfg, "config_hash": cfg_hash, "checks": checks}
    print(json.dumps(result, indent=2, sort_keys=True))
    manifest = _start_manifest(args, "simulate", cfg_hash)
    outputs = []
    if args.out:
        outputs.append(write_json(os.path.join(args.out, "simulate.json"), result))
    _finish_manifest(manifest, args, outputs)
    return 0 if all(c.get("pass", False) for c in checks) else 1


_EXPERIMENT_DEFAULTS = {
    "mode": "scaling",
    "gamma": 0.25,
    "q": 2.0,
    "p": 2.0,
    "n_grid": [2**k for k in range(8, 15)],
    "replicas": 200,
    "burn_in": 10**4,
    "master_seed": 0,
    "statistic": "max_d_kq",
    "ulam_m": 4096,
    "tolerance": None,
    "target_slope": None,
    "x_grid": None,
}


def _experiment_config(cfg: dict, args) -> ExperimentConfig:
    seed = args.seed if args.seed is not None else int(cfg["master_seed"])
    return ExperimentConfig(
        gamma=cfg["gamma"],
        q=cfg["q"],
        p=cfg["p"],
        n_grid=tuple(int(n) for n in cfg["n_grid"]),
        replicas=int(cfg["replicas"]),
        burn_in=int(cfg["burn_in"]),
        master_seed=seed,
        statistic=cfg["statistic"],
        ulam_m=int(cfg["ulam_m"]),
        threads=args.threads,
        tolerance=cfg["tolerance"],
        target_slope=cfg["target_slope"],
    )


def _raw_rows(result) -> tuple[list[str], list[list]]:
    """Per-replica rows: the full empirical-statistic schema when it is
    computable in one pass (q = 2 map statistics), otherwise the single
    configured statistic."""
    cfg = result.config
    if cfg.q == 2.0 and cfg.statistic in ("max_d_kq", "d_nq", "w1"):
        from .experiments import empirical_profile

        prof = empirical_profile(cfg)
        header = ["gamma", "q", "n", "replica", "d_nq", "max_d_kq", "w1"]
        rows = [
            [cfg.gamma, cfg.q, n, r, prof["d_nq"][r, j], prof["max_d_kq"][r, j], prof["w1"][r, j]]
            for r in range(cfg.replicas)
            for j, n in enumerate(cfg.n_grid)
        ]
        return header, rows
    header = ["gamma", "q", "n", "replica", "statistic", "value"]
    rows = [
        [cfg.gamma, cfg.q, n, r, cfg.statistic, result.samples[r, j]]
        for r in range(result.samples.shape[0])
        for j, n in enumerate(cfg.n_grid)
    ]
    return header, rows


def _cmd_experiment(args) -> int:
    raw = _load_config(args)
    cfg, cfg_hash = canonicalize_config(raw, _EXPERIMENT_DEFAULTS)
    mode = cfg["mode"]
    manifest = _start_manifest(args, "experiment", cfg_hash)
    outputs = []

    if mode in ("scaling", "wasserstein"):
        econfig = _experiment_config(cfg, args)
        result = run_scaling(econfig) if mode == "scaling" else run_wasserstein(econfig)
        verdict = {"mode": mode, "config_hash": cfg_hash, **result.verdict()}
        if args.out:
            header, rows = _raw_rows(result)
            outputs.append(write_csv(os.path.join(args.out, "raw.csv"), header, rows))
            agg_header = ["n", "mean", "p_moment", "q25", "q50", "q75"]
            agg_rows = [
                [n, result.samples[:, j].mean(), result.moments[j], *result.quantiles[j]]
                for j, n in enumerate(result.config.n_grid)
            ]
            outputs.append(write_csv(os.path.join(args.out, "aggregated.csv"), agg_header, agg_rows))
            outputs.append(write_json(os.path.join(args.out, "verdict.json"), verdict))
            if args.plot:
                from .plots import scaling_figure

                outputs.append(scaling_figure(result, os.path.join(args.out, "scaling.png")))
        print(json.dumps(verdict, indent=2, sort_keys=True))
        ok = verdict["pass"]
    elif mode == "deviation":
        econfig = _experiment_config(cfg, args)
        x_grid = cfg["x_grid"]
        result = run_deviation(econfig, x_grid=None if x_grid is None else np.asarray(x_grid, dtype=float))
        verdict = {"mode": mode, "config_hash": cfg_hash, **result.verdict()}
        if args.out:
            outputs.append(
                write_csv(
                    os.path.join(args.out, "tail.csv"),
                    ["x", "tail"],
                    list(zip(result.x, result.tail)),
                )
            )
            outputs.append(write_json(os.path.join(args.out, "verdict.json"), verdict))
            if args.plot:
                from .plots import deviation_figure

                outputs.append(deviation_figure(result, os.path.join(args.out, "deviation.png")))
        print(json.dumps(verdict, indent=2, sort_keys=True))
        ok = verdict["pass"]
    elif mode == "stable_tail":
        n = int(cfg["n_grid"][-1])
        result = stable_tail_check(
            cfg["gamma"], n=n, replicas=int(cfg["replicas"]),
            seed=args.seed if args.seed is not None else int(cfg["master_seed"]),
            burn_in=int(cfg["burn_in"]), ulam_m=int(cfg["ulam_m"]), threads=args.threads,
        )
        verdict = {"mode": mode, "config_hash": cfg_hash, **result.verdict()}
        if args.out:
            outputs.append(write_json(os.path.join(args.out, "verdict.json"), verdict))
        print(json.dumps(verdict, indent=2, sort_keys=True))
        ok = verdict["pass"]
    elif mode == "spread":
        out = spread_check(
            cfg["gamma"], cfg["n_grid"], replicas=int(cfg["replicas"]),
            seed=args.seed if args.seed is not None else int(cfg["master_seed"]),
            burn_in=int(cfg["burn_in"]), ulam_m=int(cfg["ulam_m"]), threads=args.threads,
        )
        verdict = {"mode": mode, "config_hash": cfg_hash, "iqr": {str(k): v for k, v in out.items()}}
        if args.out:
            outputs.append(write_json(os.path.join(args.out, "verdict.json"), verdict))
        print(json.dumps(verdict, indent=2, sort_keys=True))
        ok = True
    else:
        raise ConfigError(f"unknown experiment mode {mode!r}")

    _finish_manifest(manifest, args, outputs)
    return 0 if ok else 1


def _cmd_verify(args) -> int:
    numbers = None
    if args.criteria:
        try:
            numbers = sorted({int(tok) for tok in args.criteria.split(",")})
        except ValueError:
            raise ConfigError(f"bad --criteria list: {args.criteria!r}")
        bad = [n for n in numbers if n not in CRITERIA]
        if bad:
            raise ConfigError(f"unknown criteria: {bad}")
    results = run_all(numbers, seed=args.seed if args.seed is not None else 0, threads=args.threads)
    if args.out:
        write_json(
            os.path.join(args.out, "verify.json"),
            [dataclasses.asdict(r) for r in results],
        )
    failed = [r.number for r in results if not r.passed]
    if failed:
        print(f"{len(failed)} criteria failed: {failed}")
        return 1
    print(f"all {len(results)} criteria passed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ergo-moments",
        description="moment/deviation inequality evaluators and Monte Carlo experiments "
        "for intermittent interval maps",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, seed_default=None):
        p.add_argument("--seed", type=int, default=seed_default, help="64-bit master seed")
        p.add_argument("--threads", type=int, default=None, help="worker threads (fallback: ERGO_MOMENTS_THREADS, then 1)")
        p.add_argument("--out", type=str, default=None, help="output directory")
        p.add_argument("--config", type=str, default=None, help="JSON config file")
        p.add_argument("--format", choices=["csv", "json"], default="csv", help="stdout format for tabular commands")

    p = sub.add_parser("smoothness", help="randomized second-derivative ratio certification")
    common(p, seed_default=0)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--samples", type=int, default=10**4)
    p.add_argument("--diagonal", action="store_true", help="restrict to directions u = v")
    p.set_defaults(fn=_cmd_smoothness)

    p = sub.add_parser("bounds", help="evaluate an inequality evaluator")
    common(p, seed_default=0)
    p.add_argument("evaluator", nargs="?", help=f"one of {sorted(_EVALUATORS)}")
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--b", type=float, default=None)
    p.add_argument("--b_n", type=float, default=None, dest="b_n")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--c-tilde-p", type=float, default=None, dest="c_tilde_p")
    p.add_argument("--x", type=float, default=None)
    p.set_defaults(fn=_cmd_bounds)

    p = sub.add_parser("tower", help="return-time partition table")
    common(p, seed_default=0)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--plot", action="store_true", help="also render tower.png (needs --out)")
    p.set_defaults(fn=_cmd_tower)

    p = sub.add_parser("ulam", help="invariant CDF table")
    common(p, seed_default=0)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--plot", action="store_true", help="also render ulam.png (needs --out)")
    p.set_defaults(fn=_cmd_ulam)

    p = sub.add_parser("simulate", help="martingale / chain verification checks")
    common(p)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("experiment", help="Monte Carlo scaling or tail experiment")
    common(p)
    p.add_argument("--plot", dest="plot", action="store_true", default=True)
    p.add_argument("--no-plot", dest="plot", action="store_false")
    p.set_defaults(fn=_cmd_experiment)

    p = sub.add_parser("verify", help="run the acceptance suite")
    common(p, seed_default=0)
    p.add_argument("--criteria", type=str, default=None, help="comma-separated criterion numbers")
    p.set_defaults(fn=_cmd_verify)

    return ap


def dispatch(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "threads", None) is None:
        env = os.environ.get("ERGO_MOMENTS_THREADS", "")
        try:
            args.threads = max(1, int(env)) if env else 1
        except ValueError:
            print(f"bad ERGO_MOMENTS_THREADS value {env!r}", file=sys.stderr)
            return 2
    try:
        return args.fn(args)
    except (ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
