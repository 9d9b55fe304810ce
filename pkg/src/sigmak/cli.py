"""Command-line entry point: one flat JSON config per run, reproducible artifacts.

    sigmak <command> [--config cfg.json] [--set key=value ...] [--out DIR] [--seed N]

Exit status: 0 when every in-run assertion holds, 1 when one fails, 2 for
config errors, 3 for numerical failures (a JSON diagnostic goes to stderr).
The output directory defaults to $SIGMAK_OUTDIR, then ./sigmak_out.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .geometry import ProblemParams

CONFIG_VERSION = 1
EXIT_OK, EXIT_ASSERT, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# configs -------------------------------------------------------------------------

@dataclass
class _Base:
    version: int = CONFIG_VERSION
    n: int = 7
    k: int = 2


@dataclass
class VerifyConfig(_Base):
    curvature: dict = field(default_factory=lambda: {"family": "flat-pole", "K0": 1.0, "a1": 0.5, "beta1": 3.0,
                                                     "Kpi": 1.0, "a2": 0.5, "beta2": 3.0})
    lam: float = 0.5
    t_range: list = field(default_factory=lambda: [-10.0, 4.0])
    tols: list = field(default_factory=lambda: [1e-6, 1e-8, 1e-10])
    bc: list = field(default_factory=lambda: [-0.3, 0.2])


@dataclass
class SolveConfig(_Base):
    curvature: dict = field(default_factory=lambda: {"family": "constant", "K0": 1.0})
    lambda_bracket: list = field(default_factory=lambda: [0.1, 10.0])
    tol: float = 1e-11
    t_end: float | None = None
    samples: int = 2001
    residual_limit: float = 1e-6


@dataclass
class ClassifyConfig(_Base):
    a1: float = 1.0
    a2: float = 1.0
    beta1: float = 3.0
    beta2: float = 3.0
    K0: float | None = None
    Kpi: float | None = None
    band: float = 1e-9


@dataclass
class BubbleConfig(_Base):
    n: int = 9
    eps: float = 1e-3
    beta: float = 2.0
    T: list = field(default_factory=lambda: [100.0, 150.0, 200.0])
    band: float = 0.05


@dataclass
class NoncompactConfig(_Base):
    n: int = 9
    eps: float = 1e-3
    beta: float = 2.0
    T_min: float = 1.0
    T_max: float = 40.0
    step: float = 0.5
    root_tol: float = 1e-9
    min_roots: int = 2


@dataclass
class NonexistConfig(_Base):
    eps_scale: float = 1e-12  # eps = eps_scale * e^{-(n+2k) T}
    T: float = 20.0
    beta1: float = 2.0
    beta2: float = 2.0
    lambda_min: float = 1e-4
    lambda_max: float = 1e4
    count: int = 60
    tol: float = 1e-9


@dataclass
class DumpConfig(_Base):
    curvature: dict = field(default_factory=lambda: {"family": "constant", "K0": 1.0})
    t_min: float = -10.0
    t_max: float = 10.0
    samples: int = 401


@dataclass
class AppendixConfig(_Base):
    samples: int = 50
    a_max: float = 20.0
    betas: list = field(default_factory=lambda: [-3.0, 0.0, 2.5])
    limit: float = 1e-10


CONFIGS = {
    "verify-identities": VerifyConfig,
    "solve": SolveConfig,
    "classify": ClassifyConfig,
    "bubble-analyze": BubbleConfig,
    "noncompact": NoncompactConfig,
    "nonexist-scan": NonexistConfig,
    "dump-curvature": DumpConfig,
    "appendix-check": AppendixConfig,
}


def build_config(command: str, raw: dict):
    cls = CONFIGS[command]
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - names)
    if unknown:
        raise ConfigError(f"unknown config fields for {command}: {', '.join(unknown)}")
    try:
        cfg = cls(**raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.version != CONFIG_VERSION:
        raise ConfigError(f"config version {cfg.version} not supported (expected {CONFIG_VERSION})")
    try:
        params = ProblemParams(int(cfg.n), int(cfg.k))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad (n, k): {exc}") from exc
    if hasattr(cfg, "curvature"):
        from .curvature import model_from_descriptor

        try:
            model_from_descriptor(cfg.curvature, params)
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(f"bad curvature descriptor: {exc}") from exc
    return cfg, params


def _parse_set(items):
    out = {}
    for it in items or []:
        if "=" not in it:
            raise ConfigError(f"--set expects key=value, got {it!r}")
        key, val = it.split("=", 1)
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            out[key] = val
    return out


def config_hash(command: str, cfg, seed: int) -> str:
    payload = json.dumps({"command": command, "config": cfg.__dict__, "seed": seed},
                         sort_keys=True, default=_jsonable)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


# artifacts -----------------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.bool_):
        return bool(x)
    if hasattr(x, "as_dict"):
        return x.as_dict()
    raise TypeError(f"not serialisable: {type(x)}")


def _clean(x):
    # non-finite floats become strings so the artifact stays valid JSON
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else repr(v)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if hasattr(x, "as_dict"):
        return _clean(x.as_dict())
    return x


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: Path, obj):
    _atomic_write(path, json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def write_csv(path: Path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([f"{v:.17g}" if isinstance(v, (float, np.floating)) else v for v in row])
    _atomic_write(path, buf.getvalue())


# commands ------------------------------------------------------------------------

def _model(cfg, params):
    from .curvature import model_from_descriptor

    return model_from_descriptor(cfg.curvature, params)


def cmd_verify(cfg: VerifyConfig, params, out: Path, rng):
    from .identities import identity_suite

    res = identity_suite(params, _model(cfg, params), cfg.lam, tuple(cfg.t_range), tuple(cfg.tols), tuple(cfg.bc))
    lines = [json.dumps(_clean(r), sort_keys=True) for r in res.pop("reports")]
    _atomic_write(out / "identities.jsonl", "\n".join(lines) + "\n")
    return res, {"exact residuals < 1e-8": res["exact_max"] < 1e-8,
                 "integrated residuals <= 10 tol, falling with tol": res["scaling_ok"]}, {"reports_jsonl": "identities.jsonl"}


def cmd_solve(cfg: SolveConfig, params, out: Path, rng):
    from .solvers import find_global_solution, solution_checks, trusted_end

    K = _model(cfg, params)
    res = find_global_solution(params, K, cfg.lambda_bracket, tol=cfg.tol, t_end=cfg.t_end)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        chk = solution_checks(res, K)
    prof = res.profile
    a, b = chk["interval"]
    tt = np.linspace(a, b, cfg.samples)
    rows = zip(tt, prof.xi(tt), prof.xidot(tt), prof.psi(tt), prof.w(tt), prof.Fk(tt), K.K(tt))
    csv_name = "solve_profile.csv"
    write_csv(out / csv_name, ["t", "xi", "xidot", "psi", "w", "F_k", "K"], rows)
    lim = 1e-8 if K.is_constant else cfg.residual_limit
    summary = {"shoot": res.as_dict(), "checks": chk, "trusted_end": trusted_end(res)}
    asserts = {f"ode residual < {lim:g}": chk["ode_residual"] < lim,
               f"pohozaev residual < {lim:g}": chk["pohozaev_residual"] < lim,
               f"kazdan-warner residual < {lim:g}": chk["kazdan_warner_abs"] < lim}
    return summary, asserts, {"profile_csv": csv_name}


def cmd_classify(cfg: ClassifyConfig, params, out: Path, rng):
    from .degree import classify_regime

    v = classify_regime(params, cfg.a1, cfg.a2, cfg.beta1, cfg.beta2, cfg.K0, cfg.Kpi, cfg.band)
    return v.as_dict(), {}, {}


def cmd_bubble(cfg: BubbleConfig, params, out: Path, rng):
    from .blowup import bubble_energy_closed_form, check_spacing_law, decompose_bubbles, tower_energy_diag
    from .solvers import solve_noncompact_bvp

    quantum = bubble_energy_closed_form(params, params.K_round)
    towers, rows, asserts = [], [], {}
    for T in cfg.T:
        sol = solve_noncompact_bvp(params, cfg.eps, cfg.beta, float(T), allow_any_beta=True)
        lad = decompose_bubbles(sol.left(), -T - 10.0, 0.0)
        law = check_spacing_law(lad, params, cfg.beta, float(T), band=cfg.band)
        en = tower_energy_diag(sol.left(), lad, quantum, -T - 40.0)
        towers.append({"T": T, "ladder": lad.as_dict(), "law": law, "energy": en})
        for i, c in enumerate(lad.critical):
            rows.append((float(T), i, c.t, c.kind, c.xi, c.xiddot))
        asserts[f"T={T:g}: bubble count within 1"] = law["count_ok"]
        if law["ratio_source"] == "differences":
            asserts[f"T={T:g}: spacing ratios within {cfg.band:g}"] = law["ratio_ok"]
    write_csv(out / "bubbles.csv", ["T", "index", "t", "kind", "xi", "xiddot"], rows)
    return {"quantum": quantum, "towers": towers}, asserts, {"bubbles_csv": "bubbles.csv"}


def cmd_noncompact(cfg: NoncompactConfig, params, out: Path, rng):
    from .solvers import continuation_in_T

    res = continuation_in_T(params, cfg.eps, cfg.beta, (cfg.T_min, cfg.T_max), step=cfg.step,
                            root_tol=cfg.root_tol, allow_any_beta=True)
    write_csv(out / "continuation.csv", ["T", "xidot0", "m"], zip(res.T_grid, res.xidot0, res.counting))
    good = [r for r in res.roots if r["converged"]]
    asserts = {f"at least {cfg.min_roots} converged even solutions": len(good) >= cfg.min_roots,
               "m(T) increases over the range": res.counting[-1] > res.counting[0]}
    return res.as_dict(), asserts, {"continuation_csv": "continuation.csv"}


def cmd_nonexist(cfg: NonexistConfig, params, out: Path, rng):
    from .solvers import nonexistence_scan

    eps = cfg.eps_scale * math.exp(-(params.n + 2 * params.k) * cfg.T)
    grid = np.logspace(math.log10(cfg.lambda_min), math.log10(cfg.lambda_max), cfg.count)
    rep = nonexistence_scan(params, eps, cfg.T, cfg.beta1, cfg.beta2, lambda_grid=grid, tol=cfg.tol)
    write_csv(out / "nonexist_scan.csv", ["lambda", "defect", "normalized_defect", "sign"],
              zip(rep.lambdas, rep.defects, rep.normalized, rep.signs))
    return rep.as_dict(), {"continuity guard": rep.guard_ok}, {"scan_csv": "nonexist_scan.csv"}


def cmd_dump(cfg: DumpConfig, params, out: Path, rng):
    from .curvature import check_derivative

    K = _model(cfg, params)
    tt = np.linspace(cfg.t_min, cfg.t_max, cfg.samples)
    theta = 2.0 * np.arctan(np.exp(-tt))
    write_csv(out / "curvature.csv", ["t", "theta", "K", "Kdot", "logderiv"],
              zip(tt, theta, K.K(tt), K.Kdot(tt), K.logderiv(tt)))
    chk = check_derivative(K, tt)
    return {"descriptor": K.descriptor(), "derivative_check": chk}, {}, {"curvature_csv": "curvature.csv"}


def cmd_appendix(cfg: AppendixConfig, params, out: Path, rng):
    from .identities import appendix_corollary_checks, beta_integral_check

    rows = []
    for _ in range(cfg.samples):
        a = float(rng.uniform(0.1, cfg.a_max))
        b = float(rng.uniform(0.02, 1.98)) * a
        rows.append(beta_integral_check(a, b))
    cor = appendix_corollary_checks(float(params.n), tuple(cfg.betas))
    worst = max(r["rel_err"] for r in rows)
    worst_c = max(r["rel_err"] for r in cor)
    return ({"comparisons": rows, "corollaries": cor, "max_rel_err": worst},
            {f"beta integral rel err < {cfg.limit:g}": worst < cfg.limit,
             f"corollary rel err < {cfg.limit:g}": worst_c < cfg.limit}, {})


COMMANDS = {
    "verify-identities": cmd_verify,
    "solve": cmd_solve,
    "classify": cmd_classify,
    "bubble-analyze": cmd_bubble,
    "noncompact": cmd_noncompact,
    "nonexist-scan": cmd_nonexist,
    "dump-curvature": cmd_dump,
    "appendix-check": cmd_appendix,
}


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sigmak", description="Axisymmetric sigma_k Nirenberg experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="flat JSON config")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config field")
        sp.add_argument("--out", type=Path, help="output directory")
        sp.add_argument("--seed", type=int, default=0)
    return p


class _ParseError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ParseError(message)


def run(argv=None) -> int:
    parser = make_parser()
    parser.__class__ = _Parser
    for action in parser._subparsers._group_actions:
        for sp in action.choices.values():
            sp.__class__ = _Parser
    try:
        args = parser.parse_args(argv)
        raw = {}
        if args.config is not None:
            try:
                raw = json.loads(args.config.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config: {exc}") from exc
            if not isinstance(raw, dict):
                raise ConfigError("config must be a JSON object")
        raw.update(_parse_set(args.set))
        cfg, params = build_config(args.command, raw)
    except (_ParseError, ConfigError) as exc:
        print(json.dumps({"error": "config", "message": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or Path(os.environ.get("SIGMAK_OUTDIR", "sigmak_out"))
    rng = np.random.default_rng(args.seed)
    h = config_hash(args.command, cfg, args.seed)
    try:
        results, asserts, files = COMMANDS[args.command](cfg, params, out, rng)
    except (ArithmeticError, RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
        diag = {"error": "numerical", "command": args.command, "type": type(exc).__name__,
                "message": str(exc), "config_hash": h}
        print(json.dumps(diag), file=sys.stderr)
        return EXIT_NUMERIC
    passed = all(asserts.values())
    artifact = {"command": args.command, "version": __version__, "config_hash": h, "seed": args.seed,
                "config": cfg.__dict__, "params": params.as_dict(), "results": results,
                "assertions": asserts, "passed": passed, "files": files}
    name = args.command.replace("-", "_") + ".json"
    write_json(out / name, artifact)
    for label, ok in asserts.items():
        print(f"[{'PASS' if ok else 'FAIL'}] {label}")
    print(f"wrote {out / name}")
    return EXIT_OK if passed else EXIT_ASSERT


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
