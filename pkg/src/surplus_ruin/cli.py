"""Command-line front end.

    surplus-ruin compute  --case erlang2-exp --lambda 1 --mu 2 --premium linear:1,0.5 --u 0:10:11
    surplus-ruin simulate --case exp-exp --lambda 1 --mu 2 --premium const:1 --u 0:5:6 --paths 100000 --seed 7
    surplus-ruin roots    --case exp-erlang2 --lambda 1 --mu 1 --premium const:3
    surplus-ruin compare  --case exp-exp --lambda 1 --mu 2 --premium linear:1,0.5 --u 0:40:41
    surplus-ruin check    --case exp-erlang2 --lambda 1 --mu 3 --premium ratl:1,0.5

Options may also come from ``--config FILE`` (``key = value`` lines, ``#``
comments); flags override the file. Exit codes: 0 ok, 2 usage or
configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import io
import math
import sys
import warnings
from dataclasses import dataclass

import numpy as np

from . import __version__, analysis, bvp, exact, montecarlo
from .errors import DomainError, RuinError, UnsupportedCaseError
from .model import (Case, ModelSpec, PremiumClass, classify_premium, parse_premium,
                    safe_load_check)
from .odecore import build_coefficients, char_roots, constant_roots

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
COMMANDS = ("compute", "simulate", "roots", "compare", "check")
METHODS = ("auto", "exact", "bvp")


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    case: str = "exp-exp"
    lam: float = 1.0
    mu: float = 1.0
    premium: str = "const:1"
    u: str = "0:10:11"
    spacing: str = "linear"
    method: str = "auto"
    tol: float = 1e-10
    seed: int = 0
    paths: int = 100_000
    horizon: float | None = None
    workers: int = 1
    backend: str | None = None
    output: str | None = None


# config-file key -> (field, parser)
_KEYS = {
    "case": ("case", str), "lambda": ("lam", float), "mu": ("mu", float),
    "premium": ("premium", str), "u": ("u", str), "spacing": ("spacing", str),
    "method": ("method", str), "tol": ("tol", float), "seed": ("seed", int),
    "paths": ("paths", int), "horizon": ("horizon", float), "workers": ("workers", int),
    "backend": ("backend", str), "output": ("output", str),
}


def read_config_file(path):
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for num, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{num}: expected key = value")
        key, _, val = (s.strip() for s in line.partition("="))
        key = key.replace("_", "-")
        if key == "command":
            values["command"] = val
            continue
        if key not in _KEYS:
            raise ConfigError(f"{path}:{num}: unknown key {key!r}")
        fld, conv = _KEYS[key]
        if val.lower() == "none":
            values[fld] = None
            continue
        try:
            values[fld] = conv(val)
        except ValueError:
            raise ConfigError(f"{path}:{num}: bad value {val!r} for {key}") from None
    return values


def dump_config(cfg: RunConfig) -> str:
    out = [f"# surplus-ruin {__version__} configuration", f"command = {cfg.command}"]
    for key, (fld, _) in _KEYS.items():
        val = getattr(cfg, fld)
        out.append(f"{key} = {val!r}" if isinstance(val, float) else f"{key} = {val}")
    return "\n".join(out) + "\n"


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--dump-config", metavar="PATH",
                        help="write the merged configuration to PATH and exit")
    common.add_argument("--case", choices=[c.value for c in Case])
    common.add_argument("--lambda", dest="lam", type=float, help="arrival rate parameter")
    common.add_argument("--mu", type=float, help="claim rate parameter")
    common.add_argument("--premium", help="const:c | linear:c,eps | poly:c,e1,... | ratl:c,a")
    common.add_argument("--u", help="reserve grid start:stop:points")
    common.add_argument("--spacing", choices=["linear", "geometric"])
    common.add_argument("--method", choices=METHODS)
    common.add_argument("--tol", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--paths", type=int)
    common.add_argument("--horizon", type=float)
    common.add_argument("--workers", type=int)
    common.add_argument("--backend", choices=list(montecarlo.BACKENDS))
    common.add_argument("--output", help="CSV path (default stdout)")
    parser = argparse.ArgumentParser(prog="surplus-ruin", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def parse_args(argv) -> tuple[RunConfig, str | None]:
    parser = _build_parser()
    ns = parser.parse_args(argv)
    values = {}
    if ns.config:
        values.update(read_config_file(ns.config))
    values["command"] = ns.command
    for fld in ("case", "lam", "mu", "premium", "u", "spacing", "method", "tol", "seed",
                "paths", "horizon", "workers", "backend", "output"):
        val = getattr(ns, fld)
        if val is not None:
            values[fld] = val
    return RunConfig(**values), ns.dump_config


def parse_grid(text: str, spacing: str = "linear") -> np.ndarray:
    parts = text.split(":")
    if len(parts) == 1:
        try:
            vals = [float(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"bad reserve grid {text!r}") from None
        if not vals:
            raise ConfigError("reserve grid is empty")
        return np.array(vals)
    if len(parts) != 3:
        raise ConfigError(f"reserve grid must be start:stop:points, got {text!r}")
    try:
        start, stop, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"bad reserve grid {text!r}") from None
    if n < 1:
        raise ConfigError("reserve grid is empty")
    if start < 0 or stop < start:
        raise ConfigError("reserve grid needs 0 <= start <= stop")
    if spacing == "geometric":
        if start <= 0:
            raise ConfigError("geometric grid needs start > 0")
        return np.geomspace(start, stop, n)
    return np.linspace(start, stop, n)


def model_from(cfg: RunConfig) -> ModelSpec:
    return ModelSpec(Case.parse(cfg.case), cfg.lam, cfg.mu, parse_premium(cfg.premium))


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def _provenance(cfg: RunConfig, extra=()):
    lines = [f"# surplus-ruin {__version__} {cfg.command}",
             f"# case={cfg.case} lambda={cfg.lam!r} mu={cfg.mu!r} premium={cfg.premium}"]
    lines += [f"# {e}" for e in extra]
    return lines


def _csv(comments, header, rows):
    buf = io.StringIO()
    for c in comments:
        buf.write(c + "\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _exact_curve(m: ModelSpec, u):
    p = m.premium
    zero = np.zeros_like(u)
    if p.tag == "constant":
        _, psi = exact.ruin_constant_premium(m.case, p.params[0], m.lam, m.mu, u)
        return exact.RuinCurve(u, psi, zero, "exact", m)
    if p.tag == "linear":
        c, eps = p.params
        if m.case is Case.EXP_EXP:
            return exact.RuinCurve(u, exact.ruin_exp_exp_linear(c, eps, m.lam, m.mu, u), zero,
                                   "exact", m)
        if m.case is Case.ERLANG2_EXP:
            return exact.ruin_erlang2exp_linear(c, eps, m.lam, m.mu, u, return_curve=True)
        return exact.ruin_experlang2_linear(c, eps, m.lam, m.mu, u, return_curve=True)
    if m.case is Case.EXP_EXP:
        psi = exact.ruin_exp_exp_general(p, m.lam, m.mu, u)
        return exact.RuinCurve(u, psi, np.full_like(u, 1e-12), "exact", m)
    raise UnsupportedCaseError(f"no closed form for premium {p.tag} in case {m.case.value}")


def compute_curve(m: ModelSpec, u, method="auto", tol=1e-10):
    if method == "bvp":
        return bvp.solve_ruin(m, bvp.BvpConfig(tol=tol), u)
    if method == "exact":
        return _exact_curve(m, u)
    try:
        return _exact_curve(m, u)
    except UnsupportedCaseError:
        return bvp.solve_ruin(m, bvp.BvpConfig(tol=tol), u)


def cmd_compute(cfg: RunConfig) -> str:
    m = model_from(cfg)
    u = parse_grid(cfg.u, cfg.spacing)
    curve = compute_curve(m, u, cfg.method, cfg.tol)
    rows = [(a, b, e, curve.method) for a, b, e in curve.points]
    return _csv(_provenance(cfg, [f"method={cfg.method} tol={cfg.tol!r}"]),
                ["u", "psi", "err", "method"], rows)


def cmd_simulate(cfg: RunConfig) -> str:
    m = model_from(cfg)
    u = parse_grid(cfg.u, cfg.spacing)
    if cfg.paths < 1:
        raise ConfigError("paths must be at least 1")
    if cfg.workers < 1:
        raise ConfigError("workers must be at least 1")
    results = montecarlo.simulate_curve(m, u, cfg.horizon, cfg.paths, cfg.seed,
                                        workers=cfg.workers, backend=cfg.backend)
    rows = [(r.u, r.psi_hat, r.half_width_95, r.n_paths, r.horizon, r.truncation_flag)
            for r in results]
    backend = results[0].backend if results else ""
    return _csv(_provenance(cfg, [f"seed={cfg.seed} paths={cfg.paths} backend={backend}"]),
                ["u", "psi_hat", "ci95", "n", "horizon", "truncated"], rows)


def cmd_roots(cfg: RunConfig) -> str:
    m = model_from(cfg)
    cls = classify_premium(m.premium)
    rows = [("case", m.case.value), ("class", cls.value)]
    report = safe_load_check(m)
    if cls is PremiumClass.P2:
        u_eval = float(parse_grid(cfg.u, cfg.spacing)[-1])
        rows.append(("level", "inf"))
        if m.case is Case.EXP_EXP:
            rows.append(("decay_rate", m.mu))
        else:
            r1, r2 = char_roots(build_coefficients(m), u_eval)
            rows += [("u_eval", u_eval), ("rho1", r1), ("rho2", r2)]
    else:
        c = m.premium.limit
        rows.append(("level", c))
        if m.case is Case.EXP_EXP:
            rows.append(("rho1", -(m.mu - m.lam / c)))
        else:
            r1, r2 = constant_roots(m.case, m.lam, m.mu, c)
            rows += [("rho1", r1), ("rho2", r2)]
    rows += [("safe_load", report.satisfied), ("margin", report.margin)]
    if report.regime:
        rows.append(("regime", report.regime))
    return _csv(_provenance(cfg), ["name", "value"], rows)


def cmd_compare(cfg: RunConfig) -> str:
    p = parse_premium(cfg.premium)
    if p.tag != "linear":
        raise ConfigError("compare needs --premium linear:c,eps")
    c, eps = p.params
    u = parse_grid(cfg.u, cfg.spacing)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        table = analysis.compare_linear_vs_constant(cfg.case, c, eps, cfg.lam, cfg.mu, u)
    extra = [f"{k}={v}" for k, v in sorted(table.meta.items())]
    return _csv(_provenance(cfg, extra), ["u", "psi_linear", "psi_const", "ratio"], table.rows())


def cmd_check(cfg: RunConfig) -> str:
    m = model_from(cfg)
    cls = classify_premium(m.premium)
    report = safe_load_check(m)
    u = parse_grid(cfg.u, cfg.spacing)
    comments = [f"class={cls.value}",
                f"safe_load={_fmt(report.satisfied)} margin={_fmt(report.margin)}"
                + (f" regime={report.regime}" if report.regime else ""),
                f"seed={cfg.seed} paths={cfg.paths}"]
    if not report.satisfied:
        rows = [(x, 1.0, 1.0, 1.0, 0.0) for x in u]
        comments.append("net-profit condition fails: ruin is certain")
        return _csv(_provenance(cfg, comments), ["u", "exact", "bvp", "mc", "mc_ci95"], rows)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ex = _exact_curve(m, u).psi
    except UnsupportedCaseError:
        ex = np.full_like(u, math.nan)
    bv = bvp.solve_ruin(m, bvp.BvpConfig(tol=cfg.tol), u).psi
    sims = montecarlo.simulate_curve(m, u, cfg.horizon, cfg.paths, cfg.seed,
                                     workers=cfg.workers, backend=cfg.backend)
    rows = [(x, e, b, s.psi_hat, s.half_width_95) for x, e, b, s in zip(u, ex, bv, sims)]
    return _csv(_provenance(cfg, comments), ["u", "exact", "bvp", "mc", "mc_ci95"], rows)


_DISPATCH = {"compute": cmd_compute, "simulate": cmd_simulate, "roots": cmd_roots,
             "compare": cmd_compare, "check": cmd_check}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg, dump_path = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    except (ConfigError, TypeError) as exc:
        print(f"surplus-ruin: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if dump_path:
        try:
            with open(dump_path, "w", encoding="utf-8") as fh:
                fh.write(dump_config(cfg))
        except OSError as exc:
            print(f"surplus-ruin: cannot write {dump_path}: {exc}", file=sys.stderr)
            return EXIT_USAGE
        return EXIT_OK
    if cfg.method not in METHODS:
        print(f"surplus-ruin: unknown method {cfg.method!r}", file=sys.stderr)
        return EXIT_USAGE
    try:
        text = _DISPATCH[cfg.command](cfg)
    except ConfigError as exc:
        print(f"surplus-ruin: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, UnsupportedCaseError) as exc:
        print(f"surplus-ruin: configuration error ({type(exc).__name__}): {exc}",
              file=sys.stderr)
        return EXIT_USAGE
    except RuinError as exc:
        print(f"surplus-ruin: numerical failure ({type(exc).__name__}): {exc}",
              file=sys.stderr)
        return EXIT_NUMERIC
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
