"""Command-line front end: ``powersim <command> [options]``.

Options may also come from a TOML file given with ``--config``; the file holds
flat keys (``scenario``, ``n``, ``reps``, ...) plus an optional ``[params]``
table of scenario parameter overrides. Flags win over the file.

Exit status: 0 on success, 2 for configuration errors, 3 when a simulation
fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field
from typing import Optional

from . import engine, oracle, scenarios
from .exceptions import ConfigError, DesignError, ParameterError, SimulationError

try:  # Python 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

COMMANDS = ("power", "solve", "curve", "calibrate", "ci-width", "oracle", "list")
FORMATS = ("json", "csv", "table")
REPORT_FIELDS = ("scenario", "params", "n", "alpha", "reps", "seed", "power", "mc_se", "ci95", "invalid", "elapsed_ms")
CONFIG_KEYS = {
    "scenario", "n", "n_list", "target", "alpha", "reps", "seed", "workers", "format",
    "out", "kind", "level", "plot", "invalid_policy", "params",
}


@dataclass
class RunConfig:
    command: str
    scenario: Optional[str] = None
    params: dict = field(default_factory=dict)
    n: Optional[int] = None
    n_list: Optional[list] = None
    target: Optional[float] = None
    alpha: float = 0.05
    reps: Optional[int] = None
    seed: Optional[int] = None
    workers: int = 1
    format: str = "json"
    out: Optional[str] = None
    kind: Optional[str] = None
    level: float = 0.95
    plot: Optional[str] = None
    invalid_policy: str = "count"


# ---------------------------------------------------------------------------
# Argument parsing and config assembly
# ---------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file with defaults for these options")
    common.add_argument("--scenario", help="scenario id (see `powersim list`)")
    common.add_argument("--n", help="sample size")
    common.add_argument("--n-list", dest="n_list", help="comma-separated sample sizes (curve)")
    common.add_argument("--target", help="target power (solve)")
    common.add_argument("--alpha", help="significance level (default 0.05)")
    common.add_argument("--reps", help="Monte Carlo replications")
    common.add_argument("--seed", help="random seed (default: fresh, always echoed)")
    common.add_argument("--workers", help="worker processes (default: all cores)")
    common.add_argument("--format", help="json, csv or table (default json)")
    common.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                        help="override a scenario parameter; VALUE is parsed as JSON (repeatable)")
    common.add_argument("--out", help="write the report to this file")
    common.add_argument("--kind", help="interval kind for ci-width")
    common.add_argument("--level", help="confidence level for ci-width (default 0.95)")
    common.add_argument("--plot", help="SVG file for the power curve (curve)")
    common.add_argument("--invalid-policy", dest="invalid_policy", help="count, lenient or exclude")

    parser = argparse.ArgumentParser(prog="powersim", description="Monte Carlo power analysis.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "power": "estimate power at one n",
        "solve": "find the smallest n reaching a target power",
        "curve": "estimate power over several n",
        "calibrate": "estimate the type-I error rate under the null model",
        "ci-width": "simulate confidence-interval widths",
        "oracle": "analytic power where a closed form exists",
        "list": "list scenarios",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _int(name: str, value, minimum: Optional[int] = None) -> int:
    try:
        if isinstance(value, bool):
            raise ValueError
        if isinstance(value, float):
            if not value.is_integer():
                raise ValueError
            value = int(value)
        out = int(value)
    except (TypeError, ValueError):
        raise ConfigError(name, f"expected an integer, got {value!r}") from None
    if minimum is not None and out < minimum:
        raise ConfigError(name, f"must be >= {minimum}, got {out}")
    return out


def _float(name: str, value, lo: float, hi: float, closed_hi: bool = False) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ConfigError(name, f"expected a number, got {value!r}") from None
    ok = lo < out <= hi if closed_hi else lo < out < hi
    if not ok:
        bracket = "]" if closed_hi else ")"
        raise ConfigError(name, f"must lie in ({lo}, {hi}{bracket}, got {out}")
    return out


def _parse_param(item: str) -> tuple:
    if "=" not in item:
        raise ConfigError("param", f"expected KEY=VALUE, got {item!r}")
    key, raw = item.split("=", 1)
    key = key.strip()
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        raise ConfigError(f"param.{key}", f"value {raw!r} is not a number or JSON list") from None
    return key, value


def _load_file(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"invalid TOML in {path}: {exc}") from None
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown config key")
    if "params" in data and not isinstance(data["params"], dict):
        raise ConfigError("params", "must be a table of parameter overrides")
    for key, value in data.items():
        if key != "params" and isinstance(value, dict):
            raise ConfigError(key, "only [params] may be a table")
    return data


def build_config(argv) -> RunConfig:
    ns = _parser().parse_args(argv)
    merged = _load_file(ns.config) if ns.config else {}
    params = dict(merged.pop("params", {}))
    for key in ("scenario", "n", "n_list", "target", "alpha", "reps", "seed", "workers", "format", "out",
                "kind", "level", "plot", "invalid_policy"):
        value = getattr(ns, key)
        if value is not None:
            merged[key] = value
    for item in ns.param:
        k, v = _parse_param(item)
        params[k] = v

    cfg = RunConfig(command=ns.command, params=params)
    cfg.scenario = merged.get("scenario")
    if "n" in merged:
        cfg.n = _int("n", merged["n"], 1)
    if "n_list" in merged:
        raw = merged["n_list"]
        items = raw.split(",") if isinstance(raw, str) else list(raw)
        if not items or any(str(i).strip() == "" for i in items):
            raise ConfigError("n_list", "expected a comma-separated list of sample sizes")
        cfg.n_list = [_int("n_list", str(i).strip() if isinstance(i, str) else i, 1) for i in items]
    if "target" in merged:
        cfg.target = _float("target", merged["target"], 0.0, 1.0)
    if "alpha" in merged:
        cfg.alpha = _float("alpha", merged["alpha"], 0.0, 1.0)
    if "reps" in merged:
        cfg.reps = _int("reps", merged["reps"], 1)
    if "seed" in merged:
        cfg.seed = _int("seed", merged["seed"], 0)
        if cfg.seed >= 2**64:
            raise ConfigError("seed", "must fit in 64 bits")
    cfg.workers = _int("workers", merged["workers"], 1) if "workers" in merged else engine.default_workers()
    cfg.format = merged.get("format", "json")
    if cfg.format not in FORMATS:
        raise ConfigError("format", f"must be one of {', '.join(FORMATS)}, got {cfg.format!r}")
    cfg.out = merged.get("out")
    cfg.kind = merged.get("kind")
    if "level" in merged:
        cfg.level = _float("level", merged["level"], 0.0, 1.0)
    cfg.plot = merged.get("plot")
    cfg.invalid_policy = merged.get("invalid_policy", "count")
    if cfg.invalid_policy not in engine.POLICIES:
        raise ConfigError("invalid_policy", f"must be one of {', '.join(engine.POLICIES)}")
    _check_command_fields(cfg)
    return cfg


def _check_command_fields(cfg: RunConfig) -> None:
    sizes = [k for k in ("n", "n_list", "target") if getattr(cfg, k) is not None]
    allowed = {
        "power": {"n"}, "calibrate": {"n"}, "oracle": {"n"}, "ci-width": {"n"},
        "curve": {"n_list"}, "solve": {"target"}, "list": set(),
    }[cfg.command]
    for k in sizes:
        if k not in allowed:
            raise ConfigError(k, f"not used by the {cfg.command} command")
    if cfg.command == "curve" and cfg.n_list is None:
        raise ConfigError("n_list", "curve needs --n-list")
    if cfg.command == "solve" and cfg.target is None:
        raise ConfigError("target", "solve needs --target")
    if cfg.command == "ci-width":
        if cfg.kind not in engine.CI_KINDS:
            raise ConfigError("kind", f"must be one of {', '.join(engine.CI_KINDS)}")
        if cfg.n is None:
            raise ConfigError("n", "ci-width needs --n")
    elif cfg.command != "list" and cfg.scenario is None:
        raise ConfigError("scenario", f"required; valid ids: {', '.join(scenarios.scenario_ids())}")
    if cfg.plot is not None and cfg.command != "curve":
        raise ConfigError("plot", "only the curve command draws a plot")


def resolve_scenario(cfg: RunConfig) -> scenarios.Scenario:
    if cfg.scenario not in scenarios.scenario_ids():
        raise ConfigError("scenario", f"unknown id {cfg.scenario!r}; valid ids: {', '.join(scenarios.scenario_ids())}")
    base = scenarios.get(cfg.scenario)
    try:
        return base.with_params(**cfg.params)
    except ParameterError as exc:
        raise ConfigError("params", str(exc)) from None


def _checked_n(s: scenarios.Scenario, n: int, name: str = "n") -> int:
    try:
        return s.check_n(n)
    except DesignError as exc:
        raise ConfigError(name, str(exc)) from None


def _reps(cfg: RunConfig, s: Optional[scenarios.Scenario]) -> int:
    if cfg.reps is not None:
        return cfg.reps
    if s is not None and s.nested:
        return 500
    return engine.DEFAULT_REPS


def _seed(cfg: RunConfig) -> int:
    return engine.new_seed() if cfg.seed is None else cfg.seed


# ---------------------------------------------------------------------------
# Commands; each returns a list of report rows (dicts)
# ---------------------------------------------------------------------------


def cmd_power(cfg: RunConfig) -> list:
    s = resolve_scenario(cfg)
    n = _checked_n(s, cfg.n if cfg.n is not None else s.default_n)
    est = engine.estimate_power(s, n, cfg.alpha, _reps(cfg, s), _seed(cfg), cfg.invalid_policy, cfg.workers)
    return [est.as_report()]


def cmd_calibrate(cfg: RunConfig) -> list:
    s = resolve_scenario(cfg)
    n = _checked_n(s, cfg.n if cfg.n is not None else s.default_n)
    est = engine.estimate_size(s, n, cfg.alpha, _reps(cfg, s), _seed(cfg), cfg.invalid_policy, cfg.workers)
    row = est.as_report()
    row["params"] = dict(s.null_variant().params)
    return [row]


def cmd_curve(cfg: RunConfig) -> list:
    s = resolve_scenario(cfg)
    for n in cfg.n_list:
        _checked_n(s, n, "n_list")
    ests = engine.power_curve(s, cfg.n_list, cfg.alpha, _reps(cfg, s), _seed(cfg), cfg.invalid_policy, cfg.workers)
    if cfg.plot:
        write_curve_svg(ests, cfg.plot, s.id)
    return [e.as_report() for e in ests]


def cmd_solve(cfg: RunConfig) -> list:
    s = resolve_scenario(cfg)
    res = engine.solve_sample_size(s, cfg.target, cfg.alpha, _reps(cfg, s), _seed(cfg), cfg.invalid_policy,
                                   cfg.workers)
    row = res.estimate.as_report()
    row["target"] = res.target
    row["n_star"] = res.n_star
    row["trace"] = [[n, e.power, e.reps] for n, e in res.trace]
    return [row]


def cmd_ci_width(cfg: RunConfig) -> list:
    try:
        est = engine.ci_width(cfg.kind, cfg.n, cfg.level, cfg.reps or engine.DEFAULT_CI_REPS, _seed(cfg), **cfg.params)
    except ParameterError as exc:
        raise ConfigError("params", str(exc)) from None
    return [est.as_report()]


def cmd_oracle(cfg: RunConfig) -> list:
    s = resolve_scenario(cfg)
    n = _checked_n(s, cfg.n if cfg.n is not None else s.default_n)
    if not oracle.has_oracle(s):
        raise ConfigError("scenario", f"no analytic power for {s.id!r}")
    ap = oracle.for_scenario(s, n, cfg.alpha)
    return [{"scenario": s.id, "params": dict(s.params), "n": n, "alpha": cfg.alpha, "power": ap.power,
             "method": ap.method}]


def cmd_list(cfg: Optional[RunConfig] = None) -> list:
    return [
        {"scenario": s.id, "n": s.default_n, "granularity": s.granularity, "test": s.test_name,
         "params": dict(s.params), "title": s.title}
        for s in scenarios.catalog()
    ]


HANDLERS = {
    "power": cmd_power,
    "solve": cmd_solve,
    "curve": cmd_curve,
    "calibrate": cmd_calibrate,
    "ci-width": cmd_ci_width,
    "oracle": cmd_oracle,
    "list": cmd_list,
}


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _flat(value) -> str:
    if isinstance(value, (dict, list, tuple)):
        return json.dumps(value, separators=(",", ":"))
    return repr(value) if isinstance(value, float) else str(value)


def render(rows: list, fmt: str, single: bool) -> str:
    if fmt == "json":
        payload = rows[0] if single and len(rows) == 1 else rows
        return json.dumps(payload, indent=2) + "\n"
    columns = list(rows[0])
    for r in rows[1:]:
        columns += [c for c in r if c not in columns]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for r in rows:
            writer.writerow([_flat(r[c]) if c in r else "" for c in columns])
        return buf.getvalue()
    cells = [[_flat(r.get(c, "")) for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(line.rstrip() for line in lines) + "\n"


def write_curve_svg(estimates: list, path: str, title: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ns = [e.n for e in estimates]
    power = [e.power for e in estimates]
    lo = [e.power - e.ci95[0] for e in estimates]
    hi = [e.ci95[1] - e.power for e in estimates]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(ns, power, yerr=[lo, hi], marker="o", capsize=3)
    ax.axhline(0.8, color="grey", linestyle=":", linewidth=1)
    ax.set_xlabel("n")
    ax.set_ylabel("power")
    ax.set_ylim(0, 1)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = build_config(argv)
        rows = HANDLERS[cfg.command](cfg)
        text = render(rows, cfg.format, single=cfg.command not in ("curve", "list"))
    except ConfigError as exc:
        print(f"powersim: config error: {exc}", file=sys.stderr)
        return 2
    except (SimulationError, ArithmeticError) as exc:
        print(f"powersim: simulation error: {exc}", file=sys.stderr)
        return 3
    except (ParameterError, DesignError) as exc:
        print(f"powersim: config error: params: {exc}", file=sys.stderr)
        return 2
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
