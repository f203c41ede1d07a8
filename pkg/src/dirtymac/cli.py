"""``dirtymac`` command line: rate regions, Monte Carlo runs and parameter sweeps.

Exit codes: 0 success, 1 a simulation check failed (report still written),
2 usage or validation error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .mac_sim import PRESETS, PresetError, break_nesting, build_preset, run_experiment
from .rate_regions import (ChannelParams, PowerGrid, Regime, classify_regime, compare_regions,
                           full_si_region, imbalanced_formula, mmse_alpha, nearly_formula,
                           regime_threshold, region_boundary)

COMMANDS = ("region", "simulate", "sweep")
AXES = ("e1e2", "p1", "p2", "q")
DEFAULT_SEED = 0xD1A7
DEFAULT_N = 10**6
MIN_SIM_N = 10**3

# config-file keys, identical to the long flag names
_KEYS = ("p1", "p2", "noise", "e1", "e2", "q", "preset", "n", "seed", "grid-points", "axis",
         "from", "to", "step", "format", "out", "workers", "break-nesting")


class ValidationError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    params: ChannelParams
    preset_id: str | None = None
    n: int = DEFAULT_N
    seed: int = DEFAULT_SEED
    grid_points: int = 1025
    sweep_axis: str | None = None
    sweep_from: float | None = None
    sweep_to: float | None = None
    sweep_step: float | None = None
    output_path: str | None = None
    format: str = "csv"
    workers: int = 1
    break_nesting: bool = False
    q_explicit: bool = field(default=False, repr=False)

    def sweep_values(self) -> list[float]:
        count = int(math.floor((self.sweep_to - self.sweep_from) / self.sweep_step + 1e-9)) + 1
        return [self.sweep_from + i * self.sweep_step for i in range(count)]

    def to_dict(self):
        d = asdict(self)
        d.pop("q_explicit")
        return d


# ---------------------------------------------------------------------------
# parsing

def _int(text):
    text = str(text).strip()
    try:
        return int(text, 0)
    except ValueError:
        value = float(text)
        if not value.is_integer():
            raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
        return int(value)


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


_TYPES = {"p1": float, "p2": float, "noise": float, "e1": float, "e2": float, "q": float,
          "preset": str, "n": _int, "seed": _int, "grid-points": _int, "axis": str,
          "from": float, "to": float, "step": float, "format": str, "out": str,
          "workers": _int, "break-nesting": _bool}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dirtymac",
        description="Rate regions and lattice-scheme simulation for the doubly dirty MAC "
                    "with estimated transmitter side information.")
    parser.add_argument("command", choices=COMMANDS)
    sup = argparse.SUPPRESS
    parser.add_argument("--config", default=sup, help="key = value file; flags override it")
    parser.add_argument("--p1", type=float, default=sup, help="user 1 power")
    parser.add_argument("--p2", type=float, default=sup, help="user 2 power")
    parser.add_argument("--noise", type=float, default=sup, help="channel noise variance N")
    parser.add_argument("--e1", type=float, default=sup, help="user 1 estimation distortion (default 0)")
    parser.add_argument("--e2", type=float, default=sup, help="user 2 estimation distortion (default 0)")
    parser.add_argument("--q", type=float, default=sup,
                        help="interference variance (default 1e4*max(p1, p2))")
    parser.add_argument("--preset", choices=PRESETS, default=sup)
    parser.add_argument("--n", type=_int, default=sup, help=f"samples per run (default {DEFAULT_N})")
    parser.add_argument("--seed", type=_int, default=sup, help=f"master seed (default {DEFAULT_SEED:#x})")
    parser.add_argument("--grid-points", type=_int, default=sup, help="envelope grid size (default 1025)")
    parser.add_argument("--axis", choices=AXES, default=sup, help="sweep axis")
    parser.add_argument("--from", dest="from", type=float, default=sup)
    parser.add_argument("--to", type=float, default=sup)
    parser.add_argument("--step", type=float, default=sup)
    parser.add_argument("--format", choices=("csv", "json"), default=sup)
    parser.add_argument("--out", default=sup, help="output path (default stdout)")
    parser.add_argument("--workers", type=_int, default=sup, help="threads for sample generation")
    parser.add_argument("--break-nesting", action="store_const", const=True, default=sup,
                        help="debug: detune user 2's lattice by 1%% (negative control)")
    return parser


def read_config_file(path) -> dict:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("_", "-")
            if key not in _KEYS:
                raise ValidationError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _TYPES[key](value)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise ValidationError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return values


def _resolve(command: str, values: dict) -> RunConfig:
    axis = values.get("axis")
    if command == "sweep":
        for key in ("axis", "from", "to", "step"):
            if key not in values:
                raise ValidationError(f"sweep needs --{key}")
        if axis not in AXES:
            raise ValidationError(f"axis must be one of {AXES}")
    swept = {"e1e2": ("e1", "e2"), "p1": ("p1",), "p2": ("p2",), "q": ("q",)}.get(axis, ()) \
        if command == "sweep" else ()
    missing = [k for k in ("p1", "p2", "noise") if k not in values and k not in swept]
    if missing:
        raise ValidationError("missing required parameter: " + ", ".join("--" + k for k in missing))
    if command == "simulate" and "preset" not in values:
        raise ValidationError("simulate needs --preset")
    if values.get("format", "csv") not in ("csv", "json"):
        raise ValidationError("format must be csv or json")

    # a swept parameter gets a placeholder that every sweep row overrides
    p1 = values.get("p1", values.get("from", 1.0) or 1.0)
    p2 = values.get("p2", values.get("from", 1.0) or 1.0)
    try:
        params = ChannelParams(p1=max(p1, 1e-300), p2=max(p2, 1e-300), noise=values["noise"],
                               e1=values.get("e1", 0.0), e2=values.get("e2", 0.0),
                               interference_power=values.get("q"))
    except ValueError as exc:
        raise ValidationError(str(exc)) from None

    cfg = RunConfig(
        command=command, params=params, preset_id=values.get("preset"),
        n=values.get("n", DEFAULT_N), seed=values.get("seed", DEFAULT_SEED),
        grid_points=values.get("grid-points", 1025), sweep_axis=axis if command == "sweep" else None,
        sweep_from=values.get("from"), sweep_to=values.get("to"), sweep_step=values.get("step"),
        output_path=values.get("out"), format=values.get("format", "csv"),
        workers=values.get("workers", 1), break_nesting=bool(values.get("break-nesting", False)),
        q_explicit="q" in values,
    )
    if cfg.grid_points < 16:
        raise ValidationError("grid-points must be at least 16")
    if command == "simulate" and cfg.n < MIN_SIM_N:
        raise ValidationError(f"n must be at least {MIN_SIM_N} for simulate")
    if cfg.n < 1 or cfg.workers < 1:
        raise ValidationError("n and workers must be positive")
    if not 0 <= cfg.seed < 2**64:
        raise ValidationError("seed must fit in 64 bits")
    if command == "sweep":
        if not cfg.sweep_step > 0:
            raise ValidationError("sweep step must be positive")
        if not cfg.sweep_to > cfg.sweep_from:
            raise ValidationError("sweep range must be nonempty and increasing (to > from)")
        lower = {"e1e2": 0.0}.get(axis)
        if lower is not None and cfg.sweep_from < lower:
            raise ValidationError("e1e2 sweep must start at a nonnegative value")
        if axis in ("p1", "p2", "q") and cfg.sweep_from <= 0:
            raise ValidationError(f"{axis} sweep must stay positive")
    return cfg


def parse_config(argv=None) -> RunConfig:
    """Parse argv (and an optional config file) into a validated :class:`RunConfig`.

    Raises SystemExit(2) on usage or validation errors, SystemExit(3) when the
    config file cannot be read.
    """
    parser = build_parser()
    ns = vars(parser.parse_args(argv))
    command = ns.pop("command")
    values = {}
    try:
        if "config" in ns:
            values.update(read_config_file(ns.pop("config")))
        values.update({k.replace("_", "-"): v for k, v in ns.items()})
        return _resolve(command, values)
    except OSError as exc:
        print(f"dirtymac: cannot read config file: {exc}", file=sys.stderr)
        sys.exit(3)
    except ValidationError as exc:
        parser.error(str(exc))


# ---------------------------------------------------------------------------
# output

def fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return f"{x:.12g}"
    if x is None:
        return ""
    return str(x)


def _round(obj):
    if isinstance(obj, float):
        return float(f"{obj:.12g}") if math.isfinite(obj) else str(obj)
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, Regime):
        return obj.value
    return obj


def to_json(obj) -> str:
    return json.dumps(_round(obj), indent=2, ensure_ascii=False) + "\n"


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(row.get(h)) for h in header])
    return buf.getvalue()


def write_atomic(path, text: str):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(cfg: RunConfig, text: str, suffix: str | None = None):
    if cfg.output_path is None:
        sys.stdout.write(text)
        return
    path = Path(cfg.output_path)
    if suffix is not None:
        path = path.with_suffix(suffix)
    write_atomic(path, text)


# ---------------------------------------------------------------------------
# commands

def _alphas(params):
    out = {"alpha_user1": mmse_alpha("ImbalancedUser1", params),
           "alpha_user2": mmse_alpha("ImbalancedUser2", params),
           "alpha_balanced": None, "alpha_nearly": None}
    regime = classify_regime(params)
    if regime is Regime.EXACTLY_BALANCED:
        out["alpha_balanced"] = mmse_alpha("Balanced", params)
    if regime is not Regime.IMBALANCED:
        out["alpha_nearly"] = mmse_alpha("GeneralNearly", params)
    return out


REGION_HEADER = ("p1", "p2", "noise", "e1", "e2", "regime", "regime_full_si", "rate_partial",
                 "rate_full_si", "gap", "relation", "raw_partial", "alpha_user1", "alpha_user2",
                 "alpha_balanced", "alpha_nearly")


def region_summary(params: ChannelParams, grid: PowerGrid):
    partial = region_boundary(params, grid)
    full = full_si_region(params, grid)
    cmp = compare_regions(partial, full)
    regime = partial.regime
    raw = (imbalanced_formula(params.p1, params.p2, params.residual) if regime is Regime.IMBALANCED
           else nearly_formula(params.p1, params.p2, params.residual))
    row = {"p1": params.p1, "p2": params.p2, "noise": params.noise, "e1": params.e1, "e2": params.e2,
           "regime": regime.value, "regime_full_si": full.regime.value,
           "rate_partial": partial.sum_rate, "rate_full_si": full.sum_rate, "gap": cmp.gap,
           "relation": cmp.relation, "raw_partial": raw}
    row.update(_alphas(params))
    return row, partial, full


def cmd_region(cfg: RunConfig) -> int:
    grid = PowerGrid(cfg.grid_points)
    row, partial, full = region_summary(cfg.params, grid)
    envelope = [(p.x, p.raw, p.enveloped) for p in partial.envelope]
    if cfg.format == "json":
        doc = {"config": cfg.to_dict(), "summary": row,
               "partial_region": {"vertices": partial.vertices, "sum_rate": partial.sum_rate},
               "full_si_region": {"vertices": full.vertices, "sum_rate": full.sum_rate},
               "envelope": [{"x": x, "raw": r, "enveloped": e} for x, r, e in envelope]}
        _emit(cfg, to_json(doc))
    else:
        _emit(cfg, to_csv(REGION_HEADER, [row]))
        if envelope and cfg.output_path is not None:
            path = Path(cfg.output_path)
            rows = [{"x": x, "raw": r, "enveloped": e} for x, r, e in envelope]
            write_atomic(path.with_name(path.stem + "_envelope.csv"), to_csv(("x", "raw", "enveloped"), rows))
    return 0


SIM_HEADER = ("preset_id", "n", "seed", "measured_effective_noise_power",
              "analytic_effective_noise_power", "effective_noise_stderr", "equivalence_max_residual",
              "empirical_sinr", "analytic_sinr", "scalar_rate_bound", "uniformity_pvalue",
              "independence_stat", "passed")


def _simulate(cfg: RunConfig, params: ChannelParams):
    scheme = build_preset(cfg.preset_id, params)
    if cfg.break_nesting:
        scheme = break_nesting(scheme)
    return run_experiment(cfg.preset_id, params, cfg.n, cfg.seed, cfg=scheme, workers=cfg.workers)


def cmd_simulate(cfg: RunConfig) -> int:
    report = _simulate(cfg, cfg.params)
    doc = {"config": cfg.to_dict(), "report": report.to_dict()}
    summary = to_csv(SIM_HEADER, [report.to_dict()])
    if cfg.output_path is None:
        sys.stdout.write(to_json(doc) if cfg.format == "json" else summary)
    else:
        _emit(cfg, to_json(doc), ".json")
        _emit(cfg, summary, ".csv")
    for name, ok in report.checks.items():
        if not ok:
            print(f"check failed: {name}", file=sys.stderr)
    return 0 if report.passed else 1


SWEEP_HEADER = ("x", "rate_partial", "rate_full_si", "regime", "boundary", "rate_imbalanced",
                "rate_nearly_raw", "p1", "p2", "e1", "e2", "q")
SWEEP_SIM_HEADER = ("measured_effective_noise_power", "analytic_effective_noise_power",
                    "effective_noise_stderr", "empirical_sinr", "equivalence_max_residual",
                    "sim_status")


def _sweep_params(cfg: RunConfig, x: float) -> ChannelParams:
    p = cfg.params
    if cfg.sweep_axis == "e1e2":
        p = p.replace(e1=x / 2, e2=x / 2)
    elif cfg.sweep_axis == "p1":
        p = p.replace(p1=x)
    elif cfg.sweep_axis == "p2":
        p = p.replace(p2=x)
    else:
        return p.replace(interference_power=x)
    if not cfg.q_explicit:
        p = p.replace(interference_power=1e4 * max(p.p1, p.p2))
    return p


def regime_crossings(cfg: RunConfig) -> list[float]:
    """Axis values inside the sweep range where the regime threshold is met exactly."""
    p, lo, hi = cfg.params, cfg.sweep_from, cfg.sweep_to
    out = []
    if cfg.sweep_axis == "e1e2":
        out.append(regime_threshold(p.p1, p.p2) - p.noise)
    elif cfg.sweep_axis in ("p1", "p2"):
        other = p.p2 if cfg.sweep_axis == "p1" else p.p1
        r = p.residual
        out.append((r + other) ** 2 / other)  # swept power above the other
        disc = other - 4 * r
        if disc >= 0:  # swept power below the other: sqrt(x*other) - x = r
            for sign in (-1.0, 1.0):
                out.append(((math.sqrt(other) + sign * math.sqrt(disc)) / 2) ** 2)
    return sorted(x for x in out if lo < x < hi)


def sweep_rows(cfg: RunConfig):
    grid = PowerGrid(cfg.grid_points)
    xs = [(x, False) for x in cfg.sweep_values()]
    existing = {round(x, 12) for x, _ in xs}
    xs += [(x, True) for x in regime_crossings(cfg) if round(x, 12) not in existing]
    xs.sort()
    rows = []
    for x, boundary in xs:
        params = _sweep_params(cfg, x)
        summary, _, _ = region_summary(params, grid)
        r = params.residual
        row = {"x": x, "rate_partial": summary["rate_partial"], "rate_full_si": summary["rate_full_si"],
               "regime": summary["regime"], "boundary": boundary,
               "rate_imbalanced": imbalanced_formula(params.p1, params.p2, r),
               "rate_nearly_raw": nearly_formula(params.p1, params.p2, r),
               "p1": params.p1, "p2": params.p2, "e1": params.e1, "e2": params.e2,
               "q": params.interference_power}
        if cfg.preset_id is not None:
            try:
                rep = _simulate(cfg, params)
            except PresetError as exc:
                row["sim_status"] = f"precondition: {exc}"
            else:
                row.update({k: getattr(rep, k) for k in SWEEP_SIM_HEADER[:-1]})
                row["sim_status"] = "pass" if rep.passed else "fail"
        rows.append(row)
    return rows


def cmd_sweep(cfg: RunConfig) -> int:
    rows = sweep_rows(cfg)
    header = SWEEP_HEADER + (SWEEP_SIM_HEADER if cfg.preset_id is not None else ())
    if cfg.format == "json":
        _emit(cfg, to_json({"config": cfg.to_dict(), "rows": rows}))
    else:
        _emit(cfg, to_csv(header, rows))
    return 0


_DISPATCH = {"region": cmd_region, "simulate": cmd_simulate, "sweep": cmd_sweep}


def main(argv=None) -> int:
    cfg = parse_config(argv)
    try:
        return _DISPATCH[cfg.command](cfg)
    except PresetError as exc:
        print(f"dirtymac: precondition violated: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"dirtymac: I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
