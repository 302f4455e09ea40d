"""Command-line front end: tuning, exports, the rigidity battery and the self-test.

All outputs are written with sorted keys and fixed float formatting, so two
runs with the same configuration produce byte-identical JSON and CSV files.
Exit codes: 0 success, 2 failed check, 3 precision exhausted, 4 bad input.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import mpmath
import numpy as np

from . import finegrid, maps, partitions, renorm, rigidity
from .errors import BadInput, BicriticalError, PeriodicOrbitDetected, RationalInput
from .finegrid import GridConfig
from .numerics import ContinuedFraction, cf_digits, set_precision, working_precision
from .svg import decay_chart_svg

log = logging.getLogger("bicritical")

SCHEMA_VERSION = 1
PAIR_MODES = ("same", "rotated", "second")

TUNABLE = {
    "trig_bicritical": lambda p: (lambda a: maps.TrigBicritical(a, p.get("u", "0"), p.get("shift", "0"),
                                                                  p.get("b", "0"))),
    "arnold_multicritical": lambda p: (lambda a: maps.ArnoldMulticritical(a, int(p.get("N", 2)))),
}


def _default_maps() -> list:
    return [{"tune": {"family": "trig_bicritical", "parameters": {"u": "0"}, "digits": [1]}},
            {"tune": {"family": "trig_bicritical", "parameters": {"u": "0", "b": "0.5"}, "digits": [1]}}]


@dataclass
class ExperimentConfig:
    """Everything a run depends on; the defaults reproduce the published grid constants."""

    precision: int = 30
    maps: list = field(default_factory=_default_maps)
    pair: str = "second"
    rotation: str = "0.1"
    depth: int = 16
    n_range: list = field(default_factory=lambda: list(rigidity.DEFAULT_WINDOW))
    grid: dict = field(default_factory=lambda: GridConfig().to_dict())
    out: str = "out"
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.pair not in PAIR_MODES:
            raise BadInput(f"pair must be one of {PAIR_MODES}, got {self.pair!r}")
        if len(self.n_range) != 2 or self.n_range[0] > self.n_range[1]:
            raise BadInput("n_range must be [first, last] with first <= last")
        if not self.maps:
            raise BadInput("at least one map spec is needed")

    @property
    def grid_config(self) -> GridConfig:
        return GridConfig.from_dict(self.grid)

    @property
    def levels(self) -> range:
        return range(int(self.n_range[0]), int(self.n_range[1]) + 1)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise BadInput(f"unknown config fields {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise BadInput(f"config is not valid JSON: {exc}") from exc


# ---------------------------------------------------------------------------
# Serialization helpers
# ---------------------------------------------------------------------------

def jsonable(obj):
    """Plain JSON types; mpmath and numpy scalars become floats, tuples and sets lists."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (set, frozenset)):
        return sorted(jsonable(v) for v in obj)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating, mpmath.mpf)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, rigidity.DecaySeries):
        return obj.to_dict()
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    return str(obj)


def dump_json(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=1) + "\n"


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


# ---------------------------------------------------------------------------
# Maps from specs
# ---------------------------------------------------------------------------

def map_from_spec(spec: dict, default_depth: int = 16) -> maps.CircleMap:
    """A map either given directly ({family, parameters}) or tuned ({tune: {...}})."""
    if "tune" not in spec:
        return maps.map_from_dict(spec)
    t = spec["tune"]
    family = t.get("family", "trig_bicritical")
    if family not in TUNABLE:
        raise BadInput(f"family {family!r} cannot be tuned from the command line")
    digits = t.get("digits", [1])
    if not digits or any(int(d) < 1 for d in digits):
        raise BadInput("tuning digits must be positive integers")
    depth = int(t.get("depth", default_depth))
    return maps.tune_rotation(TUNABLE[family](t.get("parameters", {})),
                              ContinuedFraction(tuple(int(d) for d in digits)), depth)


def _seed_spec(text: str) -> dict:
    path = Path(text)
    if path.exists():
        text = path.read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise BadInput(f"--seed-map is neither a JSON file nor JSON text: {exc}") from exc


def _load_config(args) -> ExperimentConfig:
    if args.config:
        try:
            cfg = ExperimentConfig.from_json(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise BadInput(f"cannot read config: {exc}") from exc
    else:
        cfg = ExperimentConfig()
    if args.precision is not None:
        cfg.precision = args.precision
    if args.depth is not None:
        cfg.depth = args.depth
    if args.out is not None:
        cfg.out = args.out
    if args.seed_map is not None:
        cfg.maps = [_seed_spec(args.seed_map)] + cfg.maps[1:]
    return cfg


def _pair(cfg: ExperimentConfig):
    f = map_from_spec(cfg.maps[0], cfg.depth)
    if cfg.pair == "same":
        return f, f
    if cfg.pair == "rotated":
        return f, maps.rotated_copy(f, cfg.rotation)
    if len(cfg.maps) < 2:
        raise BadInput("pair mode 'second' needs two map specs")
    return f, map_from_spec(cfg.maps[1], cfg.depth)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_tune(args, cfg: ExperimentConfig) -> int:
    if args.family is not None:
        params = {k: v for k, v in (("u", args.u), ("b", args.b), ("N", args.N)) if v is not None}
        spec = {"tune": {"family": args.family, "parameters": params,
                         "digits": [int(d) for d in args.digits.split(",")], "depth": cfg.depth}}
    else:
        spec = cfg.maps[0]
    fmap = map_from_spec(spec, cfg.depth)
    doc = fmap.to_dict()
    doc["digits"] = list(maps.map_digits(fmap, cfg.depth).digits[:cfg.depth])
    if fmap.tuning is not None:
        doc["tuning"] = {"steps": fmap.tuning.steps, "bracket": [str(b) for b in fmap.tuning.bracket]}
    path = _write(Path(cfg.out), "map.json", dump_json(doc))
    print(f"tuned map written to {path}")
    return 0


def cmd_digits(args, cfg: ExperimentConfig) -> int:
    if args.value is not None:
        if "/" in args.value:
            r = Fraction(args.value)
            x = mpmath.mpf(r.numerator) / r.denominator
        else:
            x = mpmath.mpf(args.value)
        cf = cf_digits(x, args.count)
    else:
        fmap = map_from_spec(cfg.maps[0], cfg.depth) if args.a is None else None
        if fmap is None:
            fmap = maps.TrigBicritical(args.a, args.u or "0", "0", args.b or "0")
        try:
            cf = maps.rotation_number_digits(fmap, args.count)
        except PeriodicOrbitDetected as exc:
            raise RationalInput(f"the rotation number is rational: {exc}") from exc
    print(" ".join(str(d) for d in cf.digits))
    _write(Path(cfg.out), "digits.json", dump_json({"digits": list(cf.digits),
                                                     "denominators": list(cf.denominators)}))
    return 0


def cmd_partition(args, cfg: ExperimentConfig) -> int:
    fmap = map_from_spec(cfg.maps[0], cfg.depth)
    out = Path(cfg.out)
    part = partitions.standard_partition(fmap, args.critical, args.level)
    _write(out, f"partition_{args.level}.json", dump_json(part.to_dict()))
    _write(out, f"partition_{args.level}.svg", part.to_svg(title=f"P_{args.level}"))
    lo, hi = cfg.n_range
    report = partitions.real_bounds_report(fmap, args.critical, range(max(lo, 1), hi + 1))
    _write(out, "real_bounds.json", dump_json(report))
    print(f"P_{args.level}: {len(part)} atoms, sup C_n = {report['sup_C']:.4g}, n0 = {report['n0']}")
    return 0


def cmd_renorm(args, cfg: ExperimentConfig) -> int:
    out = Path(cfg.out)
    f, g = _pair(cfg)
    rows = []
    for n in cfg.levels:
        zf = renorm.normalize(renorm.extract_pair(f, args.critical, n))
        row = {"n": n, **renorm.pair_summary(zf)}
        try:
            nxt = renorm.normalize(renorm.extract_pair(f, args.critical, n + 1))
            row["semigroup_d0"] = renorm.pair_distance(renorm.renormalize(zf), nxt, 0)
        except BicriticalError as exc:
            row["semigroup_d0"] = None
            log.warning("semigroup check at level %d failed: %s", n, exc)
        rows.append(row)
    _write(out, "renorm_pairs.json", dump_json(rows))
    setup = rigidity.ConjugacyOnOrbits(f, g, config=cfg.grid_config)
    series = [rigidity.renorm_convergence(f, g, args.critical, k, cfg.levels, setup) for k in (0, 1)]
    for s in series:
        _write(out, f"{s.name}.csv", s.to_csv())
    print(" ".join(f"{s.name}: rate={s.rate} quality={s.fit_quality}" for s in series))
    return 0


def cmd_finegrid(args, cfg: ExperimentConfig) -> int:
    fmap = map_from_spec(cfg.maps[0], cfg.depth)
    out = Path(cfg.out)
    chain = finegrid.chain_for(fmap, cfg.grid_config)
    n = args.level
    grids = [chain.grid(m) for m in range(1, n + 1)]
    _write(out, f"aux_{n}.json", dump_json(chain.aux(n).to_dict()))
    _write(out, f"intermediate_{n}.json", dump_json(chain.intermediate(n).to_dict()))
    _write(out, f"grid_{n}.json", dump_json(grids[-1].to_dict()))
    _write(out, "grid_adjacency.csv", finegrid.adjacency_csv(grids))
    _write(out, "grids.svg", finegrid.grids_svg(grids, title=f"Q_1 .. Q_{n}"))
    reports = [g.report for g in grids]
    _write(out, "grid_report.json", dump_json({"schema_version": SCHEMA_VERSION, "levels": reports}))
    worst = max(r["adjacent_ratio"] for r in reports)
    print(f"Q_{n}: {len(grids[-1])} atoms, adjacent ratio <= {worst:.4g}, all axioms pass")
    return 0


def run_battery(cfg: ExperimentConfig) -> tuple:
    f, g = _pair(cfg)
    setup = rigidity.ConjugacyOnOrbits(f, g, config=cfg.grid_config)
    battery = rigidity.rigidity_battery(setup, cfg.levels)
    return setup, battery


def _oracle_failures(cfg: ExperimentConfig, battery: dict) -> list:
    names = ("d0", "d1", "interval_ratio", "criterion", "key_estimate")
    if cfg.pair == "same":
        bound = 1e-20
    elif cfg.pair == "rotated":
        bound = 1e-10
    else:
        return []
    return [f"{name} reaches {battery[name].max_value():.3e} > {bound:g}" for name in names
            if battery[name].max_value() > bound]


def cmd_verify(args, cfg: ExperimentConfig) -> int:
    out = Path(cfg.out)
    setup, battery = run_battery(cfg)
    series = [s for s in battery.values() if isinstance(s, rigidity.DecaySeries)]
    for s in series:
        _write(out, f"{s.name}.csv", s.to_csv())
    extras = {"cross_check": battery["cross_check"], "holder": battery["holder"],
              "criterion_histograms": battery["criterion"].extras["histograms"],
              "image_adjacent_ratio": battery["criterion"].extras["image_adjacent_ratio"],
              "free_point": battery["key_estimate"].extras["free_point"],
              "interval_ratio_limit": battery["interval_ratio"].extras["limit"]}
    # the output directory does not influence any result, so reruns elsewhere compare equal
    config = {k: v for k, v in cfg.to_dict().items() if k != "out"}
    doc = {"schema_version": SCHEMA_VERSION, "config": config,
           "maps": [setup.f.to_dict(), setup.g.to_dict()], "pairing": list(setup.pairing),
           "signature": maps.signature(setup.f, min(cfg.depth, 14)).as_dict(),
           "series": [{"name": s.name, "C": None if s.fit is None else s.fit[0], "rate": s.rate,
                       "quality": s.fit_quality, "claims_decay": s.claims_decay(),
                       "identically_zero": s.identically_zero} for s in series],
           "diagnostics": extras}
    _write(out, "manifest.json", dump_json(doc))
    _write(out, "decay.svg", decay_chart_svg([(s.name, s.values) for s in series if s.name != "interval_ratio_raw"],
                                             title="decay series"))
    grids = [setup.chain.grid(m) for m in range(1, min(cfg.levels[-1], 6) + 1)]
    _write(out, "grids.svg", finegrid.grids_svg(grids, title="fine grid of f"))
    for s in series:
        print(f"{s.name:20s} max={s.max_value():.3e} rate={s.rate} quality={s.fit_quality}")
    failures = _oracle_failures(cfg, battery)
    for msg in failures:
        print(f"oracle failure: {msg}", file=sys.stderr)
    if args.strict and cfg.pair == "second":
        failures += [f"{s.name} does not claim decay" for s in series
                     if s.name in ("d0", "d1", "interval_ratio", "criterion") and not s.claims_decay()]
    return 2 if failures else 0


def selftest_checks() -> list:
    """(name, passed, detail) for a small oracle battery that runs in seconds."""
    checks = []
    golden = cf_digits((mpmath.sqrt(5) - 1) / 2, 15)
    checks.append(("golden digits", golden.digits == (1,) * 15, list(golden.digits)))
    silver = cf_digits(mpmath.sqrt(2) - 1, 10)
    checks.append(("silver digits", silver.digits == (2,) * 10, list(silver.digits)))
    s0 = rigidity.schwarzian(rigidity.MobiusInterval(), "0.3", 1)
    checks.append(("Mobius Schwarzian vanishes", abs(s0) < mpmath.mpf("1e-20"), float(s0)))
    f = maps.tune_golden_trig("0.2", 12)
    x = mpmath.mpf("0.41")
    co, fd = rigidity.schwarzian(f, x, 2), rigidity.schwarzian_finite_difference(f, x, 2)
    rel = float(abs(co / fd - 1))
    checks.append(("Schwarzian cocycle vs finite differences", rel < 1e-6, rel))
    same = rigidity.ConjugacyOnOrbits(f, f)
    crit = rigidity.criterion_statistics(same, range(3, 7))
    checks.append(("criterion vanishes for g = f", crit.max_value() < 1e-20, crit.max_value()))
    rot = maps.rotated_copy(f, "0.1")
    d1 = rigidity.renorm_convergence(f, rot, 0, 1, range(3, 7))
    checks.append(("d1 vanishes for a rotated copy", d1.max_value() <= 1e-10, d1.max_value()))
    part = partitions.standard_partition(f, 0, 6)
    q = maps.map_digits(f, 8)
    checks.append(("P_6 atom count", len(part) == q.q(6) + q.q(7), len(part)))
    return checks


def cmd_selftest(args, cfg: ExperimentConfig) -> int:
    failed = 0
    for name, ok, detail in selftest_checks():
        print(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
        failed += not ok
    return 2 if failed else 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bicritical", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="experiment config (JSON)")
    parser.add_argument("--precision", type=int, help="working precision in decimal digits")
    parser.add_argument("--depth", type=int, help="tuning depth (number of matched digits)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed-map", help="map JSON (file or text) replacing the first map spec")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tune", help="tune a map to rotation digits and write its JSON")
    p.add_argument("--family", choices=sorted(TUNABLE))
    p.add_argument("--u")
    p.add_argument("--b")
    p.add_argument("--N")
    p.add_argument("--digits", default="1", help="comma-separated target digits, repeated periodically")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("digits", help="continued-fraction digits of a number or a rotation number")
    p.add_argument("count", type=int, nargs="?", default=12)
    p.add_argument("--value", help="a number in (0, 1), for instance 0.618 or 3/7")
    p.add_argument("--a", help="translation parameter of a trigonometric map")
    p.add_argument("--u")
    p.add_argument("--b")
    p.set_defaults(func=cmd_digits)

    p = sub.add_parser("partition", help="export P_n and the real-bounds report")
    p.add_argument("level", type=int)
    p.add_argument("--critical", type=int, default=0)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("renorm", help="pair summaries and d_k tables")
    p.add_argument("--critical", type=int, default=0)
    p.set_defaults(func=cmd_renorm)

    p = sub.add_parser("finegrid", help="auxiliary, intermediate and fine-grid exports with axiom report")
    p.add_argument("level", type=int)
    p.set_defaults(func=cmd_finegrid)

    p = sub.add_parser("verify", help="full rigidity battery for a map pair")
    p.add_argument("--strict", action="store_true", help="exit 2 when a decay claim fails its gate")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("selftest", help="oracle battery")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = _load_config(args)
        with working_precision(cfg.precision):
            return int(args.func(args, cfg))
    except BicriticalError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, TypeError) as exc:
        print(f"error (bad input): {exc}", file=sys.stderr)
        return BadInput.exit_code


if __name__ == "__main__":
    sys.exit(main())
