"""Command-line front end: scene files in, result documents out.

Verbs::

    schwarzleaf run <scene> [--out DIR] [--jobs N]
    schwarzleaf list-checks
    schwarzleaf describe-check <name>
    schwarzleaf export-mesh <scene> <scenario> [--level L] [--out FILE]

A scene is a TOML document with ``[profile]``, ``[fiber]``,
``[verification]``, ``[output]`` tables, a list of ``[[immersion]]``
entries and optional seeded ``[[suite]]`` entries.  Bundled scenes can be
named without a path (``schwarzleaf run minkowski_cone.scene``).  The
output directory is taken from ``--out``, then ``$SCHWARZLEAF_OUT``, then the
scene.  Exit status: 0 all checks passed, 1 some check failed, 2 bad
configuration.
"""

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import List

import numpy as np

from . import base2d, expr, verify
from .errors import (ConfigError, DomainError, GeometryError, NotSpacelike, UnknownCheck,
                     UnsupportedBackend, UnsupportedDimension, UnsupportedSurface)
from .fiber import export_off

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ENV_OUT = "SCHWARZLEAF_OUT"
EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
PROVENANCES = ("leaf_xi", "leaf_eta", "slice", "graph")
# errors that mean the scene asked for something impossible
CONFIG_ERRORS = (ConfigError, DomainError, NotSpacelike, UnknownCheck,
                 UnsupportedBackend, UnsupportedDimension, UnsupportedSurface)


@dataclass
class Scene:
    name: str
    spec: base2d.ProfileSpec
    scenarios: List[verify.Scenario]
    checks: List[str]
    seed: int = 0
    out_dir: str = ""
    formats: List[str] = field(default_factory=lambda: ["json", "csv"])

    def scenario(self, name):
        for s in self.scenarios:
            if s.name == name:
                return s
        raise ConfigError(f"scene {self.name!r} has no scenario {name!r}; "
                          f"known: {sorted(s.name for s in self.scenarios)}")


# --- scene parsing ------------------------------------------------------------

def _table(doc, key, required=True):
    val = doc.get(key)
    if val is None:
        if required:
            raise ConfigError(f"scene is missing the [{key}] table")
        return {}
    if not isinstance(val, dict):
        raise ConfigError(f"[{key}] must be a table")
    return val


def _unknown(tab, allowed, where):
    extra = sorted(set(tab) - set(allowed))
    if extra:
        raise ConfigError(f"unknown keys in {where}: {extra}")


def _warping(text):
    text = str(text).strip()
    if text in ("r", "radial"):
        return base2d.Warping("radial")
    if text in ("1", "one"):
        return base2d.Warping("one")
    return base2d.Warping.custom(text)


def _profile(tab):
    _unknown(tab, {"mass", "charge", "cosmo", "fiber_dim", "warping", "domain_scan", "component",
                   "tortoise_ref"}, "[profile]")
    if "domain_scan" not in tab:
        raise ConfigError("[profile] needs a radial 'domain_scan' range [lo, hi]")
    spec = base2d.ProfileSpec(
        mass=float(tab.get("mass", 0.0)),
        charge=float(tab.get("charge", 0.0)),
        cosmo=float(tab.get("cosmo", 0.0)),
        fiber_dim=int(tab.get("fiber_dim", 2)),
        warping=_warping(tab.get("warping", "r")),
        tortoise_ref=tab.get("tortoise_ref"),
    )
    scan = tab["domain_scan"]
    if len(scan) != 2 or not float(scan[0]) < float(scan[1]):
        raise ConfigError(f"bad radial scan {scan!r}")
    return spec.with_domain((float(scan[0]), float(scan[1])), tab.get("component"))


def _field(val, where):
    if isinstance(val, (int, float)):
        return float(val)
    if isinstance(val, str):
        return expr.parse(val)
    raise ConfigError(f"{where} must be a number or an expression string")


def _positive_list(vals, where):
    vals = [int(x) for x in vals]
    if not vals or any(x <= 0 for x in vals):
        raise ConfigError(f"{where} must be a non-empty list of positive integers")
    return vals


def _fiber(tab):
    _unknown(tab, {"kind", "levels", "chart_shapes", "chart_band"}, "[fiber]")
    kind = tab.get("kind", "sphere")
    if kind not in ("sphere", "torus"):
        raise ConfigError(f"unsupported fiber kind {kind!r}")
    out = {"fiber_kind": kind}
    if "levels" in tab:
        out["levels"] = _positive_list(tab["levels"], "fiber.levels")
    if "chart_shapes" in tab:
        shapes = [tuple(_positive_list(s, "fiber.chart_shapes entry")) for s in tab["chart_shapes"]]
        if any(len(s) != 2 for s in shapes):
            raise ConfigError("chart shapes are pairs [n_theta, n_phi]")
        out["chart_shapes"] = shapes
    if "chart_band" in tab:
        out["chart_band"] = tuple(float(x) for x in tab["chart_band"])
    return out


def _checks(names, where):
    names = list(names)
    for n in names:
        if n not in verify.CHECKS:
            raise UnknownCheck(f"{where}: unknown check {n!r}")
    return names


def _scenario_from(entry, spec, fiber, checks, tolerances, seed, where):
    _unknown(entry, {"name", "provenance", "v", "u", "c", "t0", "r0", "checks", "expect",
                     "tolerances"}, where)
    if "name" not in entry:
        raise ConfigError(f"{where} needs a name")
    prov = entry.get("provenance")
    if prov not in PROVENANCES:
        raise ConfigError(f"{where}: provenance must be one of {PROVENANCES}, not {prov!r}")
    kw = dict(fiber)
    if prov in ("leaf_xi", "leaf_eta", "graph"):
        if "v" not in entry:
            raise ConfigError(f"{where}: provenance {prov} needs v")
        kw["v"] = _field(entry["v"], f"{where}.v")
    if prov == "graph":
        kw["u"] = _field(entry.get("u", 0.0), f"{where}.u")
    if prov == "slice":
        if "r0" not in entry:
            raise ConfigError(f"{where}: slice needs r0")
        kw["r0"] = float(entry["r0"])
        kw["t0"] = float(entry.get("t0", 0.0))
    tol = dict(tolerances)
    tol.update({k: float(v) for k, v in entry.get("tolerances", {}).items()})
    return verify.Scenario(
        name=str(entry["name"]), spec=spec, provenance=prov, c=float(entry.get("c", 0.0)),
        checks=_checks(entry.get("checks", checks), where), tolerances=tol,
        expect=dict(entry.get("expect", {})), seed=seed, **kw)


def _suite(entry, spec, fiber, checks, tolerances, where):
    _unknown(entry, {"name", "provenance", "count", "base", "amplitude", "degree", "seed",
                     "checks", "expect", "tolerances", "u_amplitude", "c"}, where)
    prov = entry.get("provenance", "leaf_xi")
    count = int(entry.get("count", 0))
    if count <= 0:
        raise ConfigError(f"{where}: count must be positive")
    seed = int(entry.get("seed", 0))
    rng = np.random.default_rng(seed)
    base = float(entry.get("base", 4.0))
    amp = float(entry.get("amplitude", 0.1))
    deg = int(entry.get("degree", 2))
    kind = fiber.get("fiber_kind", "sphere")
    out = []
    for i in range(count):
        item = {"name": f"{entry.get('name', 'suite')}_{i:02d}", "provenance": prov,
                "checks": entry.get("checks", checks), "expect": entry.get("expect", {}),
                "tolerances": entry.get("tolerances", {}), "c": entry.get("c", 0.0)}
        if prov == "slice":
            item["r0"] = base * (1.0 + amp * rng.uniform(-1.0, 1.0))
        else:
            item["v"] = verify.random_profile_expr(rng, base, amp, deg, kind)
        if prov == "graph":
            ua = float(entry.get("u_amplitude", 0.1))
            item["u"] = verify.random_perturbation_expr(rng, ua, deg, kind) if ua > 0 else 0.0
        out.append(_scenario_from(item, spec, fiber, checks, tolerances, seed + i, f"{where}[{i}]"))
    return out


def parse_scene(text, default_name="scene"):
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"scene is not valid TOML: {exc}") from None
    _unknown(doc, {"name", "profile", "fiber", "verification", "output", "immersion", "suite"},
             "scene")
    spec = _profile(_table(doc, "profile"))
    fiber = _fiber(_table(doc, "fiber", required=False))
    ver = _table(doc, "verification", required=False)
    _unknown(ver, {"checks", "tolerances", "seed"}, "[verification]")
    checks = _checks(ver.get("checks", []), "[verification]")
    tolerances = {k: float(v) for k, v in ver.get("tolerances", {}).items()}
    seed = int(ver.get("seed", 0))
    out = _table(doc, "output", required=False)
    _unknown(out, {"dir", "formats"}, "[output]")
    formats = list(out.get("formats", ["json", "csv"]))
    bad = sorted(set(formats) - {"json", "csv", "profile"})
    if bad:
        raise ConfigError(f"unknown output formats {bad}")
    scenarios = []
    for i, entry in enumerate(doc.get("immersion", [])):
        scenarios.append(_scenario_from(entry, spec, fiber, checks, tolerances, seed, f"immersion[{i}]"))
    for i, entry in enumerate(doc.get("suite", [])):
        scenarios.extend(_suite(entry, spec, fiber, checks, tolerances, f"suite[{i}]"))
    if not scenarios:
        raise ConfigError("scene defines no immersions")
    names = [s.name for s in scenarios]
    dup = sorted({n for n in names if names.count(n) > 1})
    if dup:
        raise ConfigError(f"duplicate scenario names {dup}")
    name = str(doc.get("name", default_name))
    return Scene(name, spec, sorted(scenarios, key=lambda s: s.name), checks, seed,
                 str(out.get("dir", "")), formats)


def bundled_scenes():
    root = resources.files("schwarzleaf").joinpath("scenes")
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".scene"))


def _resolve(path):
    p = Path(path)
    if p.exists():
        return p.read_text(), p.stem
    for name in (p.name, p.name + ".scene"):
        if name in bundled_scenes():
            return resources.files("schwarzleaf").joinpath("scenes", name).read_text(), Path(name).stem
    raise ConfigError(f"scene file {path!r} not found (bundled: {bundled_scenes()})")


def load_scene(path):
    text, stem = _resolve(path)
    return parse_scene(text, stem)


# --- running ------------------------------------------------------------------

def _run_scenario(scn):
    """Run every check of one scenario; returns ``(name, results, error)``."""
    results = {}
    for name in sorted(scn.checks):
        try:
            results[name] = verify.run_check(scn, name)
        except CONFIG_ERRORS as exc:
            idx = getattr(exc, "index", None)
            where = f" (vertex {idx})" if idx is not None else ""
            return scn.name, results, f"scenario {scn.name!r}, check {name!r}{where}: {exc}"
        except GeometryError as exc:
            results[name] = verify.CheckResult(name, verify.CHECKS[name].kind, float("nan"),
                                               float("nan"), "error", note=f"{type(exc).__name__}: {exc}")
    return scn.name, results, None


def _spec_dict(spec):
    return {"mass": spec.mass, "charge": spec.charge, "cosmo": spec.cosmo,
            "fiber_dim": spec.fiber_dim, "warping": spec.warping.label,
            "domain": list(spec.domain), "tortoise_ref": spec.ref}


def _scenario_doc(scene, scn, results):
    def show(val):
        return str(val) if val is not None else None
    return verify._clean({
        "scene": scene.name,
        "scenario": scn.name,
        "provenance": scn.provenance,
        "profile": _spec_dict(scn.spec),
        "fiber": {"kind": scn.fiber_kind, "levels": scn.levels,
                  "chart_shapes": [list(s) for s in scn.chart_shapes]},
        "immersion": {"v": show(scn.v), "u": show(scn.u), "c": scn.c, "t0": scn.t0, "r0": scn.r0},
        "seed": scn.seed,
        "checks": {name: results[name].as_dict() for name in sorted(results)},
    })


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_outputs(scene, out_dir, docs, table):
    out_dir.mkdir(parents=True, exist_ok=True)
    if "json" in scene.formats:
        for name in sorted(docs):
            _write_json(out_dir / f"{name}.json", docs[name])
    if "csv" in scene.formats:
        with open(out_dir / "convergence.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["scenario", "check", "resolution", "h", "residual", "verdict", "order"])
            for scn_name, chk, res in table:
                order = res.refinement_orders[0] if res.refinement_orders else ""
                rows = res.levels or [{"resolution": "", "h": "", "residual": res.residual,
                                       "verdict": res.verdict}]
                for row in rows:
                    reso = row["resolution"]
                    reso = "x".join(str(x) for x in reso) if isinstance(reso, (list, tuple)) else reso
                    w.writerow([scn_name, chk, reso, _num(row["h"]), _num(row["residual"]),
                                row["verdict"], _num(order)])
    if "profile" in scene.formats:
        lo, hi = scene.spec.domain
        hi = min(hi, lo + 100.0)
        r = np.linspace(lo, hi, 402)[1:-1]
        pv = base2d.profile_eval(scene.spec, r)
        rs = base2d.tortoise(scene.spec, r)
        with open(out_dir / "radial_profile.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["r", "f2", "ffprime", "tortoise"])
            for row in zip(r, pv.f2, pv.ffp, rs):
                w.writerow([_num(x) for x in row])


def _num(x):
    if x == "" or x is None:
        return ""
    return repr(float(x))


def run_scene(path, out_dir=None, jobs=1, stream=None):
    """Run a scene; returns ``(exit_status, summary_dict)``."""
    stream = stream or sys.stdout
    scene = load_scene(path)
    out = Path(out_dir or os.environ.get(ENV_OUT) or scene.out_dir or Path("schwarzleaf_out") / scene.name)
    if jobs > 1 and len(scene.scenarios) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_scenario, scene.scenarios))
    else:
        outcomes = [_run_scenario(s) for s in scene.scenarios]
    errors = [err for _, _, err in outcomes if err]
    if errors:
        raise ConfigError("; ".join(errors))
    by_name = {s.name: s for s in scene.scenarios}
    docs, table, verdicts = {}, [], {}
    for name, results, _ in sorted(outcomes, key=lambda o: o[0]):
        docs[name] = _scenario_doc(scene, by_name[name], results)
        verdicts[name] = {chk: results[chk].verdict for chk in sorted(results)}
        table.extend((name, chk, results[chk]) for chk in sorted(results))
    passed = all(r.passed for _, _, r in table)
    summary = {
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "scene": scene.name,
        "profile": verify._clean(_spec_dict(scene.spec)),
        "scenarios": verdicts,
        "n_checks": len(table),
        "n_failed": sum(not r.passed for _, _, r in table),
        "passed": passed,
    }
    _write_outputs(scene, out, docs, table)
    if "json" in scene.formats:
        _write_json(out / "summary.json", summary)
    _print_table(table, stream)
    print(f"{len(table) - summary['n_failed']}/{len(table)} checks passed; results in {out}", file=stream)
    return (EXIT_PASS if passed else EXIT_FAIL), summary


def _print_table(table, stream):
    w = max([8] + [len(n) for n, _, _ in table])
    c = max([5] + [len(k) for _, k, _ in table])
    for name, chk, res in table:
        order = res.refinement_orders[0] if res.refinement_orders else None
        order = f"  order {order:.2f}" if order is not None else ""
        print(f"{name:<{w}}  {chk:<{c}}  {res.verdict:<5}  residual {res.residual:.3e}"
              f"  tol {res.tolerance:.1e}{order}", file=stream)


def export_mesh(path, scenario, level=None, out=None):
    scene = load_scene(path)
    scn = scene.scenario(scenario)
    level = scn.levels[-1] if level is None else int(level)
    fd = scn.mesh(level)
    im = scn.build(fd)
    target = Path(out or f"{scenario}_L{level}.off")
    export_off(fd, target, im.v)
    return target


# --- entry point --------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="schwarzleaf", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="verb", required=True)
    p = sub.add_parser("run", help="run every check requested by a scene")
    p.add_argument("scene", help="scene file path or bundled scene name")
    p.add_argument("--out", default=None, help=f"output directory (overrides ${ENV_OUT})")
    p.add_argument("--jobs", type=int, default=1, help="scenarios run in parallel")
    sub.add_parser("list-checks", help="list registered checks")
    p = sub.add_parser("describe-check", help="describe one check and its source")
    p.add_argument("name")
    p = sub.add_parser("export-mesh", help="write a scenario's mesh (OFF, v per vertex)")
    p.add_argument("scene")
    p.add_argument("scenario")
    p.add_argument("--level", type=int, default=None)
    p.add_argument("--out", default=None)
    sub.add_parser("list-scenes", help="list bundled scenes")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "run":
            status, _ = run_scene(args.scene, args.out, args.jobs)
            return status
        if args.verb == "list-checks":
            for name in verify.list_checks():
                print(f"{name:<26} {verify.CHECKS[name].summary}")
            return EXIT_PASS
        if args.verb == "describe-check":
            print(verify.describe_check(args.name))
            return EXIT_PASS
        if args.verb == "export-mesh":
            print(export_mesh(args.scene, args.scenario, args.level, args.out))
            return EXIT_PASS
        if args.verb == "list-scenes":
            for name in bundled_scenes():
                print(name)
            return EXIT_PASS
    except CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
