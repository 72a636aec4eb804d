"""Command line: certify, atlas, verify, growth, selftest.

Exit codes: 0 pass, 1 verification or certification failure, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Sequence

from . import certcalc as cc
from .atlas import AtlasError, build_atlas, growth_fit
from .config import AtlasConfig, VerifyConfig
from .expr import as_number, number_to_json
from .harness import Report, digest, emit_report, verify_atlas_doc
from .prepared import FamilyError, check_c1_bounded, parse_family, wall_prepared_check

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _load_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc


def _load_family(path: str):
    doc = _load_json(path)
    try:
        return doc, parse_family(doc)
    except FamilyError as exc:
        raise InputError("invalid family: " + "; ".join(exc.errors)) from exc


def _t_values(fam, raw: Sequence[str] | None):
    if raw is None:
        return tuple((lo + hi) / 2 for lo, hi in fam.T)
    vals = []
    for item in raw:
        vals.extend(v for v in item.split(",") if v)
    try:
        t = tuple(as_number(v) for v in vals)
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad --t value: {exc}") from exc
    try:
        fam.check_t(t)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    return t


def _write(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _config_section(args, name: str) -> dict:
    if not args.config:
        return {}
    section = _load_json(args.config).get(name, {})
    if not isinstance(section, dict):
        raise InputError(f"{args.config}: \"{name}\" must be an object")
    return section


def _atlas_config(args, require_r: bool = False) -> AtlasConfig:
    doc = _config_section(args, "atlas")
    r = getattr(args, "r", None)
    if require_r and r is None and "r" not in doc:
        raise InputError("--r is required (or set atlas.r in --config)")
    return AtlasConfig.from_mapping(doc).merged(r=r, mode="improved" if args.improved else None)


def _verify_config(args) -> VerifyConfig:
    return VerifyConfig.from_mapping(_config_section(args, "verify")).merged(samples=args.samples, margin=args.margin, tol=args.tol, seed=args.seed,
                       max_charts=args.max_charts, coverage=args.coverage)


def cmd_certify(args) -> int:
    doc, fam = _load_family(args.family)
    t = _t_values(fam, args.t)
    cfg = _atlas_config(args)
    c1 = check_c1_bounded(fam, None, cfg.depth)
    diag = wall_prepared_check(fam, None, cfg.depth)
    rep = Report({"input_digest": digest(doc), "r": cfg.r, "t": [number_to_json(v) for v in t],
                  "mode": cfg.mode})
    rep.sections["c1_bounded"] = {"bounds": c1.bounds, "failures": c1.failures,
                                  "verdict": "pass" if c1.ok else "fail"}
    rep.sections["walls"] = {"issues": diag.issues, "verdict": "pass" if diag.ok else "fail"}
    if c1.ok and diag.ok:
        try:
            atlas = build_atlas(fam, t, cfg.r, cfg.mode, cfg.depth)
            rep.sections["certificate"] = {"composite": atlas.certificate.to_json(),
                                           "A_double_prime": atlas.a2, "charts": atlas.count,
                                           "warnings": atlas.warnings, "verdict": "pass"}
            rep.audit = atlas.audit
        except AtlasError as exc:
            rep.sections["certificate"] = {"error": str(exc), "stage": exc.stage, "verdict": "fail"}
    _write(emit_report(rep), args.output)
    return EXIT_OK if rep.ok else EXIT_FAIL


def cmd_atlas(args) -> int:
    _, fam = _load_family(args.family)
    t = _t_values(fam, args.t)
    cfg = _atlas_config(args, require_r=True)
    atlas = build_atlas(fam, t, cfg.r, cfg.mode, cfg.depth)
    for w in atlas.warnings:
        print(f"warning: {w}", file=sys.stderr)
    _write(json.dumps(atlas.to_json(include_audit=args.audit), sort_keys=True, indent=2) + "\n",
           args.output)
    print(f"{atlas.count} charts (side {atlas.charts.grid.side}, A'' = {atlas.a2:.6g})", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    doc = _load_json(args.atlas)
    if not isinstance(doc, dict) or "charts" not in doc:
        raise InputError(f"{args.atlas} is not an atlas document")
    cfg = _verify_config(args)
    rep = verify_atlas_doc(doc, cfg.samples, cfg.margin, cfg.tol, cfg.seed, cfg.max_charts, cfg.coverage)
    _write(emit_report(rep), args.output)
    norms = rep.sections["norms"]
    worst = max((c["max_norm"] for c in norms["charts"]), default=0.0)
    print(f"{norms['charts_checked']}/{norms['charts_total']} charts checked, max norm {worst:.12g}: "
          f"{'pass' if rep.ok else 'FAIL'}", file=sys.stderr)
    return EXIT_OK if rep.ok else EXIT_FAIL


def cmd_growth(args) -> int:
    _, fam = _load_family(args.family)
    t = _t_values(fam, args.t)
    if args.r_max - args.r_min < 2:
        raise InputError("growth needs at least 3 values of r")
    mode = _atlas_config(args).mode
    fit = growth_fit(fam, t, range(args.r_min, args.r_max + 1), mode)
    rep = Report({"t": [number_to_json(v) for v in t], "mode": mode,
                  "r_min": args.r_min, "r_max": args.r_max})
    rep.growth = fit.table
    rep.sections["fit"] = {"slope": fit.slope, "intercept": fit.intercept}
    _write(emit_report(rep), args.output)
    print(f"fitted exponent {fit.slope:.4f}", file=sys.stderr)
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_selftest
    return EXIT_OK if run_selftest(verbose=not args.quiet) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mildatlas", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("certify", help="check a family and emit the certificate audit")
    c.add_argument("family")
    c.add_argument("--t", nargs="+")
    c.add_argument("--r", type=int)
    c.add_argument("--config", help="JSON file with \"atlas\" settings")
    c.add_argument("--improved", action="store_true")
    c.add_argument("-o", "--output")
    c.set_defaults(fn=cmd_certify)

    a = sub.add_parser("atlas", help="build an atlas for one parameter value")
    a.add_argument("family")
    a.add_argument("--t", nargs="+")
    a.add_argument("--r", type=int)
    a.add_argument("--config", help="JSON file with \"atlas\" settings")
    a.add_argument("--improved", action="store_true")
    a.add_argument("--audit", action="store_true", help="embed the certificate audit trail")
    a.add_argument("-o", "--output")
    a.set_defaults(fn=cmd_atlas)

    v = sub.add_parser("verify", help="sample-check the charts of an atlas")
    v.add_argument("atlas")
    v.add_argument("--samples", type=int)
    v.add_argument("--margin", type=float)
    v.add_argument("--tol", type=float)
    v.add_argument("--seed", type=int)
    v.add_argument("--max-charts", type=int)
    v.add_argument("--coverage", type=int, help="graph points to invert (0: skip)")
    v.add_argument("--config", help="JSON file with \"verify\" settings")
    v.add_argument("-o", "--output")
    v.set_defaults(fn=cmd_verify)

    g = sub.add_parser("growth", help="fit log(chart count) against log r")
    g.add_argument("family")
    g.add_argument("--t", nargs="+")
    g.add_argument("--r-min", type=int, default=2)
    g.add_argument("--r-max", type=int, default=8)
    g.add_argument("--improved", action="store_true")
    g.add_argument("--config", help="JSON file with \"atlas\" settings")
    g.add_argument("-o", "--output")
    g.set_defaults(fn=cmd_growth)

    s = sub.add_parser("selftest", help="run the built-in example suite")
    s.add_argument("-q", "--quiet", action="store_true")
    s.set_defaults(fn=cmd_selftest)
    return p


def run_cli(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (AtlasError, cc.CertificateError) as exc:
        print(f"certification failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
