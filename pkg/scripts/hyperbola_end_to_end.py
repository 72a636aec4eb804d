#!/usr/bin/env python3
"""Build, serialize, reload and verify a hyperbola atlas.

Mirrors what a user does with the CLI, in one process: the atlas JSON is
written to disk, read back, and checked without access to the builder.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from mildatlas.atlas import build_atlas, check_coverage
from mildatlas.harness import emit_report, verify_atlas_doc
from mildatlas.prepared import builtin_family


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--t", type=float, default=0.5)
    ap.add_argument("--r", type=int, default=4)
    ap.add_argument("--out", type=Path, default=Path("hyperbola_run"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    atlas = build_atlas(builtin_family("hyperbola"), (args.t,), args.r)
    cov = check_coverage(atlas, samples=1000)
    path = args.out / "atlas.json"
    path.write_text(json.dumps(atlas.to_json(include_audit=True), sort_keys=True, indent=2) + "\n")

    rep = verify_atlas_doc(json.loads(path.read_text()), samples=1000, coverage=500)
    (args.out / "report.json").write_text(emit_report(rep))

    worst = max(c["max_norm"] for c in rep.sections["norms"]["charts"])
    print(f"t={args.t} r={args.r}: {atlas.count} charts (predicted {atlas.predicted}), "
          f"certificate A={atlas.certificate.A:.6g}")
    print(f"in-process coverage {cov.covered}/{cov.samples}, max error {cov.max_error:.2e}")
    print(f"reloaded: max chart norm {worst:.12f}, verdict {'pass' if rep.ok else 'FAIL'}")
    return 0 if rep.ok and cov.ok else 1


if __name__ == "__main__":
    sys.exit(main())
