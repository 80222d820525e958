"""Command line entry point:

    fracflow <kind> --config FILE [--set section.key=value ...] --out DIR
    fracflow verify-goldens --dir DIR
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigError, FracflowError
from .harness import KINDS, RunConfig, run, verify_goldens


def build_parser():
    p = argparse.ArgumentParser(prog="fracflow",
                                description="fractional Allen-Cahn / mean curvature flow laboratory")
    p.add_argument("kind", choices=list(KINDS) + ["verify-goldens"])
    p.add_argument("--config", help="sectioned key=value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override section.key=value (repeatable; highest precedence)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--dir", help="goldens directory (verify-goldens)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.kind == "verify-goldens":
        report = verify_goldens(args.dir or "goldens")
        json.dump(report, sys.stdout, indent=1, sort_keys=True)
        print()
        return 0 if all(v.get("status") != "fail" for v in report.values()) else 1

    if args.config:
        with open(args.config) as f:
            config = RunConfig.from_text(f.read())
    else:
        config = RunConfig.from_defaults()
    config.sections["run"]["kind"] = args.kind
    for item in args.set:
        if "=" not in item:
            raise SystemExit(f"--set expects KEY=VALUE, got '{item}'")
        key, val = item.split("=", 1)
        config.override(key, val)
    if not args.out:
        raise SystemExit("--out DIR is required for experiment runs")
    try:
        manifest = run(config, args.out)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except FracflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {len(manifest.files)} files to {args.out} "
          f"({manifest.wall_time_s:.1f}s)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
