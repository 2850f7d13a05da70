"""CLI: ``eegd-convert convert <src> <out>`` and ``eegd-convert verify <container> <manifest>``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .container import ContainerFormatError
from .convert import SourceLayoutError, convert, verify


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="eegd-convert",
                                     description="Subject MAT/HDF5 file -> EEGD container")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert a source file, emit container + manifest")
    p.add_argument("source")
    p.add_argument("out")
    p.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")

    p = sub.add_parser("verify", help="recheck a container against its manifest")
    p.add_argument("container")
    p.add_argument("manifest")

    args = parser.parse_args(argv)
    try:
        if args.command == "convert":
            manifest = convert(args.source, args.out)
            manifest_path = Path(args.manifest or f"{args.out}.manifest.json")
            manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True))
            print(f"converted {manifest['n_trials']} trials "
                  f"({manifest['n_channels']}x{manifest['n_samples']}) -> {args.out}")
            print(f"manifest: {manifest_path}")
            return 0
        failures = verify(args.container, args.manifest)
        if failures:
            for f in failures:
                print(f"FAIL {f}", file=sys.stderr)
            return 1
        print("verify: pass")
        return 0
    except (SourceLayoutError, ContainerFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
