"""Command-line interface: ``extract`` and ``selfcheck``."""

from __future__ import annotations

import argparse
import sys

from .encoders import EncoderError
from .extract import ExtractorConfig, extract_dataset, selfcheck


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edmextract",
        description="Encode episode frames into the edmetrics dataset format",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="encode a frames directory tree")
    p.add_argument("--frames", required=True, help="root of per-episode frame directories")
    p.add_argument("--out-prefix", required=True, dest="out_prefix",
                   help="writes PREFIX.json and PREFIX.edmf")
    p.add_argument("--encoder", default="clip",
                   help="encoder name: clip (default), patch, or a checkpoint id")
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--device", default="cpu")
    p.add_argument("--no-normalize", action="store_true",
                   help="skip per-frame unit normalization")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("selfcheck", help="verify a feature file")
    p.add_argument("features", help="path to the .edmf file")
    p.set_defaults(func=cmd_selfcheck)
    return parser


def cmd_extract(args) -> int:
    cfg = ExtractorConfig(
        encoder_name=args.encoder,
        batch_size=args.batch,
        normalize=not args.no_normalize,
        device=args.device,
    )
    summary = extract_dataset(
        args.frames,
        out_manifest=f"{args.out_prefix}.json",
        out_features=f"{args.out_prefix}.edmf",
        cfg=cfg,
    )
    print(
        f"extracted {summary.episodes} episodes ({summary.frames} frames) with "
        f"{summary.encoder} (dim {summary.dim}) -> {summary.manifest_path}, "
        f"{summary.feature_path}"
    )
    return 0


def cmd_selfcheck(args) -> int:
    result = selfcheck(args.features)
    if result.passed:
        print(f"{args.features}: OK")
        return 0
    for failure in result.failures:
        print(f"{args.features}: FAIL {failure}", file=sys.stderr)
    return 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (EncoderError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
