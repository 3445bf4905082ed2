"""Command-line entry point: ``panostitch <input>... -o <output> [options]``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .compose import WarpOutOfRangeError
from .graph import NothingToStitchError
from .image import ImageFormatError, load_image, save_image
from .pipeline import DRAW_MODES, StitchConfig, stitch

EXIT_OK, EXIT_USAGE, EXIT_NOTHING, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("panostitch")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="panostitch", description="Stitch overlapping images into a panorama.")
    p.add_argument("inputs", nargs="*", metavar="input", help="input PGM/PPM images")
    p.add_argument("-o", "--output", help="output PPM/PGM path")
    p.add_argument("--final-megapix", type=float, default=-1.0,
                   help="resolution of the blended panorama; <= 0 keeps full resolution")
    p.add_argument("--medium-megapix", type=float, default=0.6, help="feature tier (default 0.6)")
    p.add_argument("--low-megapix", type=float, default=0.1, help="seam/gain tier (default 0.1)")
    p.add_argument("--conf-thresh", type=float, default=1.0,
                   help="minimum pair confidence for panorama membership (default 1.0)")
    p.add_argument("--ransac-thresh", type=float, default=3.0, help="inlier threshold in pixels")
    p.add_argument("--ransac-iters", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-features", type=int, default=500)
    p.add_argument("--feather-radius", type=int, default=15)
    p.add_argument("--draw", choices=DRAW_MODES, default="none")
    p.add_argument("--dot-out", metavar="PATH", help="write the match graph in DOT notation")
    p.add_argument("--jobs", type=int, default=0,
                   help="worker threads; 0 uses all CPUs, 1 disables parallelism")
    p.add_argument("--verbose", action="store_true")
    return p


def parse_args(argv: list[str]) -> StitchConfig:
    """Parse ``argv`` into a config; raises :class:`UsageError`."""
    ns, extra = _build_parser().parse_known_args(argv)
    if extra:
        raise UsageError(f"unrecognized argument: {extra[0]}")
    stray = [a for a in ns.inputs if a.startswith("-") and a != "-"]
    if stray:
        raise UsageError(f"unrecognized argument: {stray[0]}")
    if len(ns.inputs) < 2:
        raise UsageError("need at least 2 input images")
    if not ns.output:
        raise UsageError("missing required option -o/--output")
    try:
        return StitchConfig(
            inputs=list(ns.inputs), output=ns.output, final_megapix=ns.final_megapix,
            medium_megapix=ns.medium_megapix, low_megapix=ns.low_megapix,
            conf_thresh=ns.conf_thresh, ransac_thresh=ns.ransac_thresh,
            ransac_iters=ns.ransac_iters, seed=ns.seed, max_features=ns.max_features,
            feather_radius=ns.feather_radius, draw=ns.draw, dot_out=ns.dot_out,
            jobs=ns.jobs, verbose=ns.verbose)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _setup_logging(verbose: bool) -> None:
    if not log.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("panostitch: %(message)s"))
        log.addHandler(handler)
        log.propagate = False
    log.setLevel(logging.DEBUG if verbose else logging.INFO)


def run_pipeline(config: StitchConfig) -> int:
    """Run the full pipeline for ``config`` and return the process exit code."""
    _setup_logging(config.verbose)
    try:
        images = [load_image(p) for p in config.inputs]
    except (OSError, ImageFormatError) as exc:
        log.error("cannot read input: %s", exc)
        return EXIT_IO
    names = [os.path.basename(p) for p in config.inputs]

    try:
        result = stitch(images, config, names)
    except NothingToStitchError as exc:
        log.error("%s", exc)
        return EXIT_NOTHING
    except WarpOutOfRangeError as exc:
        log.error("nothing to stitch: %s", exc)
        return EXIT_NOTHING
    except OSError as exc:
        log.error("cannot write: %s", exc)
        return EXIT_IO

    try:
        save_image(result.output, config.output)
    except OSError as exc:
        log.error("cannot write output: %s", exc)
        return EXIT_IO
    log.info("wrote %s (%dx%d, %d of %d images)", config.output, result.output.width,
             result.output.height, len(result.subset.kept), len(images))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        config = parse_args(argv)
    except UsageError as exc:
        print(f"panostitch: error: {exc}", file=sys.stderr)
        print(_build_parser().format_usage().rstrip(), file=sys.stderr)
        return EXIT_USAGE
    return run_pipeline(config)


if __name__ == "__main__":
    sys.exit(main())
