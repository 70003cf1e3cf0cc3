"""Command-line interface.

Exit codes: 0 success, 2 input/output problem, 3 invalid arguments,
4 analytic degeneracy (e.g. a constant feature column).
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import mining
from .errors import ArgumentError, DegenerateError, InputError, PoremineError, StageError
from .filtering import DEFAULT_CUTOFF_UM2, read_labels, records_from_pores
from .imaging import check_scale, encode_pgm, load_mask, load_micrograph, otsu_threshold, segment, write_pgm
from .morphology import extract_pores
from .synth import generate, parse_spec_text
from .tables import atomic_write_text, features_csv, read_features_csv

EXIT_IO = 2
EXIT_ARGS = 3
EXIT_DEGENERATE = 4

SEED_ENV = "POREMINE_SEED"


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ARGS, f"{self.prog}: error: {message}\n")


class HelpFormatter(argparse.ArgumentDefaultsHelpFormatter):
    """Show defaults only for options that have a real one."""

    def _get_help_string(self, action):
        if action.required or action.default in (None, argparse.SUPPRESS):
            return action.help
        return super()._get_help_string(action)


def _k_value(text: str):
    if text == "auto":
        return "auto"
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("k must be 'auto' or a positive integer") from None
    if k < 1:
        raise argparse.ArgumentTypeError("k must be >= 1")
    return k


def _scale(text: str) -> float:
    try:
        return check_scale(text)
    except ArgumentError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _threshold(text: str) -> int:
    t = int(text)
    if not 0 <= t <= 255:
        raise argparse.ArgumentTypeError("threshold must be in [0, 255]")
    return t


def build_parser() -> argparse.ArgumentParser:
    p = Parser(prog="poremine", description="Pore extraction and artifact mining for SEM micrographs.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=Parser)
    fmt = HelpFormatter

    s = sub.add_parser("segment", help="threshold a micrograph into a pore/fiber mask", formatter_class=fmt)
    s.add_argument("--input", required=True, help="8-bit grayscale PGM or PNG")
    s.add_argument("--scale", required=True, type=_scale, help="micrometres per pixel")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--threshold", type=_threshold, default=argparse.SUPPRESS, help="fixed gray level; pores are <= threshold")
    g.add_argument("--auto", action="store_true", default=True, help="choose the threshold with Otsu's method")
    s.add_argument("--out", required=True, help="output mask PGM (pore=0, fiber=255)")

    s = sub.add_parser("pores", help="extract pores and write the feature table", formatter_class=fmt)
    s.add_argument("--mask", required=True, help="mask PGM/PNG, dark pixels are pores")
    s.add_argument("--scale", required=True, type=_scale, help="micrometres per pixel")
    s.add_argument("--min-pixels", type=int, default=10, help="smallest pore in pixels")
    s.add_argument("--exclude-border", action="store_true", default=False, help="drop pores touching the image border")
    s.add_argument("--image-id", default=argparse.SUPPRESS, help="image id column value (default: mask file stem)")
    s.add_argument("--out", required=True, help="output feature CSV")

    s = sub.add_parser("mine", help="cluster pore features and report artifacts", formatter_class=fmt)
    s.add_argument("--features", required=True, nargs="+", help="feature CSV files")
    _mining_args(s)

    s = sub.add_parser("run", help="full pipeline from micrographs to report", formatter_class=fmt)
    s.add_argument("--images", required=True, nargs="+", help="micrographs (PGM/PNG)")
    s.add_argument("--scale", required=True, type=_scale, help="micrometres per pixel")
    s.add_argument("--threshold", type=_threshold, default=argparse.SUPPRESS, help="fixed gray level (default: Otsu per image)")
    s.add_argument("--min-pixels", type=int, default=argparse.SUPPRESS, help="smallest pore in pixels (default: 10)")
    s.add_argument("--exclude-border", action="store_true", default=False, help="drop pores touching the image border")
    _mining_args(s)

    s = sub.add_parser("synth", help="generate a synthetic micrograph with ground truth", formatter_class=fmt)
    s.add_argument("--spec", required=True, help="key = value spec file (width and height required)")
    s.add_argument("--name", default="synth", help="file name prefix")
    s.add_argument("--out-dir", required=True, help="output directory")
    return p


def _mining_args(s):
    s.add_argument("--labels", default=argparse.SUPPRESS, help="expert label CSV (image_id,pore_id,label)")
    s.add_argument("--cutoff", type=float, default=argparse.SUPPRESS, help=f"lower area cutoff in um^2 (default: {DEFAULT_CUTOFF_UM2})")
    s.add_argument("--upper-cutoff", type=float, default=argparse.SUPPRESS, help="optional upper area cutoff in um^2 (default: none)")
    s.add_argument("--k", type=_k_value, default=argparse.SUPPRESS, help="number of clusters or 'auto' for the elbow (default: auto)")
    s.add_argument("--kmax", type=int, default=argparse.SUPPRESS, help="largest k on the elbow curve (default: 10)")
    s.add_argument("--restarts", type=int, default=argparse.SUPPRESS, help="k-means++ restarts per k (default: 20)")
    s.add_argument("--seed", type=int, default=argparse.SUPPRESS, help=f"random seed (default: ${SEED_ENV} or 0)")
    s.add_argument("--config", default=argparse.SUPPRESS, help="key = value file with any of the options above")
    s.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker cap (default: available cores)")
    s.add_argument("--out-dir", required=True, help="output directory")


CONFIG_KEYS = {
    "cutoff": float,
    "upper_cutoff": float,
    "k": _k_value,
    "kmax": int,
    "restarts": int,
    "seed": int,
    "threads": int,
    "threshold": int,
    "min_pixels": int,
    "labels": str,
}


def read_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, val = (t.strip() for t in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown option {key!r}")
        try:
            out[key] = CONFIG_KEYS[key](val.strip("\"'"))
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return out


def mining_config(args) -> tuple[mining.MiningConfig, str | None]:
    """Merge flags > config file > environment (seed only) > defaults."""
    config_path = getattr(args, "config", None)
    cfg = read_config(config_path) if config_path else {}

    def pick(flag, key, default):
        v = getattr(args, flag, None)
        if v is not None:
            return v
        return cfg.get(key, default)

    env_seed = os.environ.get(SEED_ENV)
    default_seed = 0
    if env_seed is not None:
        try:
            default_seed = int(env_seed)
        except ValueError:
            raise UsageError(f"${SEED_ENV} must be an integer, got {env_seed!r}") from None
    k = pick("k", "k", "auto")
    conf = mining.MiningConfig(
        cutoff=pick("cutoff", "cutoff", DEFAULT_CUTOFF_UM2),
        upper_cutoff=pick("upper_cutoff", "upper_cutoff", None),
        k=None if k == "auto" else k,
        k_max=pick("kmax", "kmax", 10),
        seed=pick("seed", "seed", default_seed),
        restarts=pick("restarts", "restarts", 20),
        threshold=pick("threshold", "threshold", None),
        min_pixels=pick("min_pixels", "min_pixels", 10),
        exclude_border=bool(getattr(args, "exclude_border", False)),
        threads=pick("threads", "threads", None),
    )
    if conf.cutoff < 0:
        raise UsageError("--cutoff must be >= 0")
    if conf.k_max < 3:
        raise UsageError("--kmax must be >= 3")
    if conf.restarts < 1:
        raise UsageError("--restarts must be >= 1")
    if conf.threads is not None and conf.threads < 1:
        raise UsageError("--threads must be >= 1")
    if conf.min_pixels < 1:
        raise UsageError("--min-pixels must be >= 1")
    return conf, pick("labels", "labels", None)


def cmd_segment(args) -> int:
    m = load_micrograph(args.input, args.scale)
    t = getattr(args, "threshold", None)
    if t is None:
        t = otsu_threshold(m)
    mask = segment(m, t)
    write_pgm(args.out, mask.to_gray())
    print(f"threshold: {t}")
    return 0


def cmd_pores(args) -> int:
    if args.min_pixels < 1:
        raise UsageError("--min-pixels must be >= 1")
    mask = load_mask(args.mask)
    pores = extract_pores(mask, args.min_pixels)
    if args.exclude_border:
        pores = [p for p in pores if not p.touches_border(mask.width, mask.height)]
    image_id = getattr(args, "image_id", None) or Path(args.mask).stem
    records = records_from_pores(image_id, pores, args.scale)
    atomic_write_text(args.out, features_csv(records))
    print(f"pores: {len(records)}")
    return 0


def _summary(rep) -> None:
    print(f"kept: {rep.kept}  dropped: {rep.dropped}")
    print(f"k: {rep.k} ({'fixed' if rep.k_fixed else 'elbow'})")
    print(f"PC1+PC2: {100 * rep.pc_variance:.1f}%")
    if rep.artifact_concentration is None:
        print("artifact concentration: n/a")
    else:
        print(f"artifact concentration: {rep.artifact_concentration:.3f} (cluster {rep.artifact_cluster + 1})")


def cmd_mine(args) -> int:
    conf, labels_path = mining_config(args)
    records = [r for path in args.features for r in read_features_csv(path)]
    labels = read_labels(labels_path) if labels_path else None
    res = mining.mine(records, conf, labels)
    mining.write_files(args.out_dir, mining.result_files(res))
    _summary(res.report)
    return 0


def cmd_run(args) -> int:
    conf, labels_path = mining_config(args)
    ids = [Path(p).stem for p in args.images]
    if len(set(ids)) != len(ids):
        raise UsageError("image file names must have distinct stems (they become image ids)")
    labels = read_labels(labels_path) if labels_path else None
    per_image, res = mining.run_pipeline(list(zip(ids, args.images)), args.scale, conf, labels)
    mining.write_files(args.out_dir, mining.result_files(res, per_image))
    for im in per_image:
        print(f"{im.image_id}: threshold {im.threshold}, pores {len(im.pores)}")
    _summary(res.report)
    return 0


def cmd_synth(args) -> int:
    try:
        text = Path(args.spec).read_text()
    except OSError as exc:
        raise InputError(f"{args.spec}: {exc.strerror or exc}") from None
    spec = parse_spec_text(text)
    m, truth, pores = generate(spec)
    files = {
        f"{args.name}.pgm": encode_pgm(m.intensities),
        f"{args.name}_truth.pgm": encode_pgm(truth.to_gray()),
        f"{args.name}_pores.csv": features_csv(records_from_pores(args.name, pores, spec.scale)),
    }
    mining.write_files(args.out_dir, files)
    print(f"ground-truth pores: {len(pores)}")
    return 0


COMMANDS = {
    "segment": cmd_segment,
    "pores": cmd_pores,
    "mine": cmd_mine,
    "run": cmd_run,
    "synth": cmd_synth,
}


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        return exit_code(exc.cause)
    if isinstance(exc, DegenerateError):
        return EXIT_DEGENERATE
    if isinstance(exc, (UsageError, ArgumentError, ValueError)):
        return EXIT_ARGS
    if isinstance(exc, (InputError, OSError)):
        return EXIT_IO
    return 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (PoremineError, UsageError, OSError, ValueError) as exc:
        print(f"poremine {args.command}: error: {exc}", file=sys.stderr)
        return exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
