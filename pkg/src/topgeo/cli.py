"""``topgeo`` command line.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 input-shape error, 4 data error.
"""
import argparse
import csv
import glob
import os
import sys

from . import checkpoint, gradcheck
from . import tensor as T
from .config import ModelConfig
from .data import make_manifest, make_sample, write_manifest
from .decoder import upsample_only
from .errors import (CardinalityError, ConfigError, DataError, DegenerateInputError, ShapeError,
                     TopGeoError)
from .geometry import denormalize, normalize_unit_sphere
from .io import read_xyz, write_xyz
from .pipeline import config_of, init_params, recover
from .scene import recover_scene
from .train import TrainConfig, evaluate, train

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_SHAPE, EXIT_DATA = 0, 1, 2, 3, 4
METRIC_HEADER = ("file", "cd_e3", "hd_e2", "emd_e2", "sample_cd_e3", "emd_mode")


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def read_config(path):
    """Flat ``key = value`` file; blank lines and ``#`` comments are ignored."""
    if not os.path.isfile(path):
        raise CliError(EXIT_CONFIG, f"config file not found: {path}")
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CliError(EXIT_CONFIG, f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key in values:
                raise CliError(EXIT_CONFIG, f"{path}:{lineno}: duplicate key {key!r}")
            values[key] = value
    manifest = values.get("manifest")
    if manifest and not os.path.isabs(manifest):
        values["manifest"] = os.path.join(os.path.dirname(os.path.abspath(path)), manifest)
    return TrainConfig.from_mapping(values)


def load_ckpt(path):
    if not os.path.isfile(path):
        raise CliError(EXIT_CONFIG, f"checkpoint not found: {path}")
    return checkpoint.load(path)


def load_points(path):
    if not os.path.isfile(path):
        raise CliError(EXIT_DATA, f"input file not found: {path}")
    return read_xyz(path)


def _recover_in_frame(params, pts):
    norm, rec = normalize_unit_sphere(pts)
    with T.no_grad():
        out = recover(params, norm, config_of(params))
    return [denormalize(c, rec) for c in out.clouds()]


def cmd_train(args):
    cfg = read_config(args.config)
    if cfg.manifest and not os.path.isfile(cfg.manifest):
        raise CliError(EXIT_CONFIG, f"manifest not found: {cfg.manifest}")

    def progress(row):
        if not args.quiet:
            print(f"step {row.step} epoch {row.epoch} lr {row.lr:g} geo {row.geo:.6f} "
                  f"top {row.top:.6f} total {row.total:.6f}")
    res = train(cfg, out_dir=args.out, progress=progress)
    print(f"wrote {os.path.join(args.out, 'ckpt.bin')} after {len(res.log)} steps")


def cmd_recover(args):
    params = load_ckpt(args.ckpt)
    pts = load_points(args.input)
    clouds = dict(zip(("r0", "r1", "r2"), _recover_in_frame(params, pts)))
    emit = [e.strip() for e in args.emit.split(",") if e.strip()]
    for name in emit:
        if name not in clouds:
            raise CliError(EXIT_CONFIG, f"--emit accepts r0, r1, r2; got {name!r}")
        write_xyz(os.path.join(args.out, f"{name}.xyz"), clouds[name])
    print(" ".join(f"{n}:{len(clouds[n])}" for n in emit))


def cmd_sample(args):
    params = load_ckpt(args.ckpt)
    r0 = _recover_in_frame(params, load_points(args.input))[0]
    write_xyz(args.out, r0)
    print(f"sampled {len(r0)} points")


def cmd_upsample(args):
    params = load_ckpt(args.ckpt)
    norm, rec = normalize_unit_sphere(load_points(args.input))
    with T.no_grad():
        out = upsample_only(params, config_of(params), norm).data
    write_xyz(args.out, denormalize(out, rec))
    print(f"upsampled {len(norm)} -> {len(out)} points")


def cmd_eval(args):
    params = load_ckpt(args.ckpt)
    if not os.path.isdir(args.data):
        raise CliError(EXIT_DATA, f"data directory not found: {args.data}")
    files = sorted(glob.glob(os.path.join(args.data, "*.xyz")))
    if not files:
        raise CliError(EXIT_DATA, f"no .xyz files in {args.data}")
    clouds = [normalize_unit_sphere(read_xyz(f))[0] for f in files]
    rows, mean = evaluate(params, clouds, [os.path.basename(f) for f in files])
    write_metrics_csv(args.out, rows + [mean])
    print(f"mean cd_e3 {mean.cd * 1e3:.6f} hd_e2 {mean.hd * 1e2:.6f} emd_e2 {mean.emd * 1e2:.6f}")


def write_metrics_csv(path, rows):
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRIC_HEADER)
        for r in rows:
            w.writerow([r.name, repr(r.cd * 1e3), repr(r.hd * 1e2), repr(r.emd * 1e2),
                        repr(r.sample_cd * 1e3), r.emd_mode])


def cmd_scene(args):
    params = load_ckpt(args.ckpt)
    res = recover_scene(params, load_points(args.input), args.patch_points, args.patch_multiplier)
    write_xyz(args.out, res.points)
    print(f"{res.num_patch} patches, {len(res.points)} points")


def cmd_gradcheck(args):
    report = gradcheck.run_suite(seed=args.seed, corrupt=args.corrupt)
    for line in report.lines():
        print(line)
    if not report.passed:
        failing = [r.name for r in report.results if not r.passed]
        raise CliError(EXIT_VERIFY, "gradient check failed: " + ", ".join(failing))


def cmd_init(args):
    cfg = ModelConfig(n_points=args.n_points)
    checkpoint.save(init_params(cfg, seed=args.seed, zero_heads=not args.random_heads), args.out)
    print(f"wrote {args.out}")


def cmd_synth(args):
    rows = make_manifest(args.count, args.n_points, seed=args.seed)
    if args.manifest:
        write_manifest(args.manifest, rows)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        for i, row in enumerate(rows):
            write_xyz(os.path.join(args.out, f"{i:04d}_{row[0]}_{row[2]}.xyz"), make_sample(*row),
                      comment=" ".join(map(str, row)))
    print(f"{len(rows)} shapes")


def build_parser():
    p = argparse.ArgumentParser(prog="topgeo", description="Point cloud sampling and recovery.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("train", help="train from a key=value config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("recover", help="sample and restore one cloud")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--emit", default="r0,r1,r2")
    s.set_defaults(func=cmd_recover)

    s = sub.add_parser("sample", help="emit only the sampled quarter-size cloud")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("upsample", help="4x upsampling with the restoration phases only")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_upsample)

    s = sub.add_parser("eval", help="metrics CSV over a directory of .xyz clouds")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("scene", help="patch-wise recovery of a large scene")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--patch-points", type=int, default=2048)
    s.add_argument("--patch-multiplier", type=int, default=4)
    s.set_defaults(func=cmd_scene)

    s = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--corrupt", choices=gradcheck.CHECK_NAMES, default=None,
                   help="scale one op's gradient to check that failures are caught")
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("init", help="write a freshly initialized checkpoint")
    s.add_argument("--out", required=True)
    s.add_argument("--n-points", type=int, default=2048)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--random-heads", action="store_true")
    s.set_defaults(func=cmd_init)

    s = sub.add_parser("synth", help="write a synthetic manifest and/or .xyz clouds")
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--n-points", type=int, default=256)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--manifest")
    s.add_argument("--out")
    s.set_defaults(func=cmd_synth)
    return p


def exit_code_for(exc):
    if isinstance(exc, CliError):
        return exc.code
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (CardinalityError, ShapeError, DegenerateInputError)):
        return EXIT_SHAPE
    if isinstance(exc, (DataError, OSError)):
        return EXIT_DATA
    return EXIT_VERIFY


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (CliError, TopGeoError, OSError) as exc:
        print(f"topgeo {args.command}: error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
