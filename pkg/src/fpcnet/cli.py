"""Command-line entry point: ``fpcnet <command> [flags]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric abort.

Every run writes its resolved configuration to a sidecar JSON file,
``<primary output>.run.json`` by default (``--run-json`` overrides). The
sidecar holds no timestamps or timings, so identical flags produce
identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__

log = logging.getLogger("fpcnet")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
THREADS_ENV = "FPCNET_THREADS"
BUILTIN = "builtin"


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# Validation helpers


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return v


def _nonneg_float(text: str) -> float:
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text}")
    return v


def _unit_float(text: str) -> float:
    v = float(text)
    if not 0 <= v <= 1:
        raise argparse.ArgumentTypeError(f"expected a number in [0, 1], got {text}")
    return v


def _check_range(name: str, pair, lo_ok, hi_ok) -> tuple[float, float]:
    lo, hi = pair
    if not (lo_ok(lo) and hi_ok(hi) and lo <= hi):
        raise UsageError(f"--{name}: invalid range {lo} {hi}")
    return float(lo), float(hi)


# ---------------------------------------------------------------------------
# Shared I/O


def _write_text(path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text)


def _sidecar(args, primary) -> None:
    path = args.run_json or (f"{primary}.run.json" if primary else f"fpcnet-{args.command}.run.json")
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "run_json")}
    cfg = {k: (list(v) if isinstance(v, tuple) else v) for k, v in cfg.items()}
    doc = {"tool": "fpcnet", "version": __version__, "config": cfg}
    _write_text(path, json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _clear_images(source: str):
    """``(name, image)`` pairs from a directory of PPMs or the bundled corpus."""
    if source == BUILTIN:
        from .corpus import tiles

        try:
            return tiles()
        except ImportError as exc:
            raise DataError(f"the builtin corpus needs scikit-image and scikit-learn: {exc}") from exc
    from .color_constancy import _load_clear

    return _load_clear(source)


def _load_model(path):
    from .models import ModelFormatError, load

    try:
        return load(path)
    except (OSError, ModelFormatError) as exc:
        raise DataError(f"cannot load model {path}: {exc}") from exc


def _read_ppm(path):
    from .netpbm import ppm_read

    return ppm_read(path)


def _train_config(args):
    from .trainer import TrainConfig

    return TrainConfig(batch_size=args.batch_size, iterations=args.iterations, learning_rate=args.lr,
                       momentum=args.momentum, lr_decay_factor=args.lr_decay,
                       lr_decay_interval=args.lr_decay_interval, seed=args.seed,
                       log_interval=args.log_interval)


def _loss_csv_path(model_path) -> str:
    return str(Path(model_path).with_suffix("")) + ".losses.csv"


# ---------------------------------------------------------------------------
# Commands


def _fmt_shape(shape) -> str:
    if shape and isinstance(shape[0], tuple):
        return " + ".join(_fmt_shape(s) for s in shape)
    return "x".join(map(str, shape))


def cmd_count(args) -> int:
    from .models import build, count_flops, count_params

    spec = build(args.model, args.width_div)
    line = f"{args.model} {count_params(spec)} {count_flops(spec)}"
    print(line)
    if args.shapes:
        for label, shape_in, shape_out in spec.shape_table():
            print(f"  {label:<12} {_fmt_shape(shape_in):>20} -> {_fmt_shape(shape_out)}")
    if args.out:
        _write_text(args.out, line + "\n")
    _sidecar(args, args.out)
    return EXIT_OK


def cmd_verify_equivalence(args) -> int:
    from .equivalence import rows_to_csv, sweep_equivalence

    image = _read_ppm(args.image)
    rows = sweep_equivalence(image, args.k, args.trials, args.seed)
    text = rows_to_csv(rows)
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    _sidecar(args, args.out)
    return EXIT_OK


CASTS_CSV = "casts.csv"


def cmd_synth_cc(args) -> int:
    from .color_constancy import synthesize_cc_dataset
    from .netpbm import ppm_write

    e_range = _check_range("e-range", args.e_range, lambda v: v > 0, lambda v: v > 0)
    ds = synthesize_cc_dataset(_clear_images(args.clear), args.casts_per_image, e_range, args.seed,
                               args.test_fraction)
    out = Path(args.out)
    (out / "images").mkdir(parents=True, exist_ok=True)
    rows = []
    for it in ds.items:
        ppm_write(it.image, out / "images" / f"{it.name}.ppm")
        rows.append([it.name, *(repr(float(v)) for v in it.illuminant), it.split])
    with open(out / CASTS_CSV, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["image", "E_R", "E_G", "E_B", "split"])
        w.writerows(rows)
    print(f"{len(ds.items)} cast images ({len(ds.split('test'))} held out) -> {out}")
    _sidecar(args, out / CASTS_CSV)
    return EXIT_OK


def _read_cc_data(directory):
    from .color_constancy import CastImage, normalize_illuminant

    directory = Path(directory)
    table = directory / CASTS_CSV
    if not table.exists():
        raise DataError(f"{table} not found")
    items = []
    with open(table, newline="") as fh:
        for row in csv.DictReader(fh):
            try:
                E = normalize_illuminant([float(row["E_R"]), float(row["E_G"]), float(row["E_B"])])
                name = row["image"]
            except (KeyError, ValueError) as exc:
                raise DataError(f"{table}: bad row {row}: {exc}") from exc
            path = directory / "images" / f"{name}.ppm"
            if not path.exists():
                path = directory / "clear" / f"{name}.ppm"
            items.append(CastImage(name, _read_ppm(path), E, row.get("split") or "test"))
    if not items:
        raise DataError(f"{table} lists no images")
    return items


def cmd_train_cc(args) -> int:
    from .color_constancy import EnsembleProvider
    from .models import build, save
    from .trainer import train

    items = [it for it in _read_cc_data(args.data) if it.split == "train"]
    if not items:
        raise DataError(f"no training images in {args.data}")
    spec = build(args.arch, args.width_div)
    provider = EnsembleProvider(items, spec.input_shape[1:], args.edge_fraction)
    report = train(spec, provider, _train_config(args))
    save(args.out, spec, report.params)
    _write_text(_loss_csv_path(args.out), report.to_csv())
    print(f"trained {spec.name} for {args.iterations} iterations, final loss {report.final_loss:.6g}")
    _sidecar(args, args.out)
    return EXIT_OK


def cmd_eval_cc(args) -> int:
    from .color_constancy import cc_metrics, evaluate, metrics_csv

    items = [it for it in _read_cc_data(args.data) if args.split == "all" or it.split == args.split]
    if not items:
        raise DataError(f"no {args.split} images in {args.data}")
    spec = params = None
    if args.model:
        spec, params = _load_model(args.model)
    errors = evaluate(items, spec, params, args.ensembles, args.seed)
    text = metrics_csv({name: cc_metrics(e) for name, e in errors.items()})
    _write_text(args.out, text)
    sys.stdout.write(text)
    _sidecar(args, args.out)
    return EXIT_OK


def cmd_correct(args) -> int:
    from .color_constancy import correct_image, estimate_illuminant, gray_world, normalize_illuminant
    from .netpbm import ppm_write

    image = _read_ppm(args.input)
    if args.illuminant:
        E = normalize_illuminant(args.illuminant)
    elif args.model:
        spec, params = _load_model(args.model)
        E = estimate_illuminant(image, spec, params, args.ensembles, args.seed)
    else:
        E = gray_world(image)
    ppm_write(correct_image(image, E), args.out)
    print("illuminant " + " ".join(f"{v:.6f}" for v in E))
    _sidecar(args, args.out)
    return EXIT_OK


def cmd_synth_dh(args) -> int:
    from .dehazing import dh_save, synthesize_dh_dataset

    t_range = _check_range("t-range", args.t_range, lambda v: v > 0, lambda v: v <= 1)
    a_range = _check_range("a-range", args.a_range, lambda v: v > 0, lambda v: v <= 1)
    ds = synthesize_dh_dataset(_clear_images(args.clear), args.patches, t_range, a_range, args.seed,
                               test_fraction=args.test_fraction)
    dh_save(args.out, ds, args.dtype)
    print(f"{len(ds)} patches ({int(ds.split.sum())} held out) -> {args.out}")
    _sidecar(args, args.out)
    return EXIT_OK


def _load_dh(path):
    from .dehazing import DatasetFormatError, dh_load

    try:
        return dh_load(path)
    except (OSError, DatasetFormatError) as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from exc


def cmd_train_dh(args) -> int:
    from .dehazing import PatchProvider
    from .models import build, save
    from .trainer import train

    ds = _load_dh(args.data).subset("train")
    if len(ds) == 0:
        raise DataError(f"no training patches in {args.data}")
    spec = build("fpcnet-dh")
    report = train(spec, PatchProvider(ds), _train_config(args))
    save(args.out, spec, report.params)
    _write_text(_loss_csv_path(args.out), report.to_csv())
    print(f"trained {spec.name} for {args.iterations} iterations, final loss {report.final_loss:.6g}")
    _sidecar(args, args.out)
    return EXIT_OK


def cmd_eval_dh(args) -> int:
    from .dehazing import dcp_dehaze, dcp_mse, dehaze, metrics_csv, psnr, ssim, transmission_mse

    spec, params = _load_model(args.model)
    rows = {spec.name: {}, "DCP": {}}
    if args.data:
        ds = _load_dh(args.data)
        ds = ds if args.split == "all" else ds.subset(args.split)
        if len(ds) == 0:
            raise DataError(f"no {args.split} patches in {args.data}")
        rows[spec.name]["mse_e2"] = 100 * transmission_mse(spec, params, ds)
        rows["DCP"]["mse_e2"] = 100 * dcp_mse(ds)
    if args.pairs:
        hazy_dir, clear_dir = Path(args.pairs) / "hazy", Path(args.pairs) / "clear"
        names = sorted(p.name for p in hazy_dir.glob("*.ppm"))
        if not names:
            raise DataError(f"no hazy images in {hazy_dir}")
        scores = {spec.name: [], "DCP": []}
        for name in names:
            hazy, gt = _read_ppm(hazy_dir / name), _read_ppm(clear_dir / name)
            for key, J in ((spec.name, dehaze(hazy, spec, params)[0]), ("DCP", dcp_dehaze(hazy)[0])):
                J = np.clip(J, 0, 1)
                scores[key].append((psnr(J, gt), ssim(J, gt)))
        for key, vals in scores.items():
            rows[key]["psnr"] = float(np.mean([v[0] for v in vals]))
            rows[key]["ssim"] = float(np.mean([v[1] for v in vals]))
    if not args.data and not args.pairs:
        raise UsageError("eval-dh needs --data and/or --pairs")
    text = metrics_csv(rows)
    _write_text(args.out, text)
    sys.stdout.write(text)
    _sidecar(args, args.out)
    return EXIT_OK


def cmd_dehaze(args) -> int:
    from .dehazing import dcp_dehaze, dehaze
    from .netpbm import pgm_write, ppm_write

    hazy = _read_ppm(args.input)
    if args.model:
        spec, params = _load_model(args.model)
        J, t, A = dehaze(hazy, spec, params, args.t_min, args.stride)
    else:
        J, t, A = dcp_dehaze(hazy, t_min=args.t_min)
    tmap = args.tmap or str(Path(args.out).with_suffix("")) + ".t.pgm"
    ppm_write(J, args.out)
    pgm_write(t, tmap)
    print("airlight " + " ".join(f"{v:.6f}" for v in A))
    _sidecar(args, args.out)
    return EXIT_OK


def cmd_inspect_cc(args) -> int:
    from .color_constancy import correct_image, estimate_illuminant
    from .ensemble import sample_ensembles
    from .inspect import activation_map, heatmap_svg, reproject, weighted_chroma_histogram

    spec, params = _load_model(args.model)
    if args.data:
        items = [(it.name, it.image, it.illuminant) for it in _read_cc_data(args.data)]
    else:
        if not args.images:
            raise UsageError("inspect-cc needs --data or --images")
        items = []
        for p in args.images:
            img = _read_ppm(p)
            items.append((Path(p).stem, img, estimate_illuminant(img, spec, params, seed=args.seed)))
    hist = None
    for i, (_, image, E) in enumerate(items):
        ens = sample_ensembles(image, args.ensembles, spec.input_shape[1:], args.seed + i)
        maps = activation_map(spec, params, np.stack([e.pixels for e in ens]), args.layer)
        weight = sum(reproject(m, e) for m, e in zip(maps, ens))
        h = weighted_chroma_histogram([(correct_image(image, E), weight)], args.bins, (0.0, args.max_ratio))
        hist = h if hist is None else hist + h
    prefix = args.out_prefix
    _write_text(f"{prefix}.csv", hist.to_csv())
    _write_text(f"{prefix}.svg", heatmap_svg(hist))
    print(f"mass {hist.total:.6g}, skipped {hist.skipped} pixels -> {prefix}.csv, {prefix}.svg")
    _sidecar(args, f"{prefix}.csv")
    return EXIT_OK


def cmd_inspect_dh(args) -> int:
    from .dehazing import window_starts
    from .inspect import activation_map, curve_svg, min_channel_histogram

    spec, params = _load_model(args.model)
    patch = spec.input_shape[1]
    weighted = plain = None
    for _, image in _clear_images(args.clear):
        _, h, w = image.shape
        where = [(r, c) for r in window_starts(h, patch, patch) for c in window_starts(w, patch, patch)]
        x = np.stack([image[:, r:r + patch, c:c + patch] for r, c in where])
        maps = activation_map(spec, params, x, args.layer)
        hw = min_channel_histogram(list(zip(x, maps)), args.bins)
        hp = min_channel_histogram(list(x), args.bins)
        weighted = hw if weighted is None else weighted + hw
        plain = hp if plain is None else plain + hp
    prefix = args.out_prefix
    buf = ["bin,weighted_mass,weighted_cumulative,plain_mass,plain_cumulative"]
    e = weighted.edges[0]
    for i, row in enumerate(zip(weighted.mass, weighted.cumulative(), plain.mass, plain.cumulative())):
        buf.append(",".join([repr((e[i] + e[i + 1]) / 2), *(repr(float(v)) for v in row)]))
    _write_text(f"{prefix}.csv", "\n".join(buf) + "\n")
    _write_text(f"{prefix}.svg", curve_svg({"activation-weighted": weighted.cumulative(),
                                            "unweighted": plain.cumulative()}, e))
    print(f"weighted mass {weighted.total:.6g}, pixels {plain.total:.0f} -> {prefix}.csv, {prefix}.svg")
    _sidecar(args, f"{prefix}.csv")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .models import build, init_params
    from .trainer import grad_check

    spec = build(args.model, args.width_div)
    params = init_params(spec, seed=args.seed)
    rng = np.random.default_rng([args.seed, 99])
    x = rng.random((args.batch,) + spec.input_shape)
    y = rng.random((args.batch, len(spec.outputs)))
    rep = grad_check(spec, params, x, y, args.samples, args.step, args.seed)
    doc = {"model": spec.name, **rep.to_dict(), "tolerance": args.tolerance,
           "pass": bool(rep.max_rel_error < args.tolerance)}
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    sys.stdout.write(text)
    if args.out:
        _write_text(args.out, text)
    _sidecar(args, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def _add_train_flags(p, iterations: int):
    p.add_argument("--iterations", type=_nonneg_int, default=iterations)
    p.add_argument("--batch-size", type=_positive_int, default=128)
    p.add_argument("--lr", type=_nonneg_float, default=0.005)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--lr-decay", type=_nonneg_float, default=0.5, help="factor applied at each decay step")
    p.add_argument("--lr-decay-interval", type=_positive_int, default=None,
                   help="iterations between decays (default: a quarter of --iterations)")
    p.add_argument("--log-interval", type=_nonneg_int, default=0)


def build_parser() -> argparse.ArgumentParser:
    from .models import BUILDERS

    parser = _Parser(prog="fpcnet", description="Fully point-wise CNN tools.")
    parser.add_argument("--version", action="version", version=f"fpcnet {__version__}")
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=_nonneg_int, default=0)
    common.add_argument("--threads", type=_positive_int, default=None,
                        help=f"BLAS threads (default ${THREADS_ENV} or 1)")
    common.add_argument("--run-json", default=None, help="sidecar config path")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        p.set_defaults(func=func)
        return p

    p = add("count", cmd_count, "Print weight and FLOP counts of a model.")
    p.add_argument("--model", required=True, choices=sorted(BUILDERS))
    p.add_argument("--width-div", type=_positive_int, default=1)
    p.add_argument("--shapes", action="store_true", help="also print the layer shape table")
    p.add_argument("--out")

    p = add("verify-equivalence", cmd_verify_equivalence,
            "Compare k x k conv + average pooling with the collapsed 1x1 kernel.")
    p.add_argument("--image", required=True)
    p.add_argument("--k", type=_positive_int, nargs="+", default=[2, 3])
    p.add_argument("--trials", type=_positive_int, default=1000)
    p.add_argument("--out")

    p = add("synth-cc", cmd_synth_cc, "Make a synthetic colour-cast dataset.")
    p.add_argument("--clear", required=True, help=f"directory of clear .ppm images, or '{BUILTIN}'")
    p.add_argument("--out", required=True)
    p.add_argument("--casts-per-image", type=_positive_int, default=4)
    p.add_argument("--e-range", type=float, nargs=2, default=(0.4, 2.5), metavar=("LO", "HI"))
    p.add_argument("--test-fraction", type=_unit_float, default=0.2)

    p = add("train-cc", cmd_train_cc, "Train a colour-constancy network.")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--arch", choices=["fpcnet-cc", "basenet"], default="fpcnet-cc")
    p.add_argument("--width-div", type=_positive_int, default=1)
    p.add_argument("--edge-fraction", type=_unit_float, default=0.0)
    _add_train_flags(p, 200000)

    p = add("eval-cc", cmd_eval_cc, "Angular-error metrics on a cast dataset.")
    p.add_argument("--data", required=True)
    p.add_argument("--model")
    p.add_argument("--out", required=True)
    p.add_argument("--split", choices=["train", "test", "all"], default="test")
    p.add_argument("--ensembles", type=_positive_int, default=128)

    p = add("correct", cmd_correct, "Remove a colour cast from one image.")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model", help="network; gray world when omitted")
    p.add_argument("--illuminant", type=float, nargs=3, metavar=("R", "G", "B"))
    p.add_argument("--ensembles", type=_positive_int, default=128)

    p = add("synth-dh", cmd_synth_dh, "Make a synthetic hazy-patch dataset.")
    p.add_argument("--clear", required=True, help=f"directory of clear .ppm images, or '{BUILTIN}'")
    p.add_argument("--out", required=True)
    p.add_argument("--patches", type=_positive_int, default=30000)
    p.add_argument("--t-range", type=float, nargs=2, default=(0.1, 1.0), metavar=("LO", "HI"))
    p.add_argument("--a-range", type=float, nargs=2, default=(0.7, 1.0), metavar=("LO", "HI"))
    p.add_argument("--test-fraction", type=_unit_float, default=0.2)
    p.add_argument("--dtype", choices=["float32", "float64"], default="float64")

    p = add("train-dh", cmd_train_dh, "Train the transmission network.")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    _add_train_flags(p, 50000)

    p = add("eval-dh", cmd_eval_dh, "Transmission MSE and dehazing PSNR/SSIM against the DCP baseline.")
    p.add_argument("--model", required=True)
    p.add_argument("--data", help="patch dataset file")
    p.add_argument("--pairs", help="directory with hazy/ and clear/ subdirectories of matching .ppm files")
    p.add_argument("--split", choices=["train", "test", "all"], default="test")
    p.add_argument("--out", required=True)

    p = add("dehaze", cmd_dehaze, "Dehaze one image; writes the result and its transmission map.")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model", help="network; dark channel prior when omitted")
    p.add_argument("--tmap", help="transmission PGM path (default <out>.t.pgm)")
    p.add_argument("--stride", type=_positive_int, default=8)
    p.add_argument("--t-min", type=_unit_float, default=0.1)

    p = add("inspect-cc", cmd_inspect_cc, "Activation-weighted chroma histogram of corrected images.")
    p.add_argument("--model", required=True)
    p.add_argument("--data", help="cast dataset directory (uses its ground-truth casts)")
    p.add_argument("--images", nargs="+", help="cast .ppm images (casts estimated by the model)")
    p.add_argument("--layer", default="pool1_1")
    p.add_argument("--ensembles", type=_positive_int, default=16)
    p.add_argument("--bins", type=_positive_int, default=64)
    p.add_argument("--max-ratio", type=float, default=2.0)
    p.add_argument("--out-prefix", required=True)

    p = add("inspect-dh", cmd_inspect_dh, "Activation-weighted min-channel histogram of clear images.")
    p.add_argument("--model", required=True)
    p.add_argument("--clear", required=True, help=f"directory of clear .ppm images, or '{BUILTIN}'")
    p.add_argument("--layer", default="pool1")
    p.add_argument("--bins", type=_positive_int, default=64)
    p.add_argument("--out-prefix", required=True)

    p = add("gradcheck", cmd_gradcheck, "Compare analytic and finite-difference gradients.")
    p.add_argument("--model", required=True, choices=sorted(BUILDERS))
    p.add_argument("--width-div", type=_positive_int, default=1)
    p.add_argument("--samples", type=_positive_int, default=200)
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--batch", type=_positive_int, default=2)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--out")
    return parser


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get(THREADS_ENV)
    if env is None:
        return 1
    try:
        n = int(env)
    except ValueError:
        raise UsageError(f"${THREADS_ENV} must be a positive integer, got {env!r}") from None
    if n < 1:
        raise UsageError(f"${THREADS_ENV} must be a positive integer, got {env!r}")
    return n


def main(argv=None) -> int:
    from .trainer import NumericAbort

    try:
        args = build_parser().parse_args(argv)
        args.threads = _threads(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    from threadpoolctl import threadpool_limits

    try:
        with threadpool_limits(limits=args.threads):
            return args.func(args)
    except UsageError as exc:
        print(f"fpcnet {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericAbort as exc:
        print(f"fpcnet {args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, OSError, ValueError, KeyError) as exc:
        print(f"fpcnet {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
