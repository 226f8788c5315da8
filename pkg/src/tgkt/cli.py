"""Batch front-end: synthesize degraded data, deblur, sweep, convert.

Four subcommands:

``synth``
    blur one or more square images, add correlated noise of a prescribed
    level, and write the degraded tensor, the truth tensor, and a metadata
    sidecar recording every parameter plus the achieved noise bounds.
``deblur``
    run one solver on a degraded tensor (rebuilding the operator and the
    weights from the sidecar), write the restored image(s) and a CSV report
    with one row per lateral slice (p-methods) or per run (wgg-tgkt).
``bench``
    sweep methods x regularizers x noise levels over shared synthesized
    data, one report row per cell, deterministic row order.
``convert``
    PGM/PPM <-> T3B via the twist/squeeze orientation operators.

Configuration precedence is CLI flags > ``--config`` file (key=value lines,
keys named like the long flags) > built-in defaults.  Every run is
reproducible from its configuration and seed; pass ``--no-cpu-time`` to
leave the timing column empty so repeated runs produce byte-identical
reports.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import formats, problems
from .linalg import SpdOperator
from .solvers import DiscrepancyConfig, wg_tgkt_p, wgg_tgkt, wtgkt_p
from .tensor import fro_norm, tprod

METHODS = ("wtgkt-p", "wg-tgkt-p", "wgg-tgkt")
REGS = ("identity", "d1", "d2")
CSV_COLUMNS = ("method", "reg", "noise_level", "slice", "k", "mu",
               "discrepancy", "psnr", "relerr", "cpu_secs")

DEFAULTS = {
    "sigma": 3.0,
    "band": 12,
    "variant": "symmetric",
    "delta-tilde": 1e-3,
    "omega": 0.2,
    "seed": 0,
    "alpha": 3.0,
    "eta": 1.1,
    "mu-lo": 1e1,
    "mu-hi": 1e7,
    "k-init": 2,
    "k-max": 200,
    "bisect-tol": 1e-3,
}


@dataclass
class RunConfig:
    """Resolved configuration of one CLI invocation."""

    command: str
    inputs: list = field(default_factory=list)
    out_dir: Path | None = None
    out: Path | None = None
    method: str | None = None
    methods: list = field(default_factory=list)
    reg: str | None = None
    regs: list = field(default_factory=list)
    alpha: float = 3.0
    sigma: float = 3.0
    band: int = 12
    variant: str = "symmetric"
    delta_tilde: float = 1e-3
    noise_levels: list = field(default_factory=list)
    omega: float = 0.2
    seed: int = 0
    eta: float = 1.1
    mu_lo: float = 1e1
    mu_hi: float = 1e7
    k_init: int = 2
    k_max: int = 200
    bisect_tol: float = 1e-3
    delta: float | None = None
    truth: Path | None = None
    meta: Path | None = None
    report: Path | None = None
    cpu_time: bool = True
    allow_partial: bool = False

    def validate(self):
        if self.command in ("synth", "bench") and not self.inputs:
            raise ValueError("at least one input image is required")
        if self.command == "deblur" and self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.command == "deblur" and self.reg not in REGS:
            raise ValueError(f"reg must be one of {REGS}")
        if self.command == "bench":
            for m in self.methods:
                if m not in METHODS:
                    raise ValueError(f"unknown method {m!r}")
            for r in self.regs:
                if r not in REGS:
                    raise ValueError(f"unknown reg {r!r}")
            if not self.noise_levels:
                raise ValueError("at least one noise level is required")
        if self.command in ("synth", "bench"):
            if self.sigma <= 0:
                raise ValueError("sigma must be positive")
            if self.band < 1:
                raise ValueError("band must be at least 1")
            if self.variant not in problems.BLUR_VARIANTS:
                raise ValueError(f"variant must be one of {problems.BLUR_VARIANTS}")
            if self.delta_tilde < 0:
                raise ValueError("delta-tilde must be nonnegative")
        if self.eta <= 1:
            raise ValueError("eta must exceed 1")
        if not 0 < self.mu_lo < self.mu_hi:
            raise ValueError("need 0 < mu-lo < mu-hi")
        if self.k_init < 1 or self.k_max < self.k_init:
            raise ValueError("need 1 <= k-init <= k-max")


def _merge(args, parser, key, cast):
    """Flag value if given, else config-file value, else default."""
    attr = key.replace("-", "_")
    val = getattr(args, attr, None)
    if val is not None:
        return val
    cfgfile = getattr(args, "_cfgfile", {})
    if key in cfgfile:
        try:
            return cast(cfgfile[key])
        except ValueError:
            parser.error(f"config file: cannot parse {key}={cfgfile[key]!r}")
    return DEFAULTS.get(key)


def _resolve(args, parser):
    args._cfgfile = {}
    if getattr(args, "config", None):
        args._cfgfile = formats.read_sidecar(args.config)
    cfg = RunConfig(command=args.command)
    cfg.inputs = [Path(p) for p in getattr(args, "inputs", []) or []]
    for name in ("out_dir", "out", "truth", "meta", "report"):
        val = getattr(args, name, None)
        setattr(cfg, name, Path(val) if val else None)
    cfg.method = getattr(args, "method", None)
    cfg.reg = getattr(args, "reg", None)
    if getattr(args, "methods", None):
        cfg.methods = [s.strip() for s in args.methods.split(",") if s.strip()]
    if getattr(args, "regs", None):
        cfg.regs = [s.strip() for s in args.regs.split(",") if s.strip()]
    if getattr(args, "noise_levels", None):
        cfg.noise_levels = [float(s) for s in args.noise_levels.split(",") if s.strip()]
    cfg.sigma = float(_merge(args, parser, "sigma", float))
    cfg.band = int(_merge(args, parser, "band", int))
    cfg.variant = str(_merge(args, parser, "variant", str))
    cfg.delta_tilde = float(_merge(args, parser, "delta-tilde", float))
    cfg.omega = float(_merge(args, parser, "omega", float))
    cfg.seed = int(_merge(args, parser, "seed", int))
    cfg.alpha = float(_merge(args, parser, "alpha", float))
    cfg.eta = float(_merge(args, parser, "eta", float))
    cfg.mu_lo = float(_merge(args, parser, "mu-lo", float))
    cfg.mu_hi = float(_merge(args, parser, "mu-hi", float))
    cfg.k_init = int(_merge(args, parser, "k-init", int))
    cfg.k_max = int(_merge(args, parser, "k-max", int))
    cfg.bisect_tol = float(_merge(args, parser, "bisect-tol", float))
    cfg.delta = getattr(args, "delta", None)
    cfg.cpu_time = not getattr(args, "no_cpu_time", False)
    cfg.allow_partial = bool(getattr(args, "allow_partial", False))
    cfg.validate()
    return cfg


# -- synth ---------------------------------------------------------------------

def _load_frames(paths):
    """Read input images into a list of square grayscale frames.

    A single PPM contributes its three channels as frames; PGMs contribute
    one frame each.  All frames must be square and equally sized.
    """
    frames = []
    source_format = "pgm"
    for p in paths:
        img = formats.read_image(p)
        if img.ndim == 3:
            source_format = "ppm"
            frames.extend(img[:, :, c] for c in range(3))
        else:
            frames.append(img)
    shape = frames[0].shape
    if shape[0] != shape[1]:
        raise ValueError(f"frames must be square, got {shape}")
    if any(f.shape != shape for f in frames):
        raise ValueError("frames must all share one size")
    return frames, source_format


def _cmd_synth(cfg):
    frames, source_format = _load_frames(cfg.inputs)
    n = frames[0].shape[0]
    if cfg.band > n:
        raise ValueError(f"band {cfg.band} exceeds image size {n}")
    x_true = problems.multi_twist(frames)
    blur = problems.BlurSpec(n, cfg.sigma, cfg.band, cfg.variant)
    a = problems.build_blur(blur)
    b_true = tprod(a, x_true)

    meta = {
        "format": "tgkt-meta-1",
        "command": "synth",
        "n": n,
        "frames": len(frames),
        "source_format": source_format,
        "sigma": cfg.sigma,
        "band": cfg.band,
        "variant": cfg.variant,
        "delta_tilde": cfg.delta_tilde,
        "omega": cfg.omega,
        "seed": cfg.seed,
        "bnorm_true": fro_norm(b_true),
    }
    if cfg.delta_tilde > 0:
        m_op = problems.build_covariance_m(n, n, cfg.omega)
        noise = problems.gen_noise(
            b_true, m_op, problems.NoiseSpec(cfg.delta_tilde, cfg.seed, cfg.omega))
        degraded = b_true + noise.noise
        meta["rho"] = noise.rho
        meta["delta"] = noise.delta
        for j, dj in enumerate(noise.slice_deltas, 1):
            meta[f"delta_slice_{j}"] = float(dj)
    else:
        degraded = b_true
        meta["rho"] = 0.0
        meta["delta"] = 0.0
        for j in range(1, len(frames) + 1):
            meta[f"delta_slice_{j}"] = 0.0

    out = cfg.out_dir or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    formats.write_t3b(out / "degraded.t3b", degraded)
    formats.write_t3b(out / "truth.t3b", x_true)
    meta["degraded"] = "degraded.t3b"
    meta["truth"] = "truth.t3b"
    formats.write_sidecar(out / "meta.txt", meta)
    print(f"synth: wrote {out / 'degraded.t3b'} "
          f"(n={n}, frames={len(frames)}, delta={meta['delta']})")
    return 0


# -- deblur ----------------------------------------------------------------------

def _reg_operator(reg, size, depth, alpha):
    if reg == "identity":
        return SpdOperator.identity(size, depth)
    gamma = 1 if reg == "d1" else 2
    return problems.build_reg_d(size, depth, gamma, alpha)


def _solver_deltas(cfg, meta, p):
    """Per-slice noise bounds and the global bound, honoring --delta."""
    if cfg.delta is not None:
        return [float(cfg.delta)] * p, float(cfg.delta)
    if "delta" not in meta:
        raise ValueError("no noise bound: sidecar lacks delta and --delta not given")
    global_delta = float(meta["delta"])
    slices = []
    for j in range(1, p + 1):
        key = f"delta_slice_{j}"
        slices.append(float(meta.get(key, global_delta)))
    if global_delta <= 0:
        raise ValueError("sidecar records delta=0 (noise-free synth); pass --delta")
    return slices, global_delta


def _run_method(method, a, b, l_op, m_op, slice_deltas, global_delta, cfg):
    common = dict(eta=cfg.eta, mu_interval=(cfg.mu_lo, cfg.mu_hi),
                  bisect_tol=cfg.bisect_tol, k_init=cfg.k_init, k_max=cfg.k_max)
    if method == "wtgkt-p":
        dcfg = DiscrepancyConfig(delta=slice_deltas, **common)
        return wtgkt_p(a, b, l_op, m_op, dcfg, seed=cfg.seed,
                       allow_partial=cfg.allow_partial)
    if method == "wg-tgkt-p":
        dcfg = DiscrepancyConfig(delta=slice_deltas, **common)
        return wg_tgkt_p(a, b, l_op, m_op, dcfg, allow_partial=cfg.allow_partial)
    dcfg = DiscrepancyConfig(delta=global_delta, **common)
    return wgg_tgkt(a, b, l_op, m_op, dcfg)


def _write_restored(out_dir, x, source_format):
    """Write restored lateral slices as images; returns the filenames."""
    imgs = problems.multi_squeeze(x)
    out_dir.mkdir(parents=True, exist_ok=True)
    if source_format == "ppm" and len(imgs) == 3:
        path = out_dir / "restored.ppm"
        formats.write_ppm(path, np.stack(imgs, axis=2))
        return [path.name]
    names = []
    for j, img in enumerate(imgs, 1):
        name = "restored.pgm" if len(imgs) == 1 else f"restored_{j}.pgm"
        formats.write_pgm(out_dir / name, img)
        names.append(name)
    return names


def _format_row(method, reg, noise_level, slice_label, rec, met, cpu):
    psnr = "" if met is None else f"{met.psnr:.4f}"
    relerr = "" if met is None else f"{met.relative_error:.6e}"
    if rec.error is not None:
        return [method, reg, f"{noise_level:.6g}", str(slice_label), "", "",
                "", "", "", "" if cpu is None else f"{cpu:.6f}"]
    return [method, reg, f"{noise_level:.6g}", str(slice_label), str(rec.k),
            f"{rec.mu:.6e}", f"{rec.discrepancy:.10e}", psnr, relerr,
            "" if cpu is None else f"{cpu:.6f}"]


def _report_rows(method, reg, noise_level, report, x, truth, cpu_time):
    rows = []
    if method == "wgg-tgkt":
        rec = report.records[0]
        met = problems.metrics(x, truth) if truth is not None else None
        cpu = report.wall_time if cpu_time else None
        rows.append(_format_row(method, reg, noise_level, "all", rec, met, cpu))
        return rows
    for rec in report.records:
        j = rec.slice_index
        met = None
        if truth is not None and rec.error is None:
            met = problems.metrics(x[:, j:j + 1, :], truth[:, j:j + 1, :])
        cpu = rec.wall_time if cpu_time else None
        rows.append(_format_row(method, reg, noise_level, j + 1, rec, met, cpu))
    return rows


def _write_report(path, rows):
    lines = [",".join(CSV_COLUMNS)]
    lines.extend(",".join(row) for row in rows)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _cmd_deblur(cfg):
    degraded_path = cfg.inputs[0]
    b = formats.read_t3b(degraded_path)
    meta_path = cfg.meta or degraded_path.parent / "meta.txt"
    meta = formats.read_sidecar(meta_path)

    n = b.shape[2]
    if b.shape[0] != n:
        raise ValueError(f"degraded tensor must be (n, p, n), got {b.shape}")
    p = b.shape[1]
    blur = problems.BlurSpec(
        n, float(meta["sigma"]), int(meta["band"]), meta["variant"])
    a = problems.build_blur(blur)
    m_op = problems.build_covariance_m(n, n, float(meta["omega"]))
    l_op = _reg_operator(cfg.reg, n, n, cfg.alpha)
    slice_deltas, global_delta = _solver_deltas(cfg, meta, p)

    truth = None
    truth_path = cfg.truth
    if truth_path is None and "truth" in meta:
        candidate = meta_path.parent / meta["truth"]
        if candidate.exists():
            truth_path = candidate
    if truth_path is not None:
        truth = formats.read_t3b(truth_path)

    x, report = _run_method(cfg.method, a, b, l_op, m_op,
                            slice_deltas, global_delta, cfg)

    out_dir = cfg.out_dir or Path(".")
    names = _write_restored(out_dir, x, meta.get("source_format", "pgm"))
    noise_level = float(meta.get("delta_tilde", "nan"))
    rows = _report_rows(cfg.method, cfg.reg, noise_level, report, x, truth,
                        cfg.cpu_time)
    report_path = cfg.report or out_dir / "report.csv"
    _write_report(report_path, rows)
    _write_report_meta(report_path, cfg, slice_deltas, global_delta)
    failed = [r for r in report.records if r.error is not None]
    print(f"deblur: {cfg.method} reg={cfg.reg} wrote {', '.join(names)} and "
          f"{report_path.name}" + (f" ({len(failed)} slice(s) failed)" if failed else ""))
    return 1 if failed else 0


def _write_report_meta(report_path, cfg, slice_deltas, global_delta):
    """Self-auditing sidecar: the noise bounds and solver settings in force."""
    meta = {
        "format": "tgkt-report-meta-1",
        "eta": cfg.eta,
        "mu_lo": cfg.mu_lo,
        "mu_hi": cfg.mu_hi,
        "k_init": cfg.k_init,
        "k_max": cfg.k_max,
        "bisect_tol": cfg.bisect_tol,
        "seed": cfg.seed,
        "delta": global_delta,
    }
    for j, dj in enumerate(slice_deltas, 1):
        meta[f"delta_slice_{j}"] = float(dj)
    formats.write_sidecar(Path(str(report_path) + ".meta"), meta)


# -- bench -----------------------------------------------------------------------

def _cmd_bench(cfg):
    out = cfg.out_dir or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    methods = cfg.methods or list(METHODS)
    regs = cfg.regs or ["d1"]
    rows = []
    failures = 0
    for level in cfg.noise_levels:
        synth_cfg = RunConfig(
            command="synth", inputs=cfg.inputs, out_dir=out / f"noise-{level:g}",
            sigma=cfg.sigma, band=cfg.band, variant=cfg.variant,
            delta_tilde=level, omega=cfg.omega, seed=cfg.seed)
        _cmd_synth(synth_cfg)
        synth_dir = out / f"noise-{level:g}"
        b = formats.read_t3b(synth_dir / "degraded.t3b")
        truth = formats.read_t3b(synth_dir / "truth.t3b")
        meta = formats.read_sidecar(synth_dir / "meta.txt")
        n, p = b.shape[0], b.shape[1]
        a = problems.build_blur(problems.BlurSpec(n, cfg.sigma, cfg.band, cfg.variant))
        m_op = problems.build_covariance_m(n, n, cfg.omega)
        slice_deltas, global_delta = _solver_deltas(cfg, meta, p)
        for reg in regs:
            l_op = _reg_operator(reg, n, n, cfg.alpha)
            for method in methods:
                cell = synth_dir / reg / method
                try:
                    x, report = _run_method(method, a, b, l_op, m_op,
                                            slice_deltas, global_delta, cfg)
                except Exception as exc:  # cell failures recorded, sweep continues
                    failures += 1
                    print(f"bench: {method}/{reg}/{level:g} failed: {exc}",
                          file=sys.stderr)
                    from .solvers import SliceRecord
                    rec = SliceRecord(0, -1, float("nan"), float("nan"),
                                      float("nan"), [], 0.0, error=str(exc))
                    rows.append(_format_row(method, reg, level, "all", rec,
                                            None, None))
                    continue
                _write_restored(cell, x, meta.get("source_format", "pgm"))
                rows.extend(_report_rows(method, reg, level, report, x, truth,
                                         cfg.cpu_time))
    report_path = cfg.report or out / "report.csv"
    _write_report(report_path, rows)
    print(f"bench: wrote {report_path} ({len(rows)} rows, {failures} failures)")
    return 1 if failures else 0


# -- convert ---------------------------------------------------------------------

def _cmd_convert(cfg):
    src = cfg.inputs[0]
    dst = cfg.out
    if dst is None:
        raise ValueError("convert needs --out")
    if src.suffix == ".t3b":
        t = formats.read_t3b(src)
        imgs = problems.multi_squeeze(t)
        if dst.suffix == ".ppm":
            if len(imgs) != 3:
                raise ValueError(f"PPM output needs p=3, tensor has p={len(imgs)}")
            formats.write_ppm(dst, np.stack(imgs, axis=2))
        elif len(imgs) == 1:
            formats.write_pgm(dst, imgs[0])
        else:
            for j, img in enumerate(imgs, 1):
                formats.write_pgm(dst.with_name(f"{dst.stem}_{j}{dst.suffix}"), img)
    elif src.suffix in (".pgm", ".ppm"):
        img = formats.read_image(src)
        if img.ndim == 3:
            t = problems.multi_twist([img[:, :, c] for c in range(3)])
        else:
            t = problems.twist(img)
        formats.write_t3b(dst, t)
    else:
        raise ValueError(f"cannot infer conversion for {src.suffix!r}")
    print(f"convert: {src} -> {dst}")
    return 0


# -- argument parsing --------------------------------------------------------------

def _add_common(sub):
    sub.add_argument("--config", help="key=value config file (flags take precedence)")
    sub.add_argument("--seed", type=int, help="RNG seed (default 0)")


def _add_blur_noise(sub):
    sub.add_argument("--sigma", type=float, help="Gaussian blur std in pixels")
    sub.add_argument("--band", type=int, help="blur bandwidth in pixels")
    sub.add_argument("--variant", choices=problems.BLUR_VARIANTS,
                     help="blur profile variant")
    sub.add_argument("--omega", type=float, help="covariance shift (default 0.2)")


def _add_solver(sub):
    sub.add_argument("--alpha", type=float, help="regularizer shift (default 3)")
    sub.add_argument("--eta", type=float, help="discrepancy safety factor")
    sub.add_argument("--mu-lo", type=float, help="bisection interval lower end")
    sub.add_argument("--mu-hi", type=float, help="bisection interval upper end")
    sub.add_argument("--k-init", type=int, help="initial bidiagonalization steps")
    sub.add_argument("--k-max", type=int, help="step cap")
    sub.add_argument("--bisect-tol", type=float, help="log10 bisection width")
    sub.add_argument("--no-cpu-time", action="store_true",
                     help="leave the cpu_secs column empty (byte-stable reports)")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="tgkt",
        description="Weighted tensor Golub-Kahan-Tikhonov deblurring under the t-product")
    subs = parser.add_subparsers(dest="command", required=True)

    s = subs.add_parser("synth", help="blur images and add correlated noise")
    s.add_argument("--in", dest="inputs", nargs="+", required=True,
                   metavar="IMAGE", help="input PGM/PPM frame(s)")
    s.add_argument("--out-dir", required=True, help="output directory")
    s.add_argument("--delta-tilde", type=float,
                   help="relative noise level (0 writes the blur only)")
    _add_blur_noise(s)
    _add_common(s)

    s = subs.add_parser("deblur", help="restore a degraded tensor")
    s.add_argument("--in", dest="inputs", nargs=1, required=True,
                   metavar="T3B", help="degraded tensor")
    s.add_argument("--out-dir", required=True, help="output directory")
    s.add_argument("--method", required=True, choices=METHODS)
    s.add_argument("--reg", default="d1", choices=REGS,
                   help="regularization weight (default d1)")
    s.add_argument("--delta", type=float,
                   help="override the noise bound from the sidecar")
    s.add_argument("--truth", help="truth tensor for metrics (default: sidecar)")
    s.add_argument("--meta", help="sidecar path (default: meta.txt next to input)")
    s.add_argument("--report", help="report CSV path (default: out-dir/report.csv)")
    s.add_argument("--allow-partial", action="store_true",
                   help="keep going when a slice fails; flag it in the report")
    _add_solver(s)
    _add_common(s)

    s = subs.add_parser("bench", help="sweep methods x regs x noise levels")
    s.add_argument("--in", dest="inputs", nargs="+", required=True,
                   metavar="IMAGE", help="input PGM/PPM frame(s)")
    s.add_argument("--out-dir", required=True, help="output directory")
    s.add_argument("--methods", help="comma list (default: all three)")
    s.add_argument("--regs", help="comma list (default: d1)")
    s.add_argument("--noise-levels", required=True, help="comma list of delta-tilde")
    s.add_argument("--report", help="report CSV path (default: out-dir/report.csv)")
    _add_blur_noise(s)
    _add_solver(s)
    _add_common(s)

    s = subs.add_parser("convert", help="PGM/PPM <-> T3B")
    s.add_argument("--in", dest="inputs", nargs=1, required=True, metavar="PATH")
    s.add_argument("--out", required=True, help="output path")
    _add_common(s)
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve(args, parser)
        handler = {"synth": _cmd_synth, "deblur": _cmd_deblur,
                   "bench": _cmd_bench, "convert": _cmd_convert}[cfg.command]
        return handler(cfg)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"tgkt {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
