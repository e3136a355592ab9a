"""Command-line front end: degrade, superres, evaluate, decompose, refocus, demo.

Configuration is layered: built-in defaults, then a JSON file given with
``--config`` (keys as the long flags, dashes or underscores), then flags.
The resolved configuration is written to ``run_config.json`` in every
output directory.

Exit codes: 0 success, 1 usage error, 2 data error, 3 backend error,
4 demo property failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .alignment import FlowParams, align, estimate_flows, has_flowset, read_flowset, write_flowset
from .backends import BackendError, parse_backend
from .compaction import decompose, export_basis_images, residual_energy
from .evaluation import default_border_crop, evaluate_lf, refocus, refocus_sweep
from .lightfield import LightFieldError, flatten, load_lightfield, luma, save_lightfield, write_png
from .resample import DegradationParams, degrade, upsample_lightfield
from .restoration import PipelineConfig, StageError, superresolve
from .synthetic import benchmark_lightfield

log = logging.getLogger("lfsr")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_BACKEND, EXIT_PROPERTY = 0, 1, 2, 3, 4
RUN_CONFIG = "run_config.json"


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str = ""
    input: str | None = None
    output: str | None = None
    truth: str | None = None
    alpha: int = 3
    backend: str = "sharpen"
    backend_timeout: float = 120.0
    max_disparity: float = 4.0
    flow_cache: str | None = None
    border_crop: int | None = None
    threads: int | None = None
    seed: int = 0
    slope: float = 0.0
    crack_fill: str = "collocated_lr"
    pipeline_order: str = "upsample-first"
    blur: str = "none"
    blur_sigma: float = 1.0
    noise_sigma: float = 0.0
    bit_depth: int = 16
    timings: bool = False
    demo_grid: int = 5
    demo_disparity: float = 1.0

    def flow_params(self) -> FlowParams:
        return FlowParams(max_disparity=self.max_disparity)

    def crop(self) -> int:
        if self.border_crop is not None:
            return self.border_crop
        return default_border_crop(self.max_disparity, self.alpha)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_KEYS = {f.name for f in dataclasses.fields(RunConfig)}


def _load_config_file(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    out = {}
    for key, value in data.items():
        name = key.replace("-", "_")
        if name not in _KEYS or name == "command":
            raise UsageError(f"unknown config key {key!r}")
        out[name] = value
    return out


def resolve_config(command: str, flags: dict, config_file: str | None = None) -> RunConfig:
    """defaults < config file < flags (flags left unset are ``None``-free)."""
    values = {}
    if config_file:
        values.update(_load_config_file(config_file))
    values.update(flags)
    try:
        cfg = RunConfig(command=command, **values)
    except TypeError as exc:
        raise UsageError(str(exc)) from exc
    if cfg.alpha not in (2, 3, 4):
        raise UsageError(f"alpha must be 2, 3 or 4, got {cfg.alpha}")
    if cfg.max_disparity <= 0:
        raise UsageError("max-disparity must be positive")
    if cfg.threads is not None and cfg.threads < 1:
        raise UsageError("threads must be >= 1")
    if cfg.border_crop is not None and cfg.border_crop < 0:
        raise UsageError("border-crop must be >= 0")
    if not 0 <= int(cfg.seed) < 2 ** 64:
        raise UsageError("seed must be an unsigned 64-bit integer")
    return cfg


def write_run_config(out: Path, cfg: RunConfig, **extra) -> None:
    out.mkdir(parents=True, exist_ok=True)
    data = cfg.to_dict()
    data.update(extra)
    (out / RUN_CONFIG).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _require(cfg: RunConfig, *names):
    for name in names:
        if getattr(cfg, name) is None:
            raise UsageError(f"--{name.replace('_', '-')} is required for {cfg.command}")


def _pipeline_config(cfg: RunConfig) -> PipelineConfig:
    try:
        backend = parse_backend(cfg.backend, cfg.backend_timeout)
        return PipelineConfig(alpha=cfg.alpha, backend=backend, flow=cfg.flow_params(),
                              crack_fill=cfg.crack_fill, threads=cfg.threads,
                              pipeline_order=cfg.pipeline_order)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _degradation(cfg: RunConfig) -> DegradationParams:
    try:
        return DegradationParams(alpha=cfg.alpha, blur=cfg.blur, blur_sigma=cfg.blur_sigma,
                                 noise_sigma=cfg.noise_sigma, seed=int(cfg.seed))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


# -- subcommands ---------------------------------------------------------

def cmd_degrade(cfg: RunConfig) -> int:
    _require(cfg, "input", "output")
    hr = load_lightfield(cfg.input)
    lr = degrade(hr, _degradation(cfg))
    out = Path(cfg.output)
    used = (hr.X - hr.X % cfg.alpha, hr.Y - hr.Y % cfg.alpha)
    save_lightfield(lr, out, cfg.bit_depth, extra={"ground_truth": str(cfg.input), "alpha": cfg.alpha})
    crop = None
    if used != (hr.X, hr.Y):
        crop = {"from": [hr.X, hr.Y], "to": list(used)}
        log.info("cropped %dx%d to %dx%d before decimation", hr.X, hr.Y, *used)
    write_run_config(out, cfg, crop=crop)
    return EXIT_OK


def _flows_for(cfg: RunConfig, lr, pcfg: PipelineConfig):
    """Flows from the cache when present, otherwise None (estimated in the pipeline)."""
    if cfg.flow_cache and has_flowset(cfg.flow_cache, lr.P, lr.Q):
        log.info("reading flows from %s", cfg.flow_cache)
        return read_flowset(cfg.flow_cache, lr.P, lr.Q)
    return None


def cmd_superres(cfg: RunConfig) -> int:
    _require(cfg, "input", "output")
    lr = load_lightfield(cfg.input)
    pcfg = _pipeline_config(cfg)
    flows = _flows_for(cfg, lr, pcfg)
    cached = flows is not None
    res = superresolve(lr, pcfg, flows)
    if cfg.flow_cache and not cached:
        write_flowset(cfg.flow_cache, res.flows)
    out = Path(cfg.output)
    save_lightfield(res.lightfield, out, cfg.bit_depth)
    crack_frac = [float(c.mean()) for c in res.cracks]
    for stage, sec in res.timings.items():
        log.info("stage %-12s %8.3f s", stage, sec)
    if cfg.timings:
        (out / "timings.json").write_text(json.dumps(res.timings, indent=2) + "\n")
    write_run_config(out, cfg, crack_fraction=crack_frac)
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig) -> int:
    _require(cfg, "input", "truth", "output")
    restored = load_lightfield(cfg.input)
    truth = load_lightfield(cfg.truth)
    try:
        report = evaluate_lf(restored, truth, cfg.crop())
    except ValueError as exc:
        raise LightFieldError(str(exc)) from exc
    out = Path(cfg.output)
    report.save(out)
    write_run_config(out, cfg)
    a = report.aggregate
    print(f"mean PSNR {a['mean_psnr']:.3f} dB, mean SSIM {a['mean_ssim']:.5f}")
    return EXIT_OK


def decompose_report(lf, flow_params: FlowParams, out: Path, threads=None, flows=None) -> dict:
    """Basis images and entropies of the light field before and after alignment."""
    if flows is None:
        flows = estimate_flows(lf, params=flow_params, threads=threads)
    aligned, _ = align(lf, flows, threads=threads)
    table, energy = {}, {}
    for name, field in (("unaligned", lf), ("aligned", aligned)):
        d = decompose(flatten(field))
        table[name] = export_basis_images(d, out / name)
        energy[name] = residual_energy(d)
    n = lf.n
    lines = ["layout," + ",".join(f"B_{j}" for j in range(n))]
    for name in ("unaligned", "aligned"):
        lines.append(name + "," + ",".join(repr(h) for h in table[name]))
    (out / "entropy.csv").write_text("\n".join(lines) + "\n")
    summary = {"entropy": table, "residual_energy": energy}
    (out / "decomposition.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def cmd_decompose(cfg: RunConfig) -> int:
    _require(cfg, "input", "output")
    lf = load_lightfield(cfg.input)
    if lf.color_space == "rgb":
        lf = luma(lf)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    flows = None
    if cfg.flow_cache and has_flowset(cfg.flow_cache, lf.P, lf.Q):
        flows = read_flowset(cfg.flow_cache, lf.P, lf.Q)
    s = decompose_report(lf, cfg.flow_params(), out, cfg.threads, flows)
    write_run_config(out, cfg)
    e = s["residual_energy"]
    print(f"residual energy: unaligned {e['unaligned']:.6g}, aligned {e['aligned']:.6g}")
    return EXIT_OK


def cmd_refocus(cfg: RunConfig) -> int:
    _require(cfg, "input", "output")
    lf = load_lightfield(cfg.input)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    write_png(out / "refocus.png", refocus(lf, cfg.slope), cfg.bit_depth)
    write_run_config(out, cfg)
    return EXIT_OK


def cmd_demo(cfg: RunConfig) -> int:
    """Synthetic end-to-end run; nonzero exit if a checked property fails."""
    _require(cfg, "output")
    out = Path(cfg.output)
    alpha = cfg.alpha
    n = cfg.demo_grid
    shape = (14 * 12, 17 * 12)
    hr, _ = benchmark_lightfield(int(cfg.seed) % 2 ** 32, n, n, shape, cfg.demo_disparity)
    lr = degrade(hr, _degradation(cfg))
    save_lightfield(hr, out / "hr", cfg.bit_depth)
    save_lightfield(lr, out / "lr", cfg.bit_depth, extra={"ground_truth": "../hr", "alpha": alpha})
    lr = load_lightfield(out / "lr")

    pcfg = _pipeline_config(cfg)
    res = superresolve(lr, pcfg)
    save_lightfield(res.lightfield, out / "restored", cfg.bit_depth)
    bicubic = upsample_lightfield(lr, alpha)

    crop = cfg.crop()
    pb = evaluate_lf(res.lightfield, hr, crop)
    bic = evaluate_lf(bicubic, hr, crop)
    pb.save(out / "eval", "pb")
    bic.save(out / "eval", "bicubic")

    # the field the pipeline decomposes: upsampled views, with its flows
    basis = decompose_report(res.upsampled, cfg.flow_params(), out / "decomposition",
                             cfg.threads, flows=res.flows)

    slopes = np.round(np.arange(0.0, 3.0 + 1e-9, 0.05), 2)
    sharp = refocus_sweep(res.lightfield, slopes, border=crop)
    best = float(slopes[int(np.argmax(sharp))])
    write_png(out / "refocus.png", refocus(res.lightfield, best), cfg.bit_depth)

    gain = pb.psnrs() - bic.psnrs()
    e = basis["residual_energy"]
    h = basis["entropy"]
    checks = {
        "pb_beats_bicubic": bool(pb.aggregate["mean_psnr"] > bic.aggregate["mean_psnr"]),
        "gain_0.1dB_on_70pct_views": bool(np.mean(gain >= 0.1) >= 0.7),
        "no_cracks_left": bool(np.isfinite(res.lightfield.views).all()),
        "alignment_compacts_energy": bool(e["aligned"] < e["unaligned"]),
        "alignment_lowers_B1_entropy": bool(h["aligned"][1] < h["unaligned"][1]),
        "refocus_peak_at_disparity": bool(abs(best - cfg.demo_disparity) <= 0.05 + 1e-9),
    }
    summary = {
        "seed": int(cfg.seed),
        "alpha": alpha,
        "mean_psnr": {"pb": pb.aggregate["mean_psnr"], "bicubic": bic.aggregate["mean_psnr"]},
        "mean_ssim": {"pb": pb.aggregate["mean_ssim"], "bicubic": bic.aggregate["mean_ssim"]},
        "views_gaining_0.1dB": float(np.mean(gain >= 0.1)),
        "residual_energy": e,
        "B1_entropy": {"unaligned": h["unaligned"][1], "aligned": h["aligned"][1]},
        "refocus_best_slope": best,
        "checks": checks,
        "passed": all(checks.values()),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    write_run_config(out, cfg)
    for name, ok in checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    print(f"PB {pb.aggregate['mean_psnr']:.2f} dB vs bicubic {bic.aggregate['mean_psnr']:.2f} dB")
    return EXIT_OK if summary["passed"] else EXIT_PROPERTY


COMMANDS = {
    "degrade": cmd_degrade,
    "superres": cmd_superres,
    "evaluate": cmd_evaluate,
    "decompose": cmd_decompose,
    "refocus": cmd_refocus,
    "demo": cmd_demo,
}


# -- argument parsing ----------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="lfsr", description="Light field super-resolution.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    S = argparse.SUPPRESS

    def shared(p):
        p.add_argument("--config", default=None, help="JSON file with defaults for any flag")
        p.add_argument("--input", default=S)
        p.add_argument("--output", default=S)
        p.add_argument("--alpha", type=int, choices=(2, 3, 4), default=S)
        p.add_argument("--backend", default=S, help="identity | sharpen | external:<cmd>")
        p.add_argument("--backend-timeout", type=float, default=S)
        p.add_argument("--max-disparity", type=float, default=S)
        p.add_argument("--flow-cache", default=S)
        p.add_argument("--border-crop", type=int, default=S)
        p.add_argument("--threads", type=int, default=S)
        p.add_argument("--seed", type=_u64, default=S)
        p.add_argument("--bit-depth", type=int, choices=(8, 16), default=S)

    for name, helptext in (("degrade", "blur, decimate and add noise to every view"),
                           ("superres", "principal-basis super-resolution"),
                           ("evaluate", "per-view PSNR / SSIM against ground truth"),
                           ("decompose", "basis images and entropies, unaligned vs aligned"),
                           ("refocus", "shift-and-add refocusing at one slope"),
                           ("demo", "synthetic end-to-end run with property checks")):
        p = sub.add_parser(name, help=helptext)
        shared(p)
        if name == "degrade":
            p.add_argument("--blur", choices=("none", "box", "gaussian"), default=S)
            p.add_argument("--blur-sigma", type=float, default=S)
            p.add_argument("--noise-sigma", type=float, default=S)
        if name in ("superres", "demo"):
            p.add_argument("--crack-fill", choices=("collocated_lr", "inverse_warp", "none"), default=S)
            p.add_argument("--pipeline-order", choices=("upsample-first", "decompose-first"), default=S,
                           help="experiment hook; upsample-first is the supported order")
            p.add_argument("--timings", action="store_true", default=S,
                           help="also write per-stage wall times to timings.json")
        if name == "evaluate":
            p.add_argument("--truth", default=S)
        if name == "refocus":
            p.add_argument("--slope", type=float, default=S)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = vars(ap.parse_args(argv))
        logging.basicConfig(level=logging.INFO if args.pop("verbose") else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        command = args.pop("command")
        if command is None:
            raise UsageError("a subcommand is required: " + ", ".join(COMMANDS))
        config_file = args.pop("config")
        cfg = resolve_config(command, args, config_file)
        return COMMANDS[command](cfg)
    except UsageError as exc:
        print(f"lfsr: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        print(f"lfsr: {exc}", file=sys.stderr)
        return EXIT_BACKEND if isinstance(exc.cause, BackendError) else EXIT_DATA
    except BackendError as exc:
        print(f"lfsr: backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (LightFieldError, OSError, ValueError) as exc:
        print(f"lfsr: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
