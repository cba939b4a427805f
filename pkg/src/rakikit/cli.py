"""Command-line pipeline: simulate | undersample | reconstruct | evaluate.

Runs are driven by a declarative JSON config (every key has a default,
unknown keys are rejected); command-line flags override file values. The
resolved config is echoed into the output directory for provenance, and all
artifacts are deterministic for a fixed config and seed (timing fields in
the report are the one exception).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import core, metrics
from .errors import RakikitError
from .grappa import KernelGeometry, grappa_reconstruct, igrappa_reconstruct
from .iraki import IrakiSchedule, build_schedule, iraki_reconstruct
from .phantom import (
    Ellipse,
    PhantomSpec,
    default_head_phantom,
    make_2d_harmonic_array,
    make_harmonic_array,
    render_phantom,
    simulate_kspace,
)
from .raki import NetworkConfig, raki_reconstruct
from .vcc import vcc_reconstruct

DEFAULT_CONFIG = {
    "phantom": {
        "dims": [128, 128],
        "ellipses": "head",
        "image_phase": None,
        "noise_sigma": 0.0,
        "seed": 0,
    },
    "coils": {
        "preset": "harmonic",
        "n_coils": 8,
        "max_pe_harmonic": 3,
        "max_ro_harmonic": 2,
        "seed": 0,
    },
    "pattern": {"rate": 4, "acs": 18, "offset": 0},
    "method": "grappa",
    "vcc": False,
    "seed": 0,
    "steps": 250,
    "eta": 5e-3,
    "tikhonov_lambda": 0.0,
    "grappa_kernel": [2, 5],
    "raki_kernel": [2, 5],
    "iraki_kernel": [4, 7],
    "channels": [256, 128],
    "leaky_slope": 0.01,
    "schedule": {
        "eta0": None,
        "delta_eta": None,
        "n_iter": None,
        "augmented_lines": 65,
    },
    "prescan": None,
    "reference": None,
    "mask_fraction": 0.05,
}

_METHODS = ("grappa", "igrappa", "raki", "iraki")


def _merge_config(defaults: dict, overrides: dict, path: str = "") -> dict:
    merged = dict(defaults)
    for key, value in overrides.items():
        where = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ValueError(f"unknown config key: {where}")
        if isinstance(defaults[key], dict) and isinstance(value, dict):
            merged[key] = _merge_config(defaults[key], value, where)
        else:
            merged[key] = value
    return merged


def load_config(path: str | None, flag_overrides: dict) -> dict:
    file_cfg = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        if not isinstance(file_cfg, dict):
            raise ValueError("config file must contain a JSON object")
    cfg = _merge_config(DEFAULT_CONFIG, file_cfg)
    cfg = _merge_config(cfg, flag_overrides)
    if cfg["method"] not in _METHODS:
        raise ValueError(f"method must be one of {_METHODS}, got {cfg['method']!r}")
    if cfg["pattern"]["rate"] < 1:
        raise ValueError(f"rate must be >= 1, got {cfg['pattern']['rate']}")
    return cfg


def _flag_overrides(args) -> dict:
    over: dict = {}
    if getattr(args, "method", None) is not None:
        over["method"] = args.method
    pattern = {}
    if getattr(args, "rate", None) is not None:
        pattern["rate"] = args.rate
    if getattr(args, "acs", None) is not None:
        pattern["acs"] = args.acs
    if pattern:
        over["pattern"] = pattern
    if getattr(args, "vcc", False):
        over["vcc"] = True
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    if getattr(args, "steps", None) is not None:
        over["steps"] = args.steps
    if getattr(args, "prescan", None) is not None:
        over["prescan"] = args.prescan
    if getattr(args, "reference", None) is not None:
        over["reference"] = args.reference
    return over


def _coil_model(cfg: dict):
    coils = cfg["coils"]
    if coils["preset"] == "harmonic":
        return make_harmonic_array(
            coils["n_coils"], coils["max_pe_harmonic"], coils["seed"]
        )
    if coils["preset"] == "harmonic2d":
        return make_2d_harmonic_array(
            coils["n_coils"],
            coils["max_pe_harmonic"],
            coils["max_ro_harmonic"],
            coils["seed"],
        )
    raise ValueError(f"unknown coil preset {coils['preset']!r}")


def _phantom_spec(cfg: dict) -> PhantomSpec:
    ph = cfg["phantom"]
    dims = tuple(ph["dims"])
    if ph["ellipses"] == "head":
        ellipses = default_head_phantom(dims).ellipses
    else:
        ellipses = tuple(Ellipse(*row) for row in ph["ellipses"])
    phase = None if ph["image_phase"] is None else tuple(ph["image_phase"])
    return PhantomSpec(
        dims=dims,
        ellipses=ellipses,
        image_phase=phase,
        noise_sigma=ph["noise_sigma"],
        seed=ph["seed"],
    )


def _pattern(cfg: dict, n_y: int) -> core.SamplingPattern:
    p = cfg["pattern"]
    return core.SamplingPattern.centered(p["rate"], p["acs"], n_y, p["offset"])


def _schedule(cfg: dict, rate: int) -> IrakiSchedule:
    sch = cfg["schedule"]
    base = build_schedule(rate) if 2 <= rate <= 8 else IrakiSchedule()
    return IrakiSchedule(
        eta0=sch["eta0"] if sch["eta0"] is not None else base.eta0,
        delta_eta=(
            sch["delta_eta"] if sch["delta_eta"] is not None else base.delta_eta
        ),
        n_iter=sch["n_iter"] if sch["n_iter"] is not None else -1,
        augmented_lines=sch["augmented_lines"],
    )


def _echo_config(cfg: dict, out_dir: Path):
    with open(out_dir / "config.json", "w", encoding="utf-8") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_image(img: np.ndarray, out_dir: Path, stem: str):
    core.save_image(img, out_dir / f"{stem}.img")
    core.save_pgm(img, out_dir / f"{stem}.pgm")


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, _flag_overrides(args))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = _phantom_spec(cfg)
    coils = _coil_model(cfg)
    image = render_phantom(spec)
    ksp = simulate_kspace(image, coils, spec.noise_sigma, spec.seed)
    core.save_ksp(ksp, out_dir / "reference.ksp")
    _write_image(core.rss_combine(core.ifft2c(ksp)), out_dir, "reference")
    _echo_config(cfg, out_dir)
    print(f"wrote reference k-space {ksp.shape} to {out_dir}")
    return 0


def cmd_undersample(args) -> int:
    cfg = load_config(args.config, _flag_overrides(args))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ksp = core.load_ksp(args.input)
    pattern = _pattern(cfg, ksp.shape[1])
    core.save_ksp(core.zero_fill(ksp, pattern), out_dir / "undersampled.ksp")
    _echo_config(cfg, out_dir)
    print(f"wrote undersampled k-space to {out_dir}")
    return 0


def _reconstruct(cfg: dict, ksp: np.ndarray):
    """Dispatch on method; returns (recon_ksp, image, report_dict)."""
    pattern = _pattern(cfg, ksp.shape[1])
    method = cfg["method"]
    rate = pattern.rate
    report: dict = {"method": method, "vcc": bool(cfg["vcc"]), "stages": []}
    acs_block = None
    if cfg["prescan"] is not None:
        acs_block = core.load_ksp(cfg["prescan"])
        pattern = pattern.without_acs()
    reference_image = (
        core.load_image(cfg["reference"]) if cfg["reference"] is not None else None
    )

    geom = KernelGeometry(*cfg["grappa_kernel"], rate) if rate > 1 else None
    n_coils = ksp.shape[0] * (2 if cfg["vcc"] else 1)
    raki_cfg = NetworkConfig(
        n_coils=n_coils,
        rate=rate,
        layer1_kernel=tuple(
            cfg["iraki_kernel"] if method == "iraki" else cfg["raki_kernel"]
        ),
        layer1_channels=cfg["channels"][0],
        layer2_channels=cfg["channels"][1],
        leaky_slope=cfg["leaky_slope"],
    )
    schedule = _schedule(cfg, rate) if method in ("igrappa", "iraki") else None

    t0 = time.perf_counter()
    if cfg["vcc"]:
        opts: dict = {"tikhonov_lambda": cfg["tikhonov_lambda"]}
        if method in ("grappa", "igrappa"):
            opts["geom"] = geom
        if method in ("raki", "iraki"):
            opts.update(
                cfg=raki_cfg, steps=cfg["steps"], seed=cfg["seed"], eta=cfg["eta"]
            )
        if method in ("igrappa", "iraki"):
            opts["schedule"] = schedule
        result = vcc_reconstruct(ksp, pattern, method, acs_block=acs_block, **opts)
        recon, image = result.physical_ksp, result.image
        report["stages"].append({"name": method, "seconds": time.perf_counter() - t0})
    else:
        if method == "grappa":
            recon = grappa_reconstruct(
                ksp, pattern, geom, cfg["tikhonov_lambda"], acs_block=acs_block
            )
        elif method == "igrappa":
            recon = igrappa_reconstruct(
                ksp, pattern, schedule, geom, cfg["tikhonov_lambda"], acs_block
            )
        elif method == "raki":
            recon, _, train_report = raki_reconstruct(
                ksp,
                pattern,
                raki_cfg,
                cfg["eta"],
                cfg["steps"],
                cfg["seed"],
                acs_block=acs_block,
            )
            report["stages"].append(
                {
                    "name": "train",
                    "steps": train_report.steps,
                    "final_loss": train_report.final_loss,
                }
            )
        else:
            result = iraki_reconstruct(
                ksp,
                pattern,
                schedule,
                cfg["steps"],
                cfg["seed"],
                acs_block=acs_block,
                cfg=raki_cfg,
                tikhonov_lambda=cfg["tikhonov_lambda"],
                reference_image=reference_image,
            )
            recon = result.recon
            for j, (eta, rep) in enumerate(
                zip(result.stage_etas, result.stage_reports)
            ):
                stage = {
                    "name": f"train_stage_{j}",
                    "eta": eta,
                    "steps": rep.steps,
                    "loss_curve": [float(x) for x in rep.loss_history],
                    "final_loss": rep.final_loss,
                }
                if result.stage_nmse is not None:
                    stage["nmse"] = result.stage_nmse[j]
                report["stages"].append(stage)
        report["stages"].append(
            {"name": "total", "seconds": time.perf_counter() - t0}
        )
        image = core.rss_combine(core.ifft2c(recon))
    report["n_training_stages"] = sum(
        1 for s in report["stages"] if s["name"].startswith("train_stage")
    )
    return recon, image, report


def cmd_reconstruct(args) -> int:
    cfg = load_config(args.config, _flag_overrides(args))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ksp = core.load_ksp(args.input)
    recon, image, report = _reconstruct(cfg, ksp)
    core.save_ksp(recon, out_dir / "recon.ksp")
    _write_image(image, out_dir, "recon")
    with open(out_dir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _echo_config(cfg, out_dir)
    print(f"method={cfg['method']} vcc={cfg['vcc']} -> {out_dir}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = load_config(args.config, _flag_overrides(args))
    recon = core.load_image(args.recon)
    reference = core.load_image(args.reference)
    report = metrics.evaluate(recon, reference, cfg["mask_fraction"])
    text = report.to_text()
    sys.stdout.write(text)
    if args.out is not None:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "metrics.txt").write_text(text, encoding="utf-8")
        with open(out_dir / "metrics.json", "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "nmse": report.nmse,
                    "psnr": report.psnr,
                    "ssim": report.ssim,
                    "mask_fraction": report.mask_fraction,
                    "empty_mask": report.empty_mask,
                },
                fh,
                indent=2,
                sort_keys=True,
            )
            fh.write("\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rakikit",
        description="Scan-specific parallel MRI reconstruction toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--method", choices=_METHODS, default=None)
        p.add_argument("--rate", type=int, default=None)
        p.add_argument("--acs", type=int, default=None)
        p.add_argument("--vcc", action="store_true")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--steps", type=int, default=None)
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")

    p_sim = sub.add_parser("simulate", help="write a synthetic reference k-space")
    common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_und = sub.add_parser("undersample", help="zero-fill a k-space file")
    common(p_und)
    p_und.add_argument("input", help="input KSP file")
    p_und.set_defaults(func=cmd_undersample)

    p_rec = sub.add_parser("reconstruct", help="reconstruct an undersampled k-space")
    common(p_rec)
    p_rec.add_argument("input", help="input KSP file")
    p_rec.add_argument("--prescan", default=None, help="pre-scan KSP for calibration")
    p_rec.add_argument(
        "--reference", default=None,
        help="reference IMG file; adds per-stage reconstruction error to the report",
    )
    p_rec.set_defaults(func=cmd_reconstruct)

    p_eval = sub.add_parser("evaluate", help="compare two magnitude images")
    p_eval.add_argument("recon", help="reconstructed IMG file")
    p_eval.add_argument("reference", help="reference IMG file")
    p_eval.add_argument("--config", default=None)
    p_eval.add_argument("--out", default=None, help="optional output directory")
    p_eval.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (RakikitError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
