"""Command-line entry point: ``anisoshift {train,enhance,evaluate,schedule,visualize}``.

Exit codes: 0 success, 2 usage/input error, 3 runtime/numerical error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import errors
from .config import load_run_config, with_overrides
from .data import load_manifest
from .diffusion import GUIDANCE_MODES, SamplerConfig, noise_field, sample_prior
from .enhance import enhance
from .guidance import guidance_from_mask, phase_sensitive_mask
from .metrics import evaluate, write_report
from .plotting import plot_band_report, save_panel_grid, save_spectrogram
from .schedule import VARIANCE_MODES
from .spectral import Waveform, analyze, normalize, read_wav, write_wav
from .train import load_checkpoint, train_loop

log = logging.getLogger("anisoshift")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3

INPUT_ERRORS = (
    errors.InvalidInputError,
    errors.ManifestError,
    errors.ConfigurationError,
    errors.ConfigMismatchError,
    errors.CorruptCheckpointError,
    errors.CheckpointError,
    FileNotFoundError,
    ValueError,
)


def _add_common(p):
    p.add_argument("--config", type=Path, help="TOML run configuration")
    p.add_argument("--seed", type=int)


def _effective(args, **extra):
    cfg = load_run_config(args.config)
    return with_overrides(cfg, seed=getattr(args, "seed", None), **extra)


def _load_ck(path, cfg, args):
    # only enforce agreement with settings the user actually supplied
    if args.config is None:
        return load_checkpoint(path)
    return load_checkpoint(path, cfg.spectral(), cfg.schedule())


def cmd_train(args):
    cfg = _effective(args, steps=args.steps)
    if not args.manifest.is_file():
        raise errors.ManifestError(f"manifest not found: {args.manifest}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "run_config.json").write_text(json.dumps(cfg.as_dict(), indent=2))
    ck = train_loop(cfg.train(), args.manifest, out, cfg.net(), cfg.spectral(), cfg.schedule())
    print(f"checkpoint={ck}")
    if args.val_manifest is not None:
        report = _evaluate(ck, args.val_manifest, cfg, load_checkpoint(ck))
        write_report(report, out / "val_report.json")
        print(f"val_report={out / 'val_report.json'}")
    return EXIT_OK


def _sampler_from(args, cfg):
    cfg = with_overrides(cfg, guidance_mode=args.guidance, variance_mode=args.variance_mode,
                         noise_free=True if args.noise_free else None)
    return cfg, cfg.sampler()


def cmd_enhance(args):
    cfg, sampler = _sampler_from(args, _effective(args))
    ck = _load_ck(args.checkpoint, cfg, args)
    noisy = read_wav(args.inp, ck.spectral_config.sample_rate)
    res = enhance(noisy, ck, sampler)
    write_wav(args.out, res.enhanced)
    Path(str(args.out) + ".json").write_text(json.dumps(
        {"config": cfg.as_dict(), "steps_used": res.steps_used, "seed": res.seed}, indent=2))
    print(f"steps_used={res.steps_used} seed={res.seed}")
    log.info("denoiser evaluations: %d", res.steps_used)
    return EXIT_OK


def _evaluate(checkpoint_path, manifest, cfg, ck):
    entries = load_manifest(manifest)
    sampler = cfg.sampler()

    def enhancer(noisy):
        return enhance(noisy, ck, sampler).enhanced

    echo = {**cfg.as_dict(), "checkpoint": str(checkpoint_path), "manifest": str(manifest)}
    return evaluate(entries, enhancer, echo, ck.spectral_config)


def cmd_evaluate(args):
    cfg, _ = _sampler_from(args, _effective(args))
    if not args.manifest.is_file():
        raise errors.ManifestError(f"manifest not found: {args.manifest}")
    if not load_manifest(args.manifest):
        raise errors.ManifestError(f"manifest is empty: {args.manifest}")
    ck = _load_ck(args.checkpoint, cfg, args)
    report = _evaluate(args.checkpoint, args.manifest, cfg, ck)
    json_path, csv_path = write_report(report, args.report)
    fig = plot_band_report(report, json_path.with_suffix(".png"))
    print(f"report={json_path} table={csv_path} figure={fig}")
    return EXIT_OK


def cmd_schedule(args):
    cfg = _effective(args)
    mode = args.variance_mode or cfg.variance_mode
    table = cfg.schedule().table(mode)
    text = json.dumps({"config": cfg.as_dict(), "variance_mode": mode, "schedule": table}, indent=2)
    if args.dump is None or str(args.dump) == "-":
        print(text)
    else:
        Path(args.dump).write_text(text + "\n")
    return EXIT_OK


def cmd_visualize(args):
    """Log-magnitude images: noisy; priors without/with guidance; clean and
    enhanced results when a reference / checkpoint are given."""
    cfg = _effective(args)
    ck = _load_ck(args.checkpoint, cfg, args) if args.checkpoint else None
    spec_cfg = ck.spectral_config if ck else cfg.spectral()
    sch = ck.schedule if ck else cfg.schedule()
    noisy = read_wav(args.inp, spec_cfg.sample_rate)
    clean = read_wav(args.clean, spec_cfg.sample_rate) if args.clean else None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    scaled, gain = normalize(noisy)
    y = analyze(scaled, spec_cfg)
    panels = [("noisy", y.values)]
    x0 = None
    if clean is not None:
        if len(clean) != len(noisy):
            raise errors.InvalidInputError("clean and noisy lengths differ")
        x0 = analyze(Waveform(clean.samples / gain, clean.sample_rate), spec_cfg)

    aniso = cfg.sampler()
    iso = SamplerConfig("isotropic", aniso.variance_mode, False, aniso.seed, aniso.prior_std)
    if ck is not None:
        runs = {}
        for name, sc in (("without_guidance", iso), ("with_guidance", aniso)):
            runs[name] = enhance(noisy, ck, sc)
        panels.append(("prior without guidance", runs["without_guidance"].prior_state.values))
        panels.append(("prior with guidance", runs["with_guidance"].prior_state.values))
        if x0 is not None:
            panels.append(("clean", x0.values))
        panels.append(("enhanced without guidance", runs["without_guidance"].final_state.values))
        panels.append(("enhanced with guidance", runs["with_guidance"].final_state.values))
    elif x0 is not None:
        g = guidance_from_mask(phase_sensitive_mask(x0, y))
        for title, sc in (("prior without guidance", iso), ("prior with guidance", aniso)):
            rng = np.random.default_rng(sc.seed)
            panels.append((title, sample_prior(y.values, noise_field(g, sc), sch, sc, rng)))
        panels.insert(1, ("clean", x0.values))

    written = []
    for i, (title, grid) in enumerate(panels):
        written.append(save_spectrogram(grid, out / f"panel_{i:02d}_{title.replace(' ', '_')}.png"))
    if len(panels) > 1:
        save_panel_grid(panels, out / "overview.png")
    (out / "visualize.json").write_text(json.dumps(
        {"config": cfg.as_dict(), "panels": [str(p.name) for p in written]}, indent=2))
    for p in written:
        print(p)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="anisoshift", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train mask net + denoiser from a manifest")
    _add_common(p)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--val-manifest", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--steps", type=int)
    p.set_defaults(func=cmd_train)

    def sampler_flags(p):
        p.add_argument("--guidance", choices=GUIDANCE_MODES)
        p.add_argument("--variance-mode", choices=VARIANCE_MODES)
        p.add_argument("--noise-free", action="store_true")

    p = sub.add_parser("enhance", help="enhance one WAV file")
    _add_common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--in", dest="inp", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    sampler_flags(p)
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("evaluate", help="SI-SNR report over a manifest")
    _add_common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--report", type=Path, required=True)
    sampler_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("schedule", help="dump the noise schedule as JSON")
    _add_common(p)
    p.add_argument("--dump", type=Path, help="output file ('-' or omitted: stdout)")
    p.add_argument("--variance-mode", choices=VARIANCE_MODES)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("visualize", help="spectrogram images of prior / enhanced states")
    _add_common(p)
    p.add_argument("--in", dest="inp", type=Path, required=True)
    p.add_argument("--clean", type=Path)
    p.add_argument("--checkpoint", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_visualize)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (errors.NumericalError, errors.ContractError, RuntimeError, ArithmeticError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
