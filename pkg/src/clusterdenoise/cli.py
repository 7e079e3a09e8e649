"""Command-line interface: ``clusterdenoise <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .bounds import clustering_cost
from .clustering import ClusterModel, cluster_spectrum
from .dictionary import Dictionary
from .image_io import NoiseSpec, add_awgn, load_pgm, psnr, save_pgm
from .pipeline import PipelineConfig, compare_selection, denoise_image, train_dictionary


def _config(args) -> PipelineConfig:
    doc = {}
    if args.config:
        doc = json.loads(Path(args.config).read_text())
    return PipelineConfig.from_dict(doc, sigma=getattr(args, "sigma", None))


def _dump(obj, path=None):
    text = json.dumps(obj, indent=2, default=str)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


def cmd_add_noise(args):
    img = load_pgm(args.input)
    save_pgm(args.output, add_awgn(img, NoiseSpec(args.sigma, args.seed)))


def cmd_psnr(args):
    value = psnr(load_pgm(args.a), load_pgm(args.b))
    print("inf" if math.isinf(value) else f"{value:.4f}")


def cmd_denoise(args):
    cfg = _config(args)
    noisy = load_pgm(args.input)
    clean = load_pgm(args.clean) if args.clean else None
    dictionary = Dictionary.from_json(Path(args.dict).read_text()) if args.dict else None
    out, report = denoise_image(noisy, cfg, clean, dictionary)
    save_pgm(args.output, out)
    if args.report:
        _dump(report.to_dict(), args.report)
    if report.psnr_denoised is not None:
        print(f"PSNR noisy {report.psnr_noisy:.2f} dB -> denoised {report.psnr_denoised:.2f} dB")


def cmd_train(args):
    cfg = _config(args)
    trained = train_dictionary(load_pgm(args.input), cfg)
    Path(args.dict).write_text(trained.dictionary.to_json())
    if args.clusters_out:
        Path(args.clusters_out).write_text(trained.model.to_json(include_data=True))
    print(
        f"{trained.dictionary.n_atoms} atoms from {trained.training_blocks.shape[0]} "
        f"training blocks (retained {trained.retained_fraction:.3f}), J={trained.J_omega:.6g}"
    )


def cmd_bound(args):
    model = ClusterModel.from_json(Path(args.model).read_text())
    if model.data is None:
        raise ValueError("cluster model has no 'data' field; cannot compute eigenvalues")
    spectrum = cluster_spectrum(model.data, model, args.sigma)
    cost = clustering_cost(spectrum, args.sigma, args.smooth_cutoff)
    _dump(
        {
            "sigma": args.sigma,
            "J_omega": cost.total,
            "J_omega_non_smooth": cost.non_smooth,
            "n_clusters": model.n_clusters,
            "n_empty_clusters": len(spectrum.empty),
            "n_smooth_clusters": cost.n_smooth_clusters,
        }
    )


def cmd_compare(args):
    cfg = _config(args)
    equalized, uniform = compare_selection(load_pgm(args.input), cfg, load_pgm(args.clean))
    doc = {
        "equalized": equalized.to_dict(),
        "uniform": uniform.to_dict(),
        "psnr_gain_db": equalized.psnr_denoised - uniform.psnr_denoised,
    }
    _dump(doc, args.report)
    print(
        f"equalized {equalized.psnr_denoised:.3f} dB, uniform {uniform.psnr_denoised:.3f} dB, "
        f"gain {doc['psnr_gain_db']:+.3f} dB"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clusterdenoise", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("add-noise", help="add seeded white Gaussian noise")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_add_noise)

    p = sub.add_parser("psnr", help="PSNR between two images")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_psnr)

    def config_args(p):
        p.add_argument("--config", help="JSON file with pipeline settings")
        p.add_argument("--sigma", type=float, help="noise std (overrides the config)")

    p = sub.add_parser("denoise", help="denoise an image")
    config_args(p)
    p.add_argument("--dict", help="reuse a dictionary written by 'train'")
    p.add_argument("--clean", help="clean reference for PSNR reporting")
    p.add_argument("--report", help="write the JSON report here")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("train", help="learn a dictionary and save it as JSON")
    config_args(p)
    p.add_argument("--clusters-out", help="also save the clustering (with training data)")
    p.add_argument("input")
    p.add_argument("dict")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bound", help="clustering cost of a saved clustering")
    p.add_argument("--model", required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--smooth-cutoff", type=float, default=None)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("compare-selection", help="equalized vs uniform training selection")
    config_args(p)
    p.add_argument("--clean", required=True)
    p.add_argument("--report", help="write both reports here instead of stdout")
    p.add_argument("input")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
