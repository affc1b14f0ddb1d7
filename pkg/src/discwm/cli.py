"""Command-line entry point: ``discwm <subcommand> --spec file.json [overrides] --out DIR``.

Exit status is 0 on success, 1 on a configuration error and 2 when an
experiment's built-in checks fail.
"""

import argparse
import json
import os
import sys

import numpy as np

from .binarize import SimulatedBinaryLm
from .disc import DiscConfig, disc_decode_exhaustive, disc_decode_fast, disc_encode
from .harness import QUICK_TRIALS, ExperimentSpec, run_experiment, write_result
from .prf import SecretKey
from .zerobit import (DEFAULT_ENTROPY_THRESHOLD, EncoderConfig, WatermarkedText, detect_no_init, detect_with_init,
                      encode_no_init, encode_with_init)

EXIT_OK, EXIT_CONFIG, EXIT_CHECK = 0, 1, 2
SUBCOMMAND_KIND = {"ber-sweep": "ber_sweep", "lmin-curve": "lmin_curve", "fpr-calibrate": "fpr_calibration",
                   "roundtrip": "roundtrip"}


class ConfigError(Exception):
    pass


def _int_list(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _load_json(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    return data


def _read_key(args, cfg):
    if args.key_file:
        try:
            with open(args.key_file) as fh:
                return SecretKey.from_hex(fh.read().strip())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"bad key file: {exc}") from exc
    if cfg.get("key_seed") is not None:
        return SecretKey.from_seed(int(cfg["key_seed"]))
    raise ConfigError("a key is required: pass --key-file or set key_seed in the spec")


def _common(p):
    p.add_argument("--spec", help="JSON spec file; flags override its fields")
    p.add_argument("--out", default=".", help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="discwm", description="Embed, detect and run Monte Carlo experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed", help="generate a watermarked text from the simulated model")
    _common(p)
    p.add_argument("--key-file")
    p.add_argument("--key-seed", type=int)
    p.add_argument("--scheme", choices=["zerobit-noinit", "zerobit-init", "disc"])
    p.add_argument("--payload-bits", type=int)
    p.add_argument("--message", type=int)
    p.add_argument("--length-bits", type=int)
    p.add_argument("--model-seed", type=int)
    p.add_argument("--h-bits", type=int)
    p.add_argument("--rng-seed", type=int)
    p.add_argument("--no-init", action="store_true", help="disc: watermark from the first bit")

    p = sub.add_parser("detect", help="run a detector on a text artifact")
    _common(p)
    p.add_argument("--text", required=True, help="text artifact JSON")
    p.add_argument("--key-file")
    p.add_argument("--key-seed", type=int)
    p.add_argument("--scheme", choices=["zerobit-noinit", "zerobit-init", "disc"])
    p.add_argument("--payload-bits", type=int)
    p.add_argument("--h-bits", type=int)
    p.add_argument("--fpr", type=float)
    p.add_argument("--decoder", choices=["fast", "exhaustive"])
    p.add_argument("--fixed-chunk", type=int)

    for name, helptext in (("ber-sweep", "bit error rate against text length"),
                           ("lmin-curve", "minimum length curves"),
                           ("fpr-calibrate", "false positive rate on random texts"),
                           ("roundtrip", "fast versus exhaustive decoding")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        p.add_argument("--trials", type=int)
        p.add_argument("--quick", action="store_true", help=f"use {QUICK_TRIALS} trials")
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int, dest="parallelism")
        p.add_argument("--token-lengths", type=_int_list)
        p.add_argument("--payload-bits", type=_int_list, dest="payload_bits_list")
        p.add_argument("--fpr", type=float)
        p.add_argument("--fnr", type=float)
        p.add_argument("--decoder", choices=["fast", "exhaustive"])
        p.add_argument("--fixed-chunk", type=int)
        p.add_argument("--h-bits", type=int)
        p.add_argument("--length-bits", type=int)
        p.add_argument("--zetas", type=_float_list)
        p.add_argument("--coarse-grid-size", type=int)
    return parser


def _override(cfg, args, names):
    for name in names:
        value = getattr(args, name, None)
        if value is not None:
            cfg[name] = value
    return cfg


def cmd_embed(args):
    cfg = _override(_load_json(args.spec), args,
                    ["scheme", "payload_bits", "message", "length_bits", "model_seed", "h_bits", "rng_seed",
                     "key_seed"])
    key = _read_key(args, cfg)
    scheme = cfg.get("scheme", "zerobit-init")
    model_cfg = cfg.get("model", {})
    length = int(cfg.get("length_bits", model_cfg.get("length_bits", 340)))
    source = SimulatedBinaryLm(int(cfg.get("model_seed", model_cfg.get("seed", 0))), length,
                               model_cfg.get("law", "uniform01"), model_cfg.get("law_params"))
    enc = EncoderConfig(int(cfg.get("h_bits", 85)), length,
                        float(cfg.get("entropy_threshold", DEFAULT_ENTROPY_THRESHOLD)))
    # separate stream from the model seed, even when both seeds are equal
    rng = np.random.default_rng([int(cfg.get("rng_seed", 0)), 1])
    if scheme == "zerobit-noinit":
        text = encode_no_init(source, key, enc)
    elif scheme == "zerobit-init":
        text = encode_with_init(source, key, enc, rng)
    elif scheme == "disc":
        disc = DiscConfig(int(cfg.get("payload_bits", 4)))
        random_init = not (args.no_init or cfg.get("no_init", False))
        text = disc_encode(source, key, enc, disc, int(cfg.get("message", 0)), rng, random_init)
    else:
        raise ConfigError(f"unknown scheme {scheme!r}")
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "text.json")
    with open(path, "w") as fh:
        json.dump(text.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(path)
    return EXIT_OK


def cmd_detect(args):
    cfg = _override(_load_json(args.spec), args,
                    ["scheme", "payload_bits", "h_bits", "fpr", "decoder", "fixed_chunk", "key_seed"])
    key = _read_key(args, cfg)
    text = WatermarkedText.from_dict(_load_json(args.text))
    scheme = cfg.get("scheme", text.scheme)
    h = int(cfg.get("h_bits", 85))
    fpr = float(cfg.get("fpr", 0.01))
    chunks = [int(cfg["fixed_chunk"])] if cfg.get("fixed_chunk") is not None else None
    if scheme == "zerobit-noinit":
        report = detect_no_init(text.bits, key, h, fpr)
    elif scheme == "zerobit-init":
        report = detect_with_init(text.bits, key, h, fpr, chunks)
    elif scheme == "disc":
        disc = DiscConfig(int(cfg.get("payload_bits", text.payload_bits)))
        decode = disc_decode_exhaustive if cfg.get("decoder") == "exhaustive" else disc_decode_fast
        report = decode(text.bits, key, h, disc, fpr, chunks)
    else:
        raise ConfigError(f"unknown scheme {scheme!r}")
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "report.json")
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps({"is_watermarked": report.is_watermarked, "global_p_value": report.global_p_value}))
    return EXIT_OK


SPEC_OVERRIDES = ["trials", "seed", "parallelism", "token_lengths", "payload_bits_list", "fpr", "fnr", "decoder",
                  "fixed_chunk", "h_bits", "length_bits", "zetas", "coarse_grid_size"]


def cmd_experiment(args):
    cfg = _load_json(args.spec)
    cfg["kind"] = SUBCOMMAND_KIND[args.command]
    _override(cfg, args, SPEC_OVERRIDES)
    if args.quick:
        cfg["trials"] = QUICK_TRIALS
    spec = ExperimentSpec.from_dict(cfg)
    result = run_experiment(spec)
    csv_path, _ = write_result(result, args.out, spec.kind)
    print(csv_path)
    for name, check in result.checks.items():
        print(f"{'PASS' if check['passed'] else 'FAIL'} {name}")
    return EXIT_OK if result.passed else EXIT_CHECK


def main(argv=None):
    args = build_parser().parse_args(argv)
    handlers = {"embed": cmd_embed, "detect": cmd_detect}
    try:
        return handlers.get(args.command, cmd_experiment)(args)
    except (ConfigError, ValueError, KeyError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
