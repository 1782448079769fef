"""Command-line experiments: attack, sweep, thresholds, compare, train, dataset.

Exit codes: 0 success, 1 usage or I/O error, 2 attack did not converge.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from . import attack as atk
from .audio_io import WavError, build_keyword_dataset, read_wav, write_wav
from .oracle import ToyKeywordModel, TrainingError, train_toy
from .psychoacoustic import generate_thresholds, write_thresholds_csv
from .spectral import StftConfig, magnitude, stft

log = logging.getLogger("psyadv")

EXIT_OK, EXIT_ERROR, EXIT_NO_CONVERGENCE = 0, 1, 2

MODE_FLAGS = {
    "equalize": atk.EQUALIZE_VIOLATING,
    "equalize_all": atk.EQUALIZE_ALL,
    "hard_clip": atk.HARD_CLIP,
    "plain": atk.PLAIN_SCALE,
}

METRICS_FIELDS = ["target", "success", "iterations", "snr_db", "violations", "wall_time"]
DETAIL_FIELDS = ["k", "sample_id", "target", "success", "iterations", "snr_db", "violations"]
AGGREGATE_FIELDS = ["k", "success_rate", "mean_iterations"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _non_negative_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _epsilon(text):
    value = float(text)
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1], got {value}")
    return value


def _k_list(text):
    try:
        ks = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not ks or any(k < 0 for k in ks):
        raise argparse.ArgumentTypeError(f"values must be >= 0, got {text!r}")
    return ks


def _fmt(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    return v


def _write_rows(path, fields, rows, append=False):
    exists = append and os.path.exists(path) and os.path.getsize(path) > 0
    with open(path, "a" if append else "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if not exists:
            w.writerow(fields)
        for row in rows:
            w.writerow([_fmt(row[f]) for f in fields])


def _stft_config(args) -> StftConfig:
    return StftConfig(frame_len=args.frame_len, hop=args.hop)


def _oracle(args) -> ToyKeywordModel:
    if args.model:
        return ToyKeywordModel.load(args.model)
    data = build_keyword_dataset(args.n_classes, args.n_per_class, seed=args.data_seed)
    return train_toy(data, seed=args.data_seed)


def _attack_config(args) -> atk.AttackConfig:
    mode = MODE_FLAGS[args.mode]
    if mode == atk.HARD_CLIP and args.beta is None:
        raise UsageError("--beta is required with --mode hard_clip")
    k = args.k if isinstance(args.k, int) else 1  # sweep overrides k per run
    return atk.AttackConfig(epsilon=args.epsilon, k=k, max_iters=args.max_iters,
                            mode=mode, beta=args.beta, stft=_stft_config(args))


def cmd_attack(args) -> int:
    config = _attack_config(args)
    x = read_wav(args.input)
    model = _oracle(args)
    if not 0 <= args.target < model.n_classes:
        raise UsageError(f"--target must lie in [0, {model.n_classes}), got {args.target}")
    outcome = atk.run_attack(model, x, args.target, config)
    write_wav(outcome.adversarial, args.out)
    if args.metrics:
        _write_rows(args.metrics, METRICS_FIELDS, [{
            "target": args.target, "success": outcome.success,
            "iterations": outcome.iterations_used, "snr_db": outcome.snr_db,
            "violations": outcome.violations, "wall_time": outcome.wall_time,
        }], append=True)
    log.info("success=%s iterations=%d snr=%.2f dB", outcome.success,
             outcome.iterations_used, outcome.snr_db)
    return EXIT_OK if outcome.success else EXIT_NO_CONVERGENCE


def run_sweep(model, buffers, ks, n_pairs, seed, base_config: atk.AttackConfig, jobs=1):
    """Return (detail rows, aggregate rows) for a k sweep over seeded pairs."""
    n_classes = model.n_classes
    pairs = atk.sample_pairs(model, buffers, n_pairs, seed, n_classes)
    thresholds = {}
    for i, _ in pairs:
        if i not in thresholds:
            x = buffers[i]
            thresholds[i] = generate_thresholds(magnitude(stft(x, base_config.stft)),
                                                x.sample_rate, base_config.stft)
    jobs_list = [(k, i, t) for k in ks for i, t in pairs]

    def one(job):
        k, i, t = job
        o = atk.run_attack(model, buffers[i], t, replace(base_config, k=k),
                           thresholds=thresholds[i])
        return {"k": k, "sample_id": i, "target": t, "success": o.success,
                "iterations": o.iterations_used, "snr_db": o.snr_db, "violations": o.violations}

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            detail = list(pool.map(one, jobs_list))
    else:
        detail = [one(j) for j in jobs_list]

    aggregate = []
    for k in ks:
        rows = [r for r in detail if r["k"] == k]
        won = [r["iterations"] for r in rows if r["success"]]
        aggregate.append({"k": k, "success_rate": len(won) / len(rows),
                          "mean_iterations": float(np.mean(won)) if won else float("nan")})
    return detail, aggregate


def cmd_sweep(args) -> int:
    config = _attack_config(args)
    model = _oracle(args)
    buffers, _ = build_keyword_dataset(model.n_classes, args.n_per_class, seed=args.data_seed)
    detail, aggregate = run_sweep(model, buffers, args.k, args.pairs, args.seed, config, args.jobs)
    _write_rows(args.detail, DETAIL_FIELDS, detail)
    _write_rows(args.aggregate, AGGREGATE_FIELDS, aggregate)
    for row in aggregate:
        log.info("k=%d success_rate=%.3f mean_iterations=%.2f",
                 row["k"], row["success_rate"], row["mean_iterations"])
    return EXIT_OK


def cmd_thresholds(args) -> int:
    x = read_wav(args.input)
    config = _stft_config(args)
    thresholds = generate_thresholds(magnitude(stft(x, config)), x.sample_rate, config)
    write_thresholds_csv(thresholds, args.out)
    return EXIT_OK


def cmd_compare(args) -> int:
    if args.amplitude <= 0:
        raise UsageError("--amplitude must be positive")
    outputs = atk.compare_projections(args.freq, args.amplitude, args.clip_ratio, args.k,
                                      args.duration, args.sample_rate, _stft_config(args))
    os.makedirs(args.out_dir, exist_ok=True)
    write_wav(outputs["hard_clip"], os.path.join(args.out_dir, "hard_clip.wav"))
    write_wav(outputs["equalize"], os.path.join(args.out_dir, "equalized.wav"))
    _write_rows(os.path.join(args.out_dir, "compare.csv"),
                ["method", "harmonic_distortion_db", "snr_db"],
                atk.distortion_report(outputs, args.freq))
    return EXIT_OK


def cmd_train(args) -> int:
    data = build_keyword_dataset(args.n_classes, args.n_per_class, seed=args.data_seed)
    model = train_toy(data, epochs=args.epochs, lr=args.lr, seed=args.data_seed)
    model.save(args.out)
    return EXIT_OK


def cmd_dataset(args) -> int:
    buffers, labels = build_keyword_dataset(args.n_classes, args.n_per_class, seed=args.data_seed)
    os.makedirs(args.out_dir, exist_ok=True)
    rows = []
    for i, (b, y) in enumerate(zip(buffers, labels)):
        name = f"sample_{i:04d}.wav"
        write_wav(b, os.path.join(args.out_dir, name))
        rows.append({"sample_id": i, "file": name, "label": int(y)})
    _write_rows(os.path.join(args.out_dir, "labels.csv"), ["sample_id", "file", "label"], rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="psyadv", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def stft_flags(p):
        p.add_argument("--frame-len", type=_positive_int, default=2048)
        p.add_argument("--hop", type=_positive_int, default=512)

    def data_flags(p):
        p.add_argument("--n-classes", type=_positive_int, default=4)
        p.add_argument("--n-per-class", type=_positive_int, default=25)
        p.add_argument("--data-seed", type=int, default=0,
                       help="seed for the toy dataset and model training")

    def attack_flags(p):
        p.add_argument("--model", help="toy model checkpoint; trained on the fly if omitted")
        p.add_argument("--epsilon", type=_epsilon, default=1.0)
        p.add_argument("--mode", choices=sorted(MODE_FLAGS), default="equalize")
        p.add_argument("--beta", type=float, help="clip bound for --mode hard_clip")
        p.add_argument("--max-iters", type=_positive_int, default=1000)
        data_flags(p)
        stft_flags(p)

    p = sub.add_parser("attack", help="attack one WAV file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--k", type=_non_negative_int, default=1, help="Griffin-Lim iterations")
    p.add_argument("--out", required=True)
    p.add_argument("--metrics", help="CSV to append one metrics row to")
    attack_flags(p)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("sweep", help="success rate and iterations versus k")
    p.add_argument("--k", type=_k_list, default=[1, 2, 4, 8])
    p.add_argument("--pairs", type=_positive_int, default=50)
    p.add_argument("--seed", type=int, default=7, help="seed for the (sample, target) sampler")
    p.add_argument("--detail", default="sweep_detail.csv")
    p.add_argument("--aggregate", default="sweep_aggregate.csv")
    p.add_argument("--jobs", type=_positive_int, default=1)
    attack_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("thresholds", help="dump masking thresholds of a WAV file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    stft_flags(p)
    p.set_defaults(func=cmd_thresholds)

    p = sub.add_parser("compare", help="hard clipping versus equalization on a tone")
    p.add_argument("--freq", type=float, default=500.0)
    p.add_argument("--amplitude", type=float, default=0.5)
    p.add_argument("--clip-ratio", type=float, default=0.6)
    p.add_argument("--duration", type=float, default=1.0)
    p.add_argument("--sample-rate", type=_positive_int, default=16000)
    p.add_argument("--k", type=_non_negative_int, default=1)
    p.add_argument("--out-dir", required=True)
    stft_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("train", help="train and save the toy keyword model")
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=_positive_int, default=150)
    p.add_argument("--lr", type=float, default=2.0)
    data_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("dataset", help="write the toy keyword dataset as WAV files")
    p.add_argument("--out-dir", required=True)
    data_flags(p)
    p.set_defaults(func=cmd_dataset)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, WavError, TrainingError, OSError, ValueError) as exc:
        print(f"psyadv {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
