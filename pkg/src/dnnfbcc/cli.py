"""Command-line driver.

Subcommands: make-bank, extract, train-fbnn, export-learned-bank, train-gmm,
score, eval, inspect. Each writes its declared outputs plus a ``*.run.json``
sidecar with the preset, seed and SHA-256 digests of every input.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import dsp
from .cepstral import KIND_CEP_DELTAS, KIND_POWER, CepstralConfig, FrontEndConfig, append_deltas, cepstra
from .evaluation import ScoreEntry, aggregate_report, read_scores, write_scores
from .exceptions import ConfigurationError, EvaluationError, FormatError, ManifestError, NumericError
from .fbnn import FbnnModel, TrainConfig, effective_filter_bank, train_fbnn
from .fileio import (file_digest, load_container, parse_manifest, read_features, save_container,
                     write_features)
from .filterbanks import BankSpec, build_filter_bank, export_bank_csv, read_bank_csv
from .gmm import GmmModel, GmmTrainConfig, llr_score, train_gmm
from .presets import PRESETS, get_preset

logger = logging.getLogger("dnnfbcc")

INDEX_NAME = "index.tsv"


class StageError(Exception):
    def __init__(self, stage, message):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


def _sidecar_path(output):
    output = Path(output)
    return output / "run.json" if output.is_dir() else output.with_name(output.name + ".run.json")


def write_sidecar(output, command, args, inputs, preset=None, seed=None, extra=None):
    record = {
        "command": command,
        "preset": preset,
        "seed": seed,
        "options": {k: v for k, v in sorted(vars(args).items()) if k != "func" and not callable(v)},
        "inputs": {str(p): _digest(p) for p in inputs},
    }
    if extra:
        record.update(extra)
    _sidecar_path(output).write_text(json.dumps(record, indent=2, sort_keys=True, default=str) + "\n")


def _digest(path):
    """SHA-256 of a file; for an extract directory, of its index and every feature file in order."""
    path = Path(path)
    if not path.is_dir():
        return file_digest(path)
    h = hashlib.sha256(file_digest(path / INDEX_NAME).encode())
    for _, feature_path, *_ in read_index(path):
        h.update(file_digest(feature_path).encode())
    return h.hexdigest()


# -- feature directories -----------------------------------------------------

def read_index(directory):
    """Rows of ``(utt_id, path, label, attack_id, class_index)`` from an extract output."""
    directory = Path(directory)
    index = directory / INDEX_NAME
    if not index.is_file():
        raise FormatError(f"{directory} has no {INDEX_NAME}; run 'extract' first")
    rows = []
    for line in index.read_text().splitlines():
        utt, name, label, attack, cls = line.split("\t")
        rows.append((utt, directory / name, label, attack, int(cls)))
    return rows


def load_feature_dir(directory, kind=None):
    rows = read_index(directory)
    feats = []
    for utt, path, *_ in rows:
        matrix, found = read_features(path)
        if kind is not None and found != kind:
            raise FormatError(f"{path}: expected {kind} features, found {found}")
        feats.append(matrix.astype(np.float64))
    return rows, feats


def _extract_one(job):
    path, sample_rate, frontend, cep_cfg = job
    audio = dsp.read_wav(path)
    if audio.sample_rate != sample_rate:
        raise ConfigurationError(f"{path}: sample rate {audio.sample_rate} Hz, expected {sample_rate} Hz")
    power = dsp.power_spectrogram(audio, frontend.nfft, frontend.frame_ms, frontend.hop_ms,
                                  frontend.pre_emphasis)
    if cep_cfg is None:
        return power
    return append_deltas(cepstra(power, cep_cfg), cep_cfg)


# -- subcommands ---------------------------------------------------------------

def _preset_dims(args):
    preset = get_preset(args.preset)
    return preset, args.nfft or preset.nfft, args.channels or preset.channels


def cmd_make_bank(args):
    if args.kind:
        nfft = args.nfft or 512
        channels = args.channels or 20
        kind, preset_name = args.kind, None
    else:
        preset, nfft, channels = _preset_dims(args)
        kind, preset_name = preset.bank_kind, preset.name
    spec = BankSpec(kind, channels, nfft, args.sample_rate, args.f_low, args.f_high)
    export_bank_csv(build_filter_bank(spec), args.out, args.sample_rate)
    write_sidecar(args.out, "make-bank", args, [], preset=preset_name)
    print(f"wrote {kind} bank ({nfft // 2 + 1} bins x {channels} channels) to {args.out}")


def cmd_extract(args):
    preset, nfft, channels = _preset_dims(args)
    manifest = parse_manifest(args.manifest)
    inputs = [Path(args.manifest)] + [row.audio_path for row in manifest]
    frontend = FrontEndConfig(nfft=nfft, pre_emphasis=args.pre_emphasis)
    cep_cfg = None
    if args.mode == "cep":
        if preset.learned:
            if not args.model:
                raise StageError("extract", f"preset {preset.name} needs --model with a trained FBNN")
            tensors, _ = load_container(args.model, kind="fbnn")
            bank = effective_filter_bank(FbnnModel.from_tensors(tensors))
            inputs.append(Path(args.model))
        elif args.bank:
            bank, _ = read_bank_csv(args.bank)
            inputs.append(Path(args.bank))
        else:
            bank = build_filter_bank(preset.bank_spec(args.sample_rate, nfft, channels))
        if bank.shape[0] != nfft // 2 + 1:
            raise StageError("extract", f"bank has {bank.shape[0]} bins but nfft={nfft} gives {nfft // 2 + 1}")
        cep_cfg = CepstralConfig(bank, num_coeffs=args.coeffs or preset.num_coeffs,
                                 include_static=args.include_static)
    kind = KIND_POWER if cep_cfg is None else KIND_CEP_DELTAS

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(row.audio_path, args.sample_rate, frontend, cep_cfg) for row in manifest]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_extract_one, jobs))
    else:
        results = [_extract_one(job) for job in jobs]
    index_lines = []
    for row, feats in zip(manifest, results):
        name = f"{row.utt_id}.fbf"
        write_features(out / name, feats, kind)
        index_lines.append(f"{row.utt_id}\t{name}\t{row.label}\t{row.attack_id}\t{row.class_index}")
    (out / INDEX_NAME).write_text("\n".join(index_lines) + "\n")
    write_sidecar(out, "extract", args, inputs, preset=preset.name)
    print(f"extracted {len(manifest)} utterances ({kind}) to {out}")


def cmd_train_fbnn(args):
    preset, nfft, channels = _preset_dims(args)
    rows, feats = load_feature_dir(args.features, kind=KIND_POWER)
    inputs = [Path(args.features)]
    X = np.concatenate(feats)
    y = np.concatenate([np.full(f.shape[0], r[4], dtype=np.int64) for r, f in zip(rows, feats)])
    if args.mask:
        mask, _ = read_bank_csv(args.mask)
        inputs.append(Path(args.mask))
    else:
        mask = build_filter_bank(preset.bank_spec(args.sample_rate, nfft, channels))
    cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size, seed=args.seed, n_hidden=args.hidden)
    model, losses = train_fbnn(X, y, mask, cfg)
    meta = {"preset": preset.name, "seed": args.seed, "epochs": cfg.epochs, "batch_size": cfg.batch_size,
            "schedule": cfg.resolved_schedule(), "n_hidden": cfg.n_hidden, "init_range": cfg.init_range,
            "epoch_losses": losses, "nfft": 2 * (mask.shape[0] - 1), "sample_rate": args.sample_rate}
    save_container(args.out, "fbnn", model.tensors(), meta)
    write_sidecar(args.out, "train-fbnn", args, inputs, preset=preset.name, seed=args.seed,
                  extra={"epoch_losses": losses})
    print(f"trained FBNN on {X.shape[0]} frames; final epoch loss {losses[-1]:.6f}")


def cmd_export_learned_bank(args):
    tensors, meta = load_container(args.model, kind="fbnn")
    bank = effective_filter_bank(FbnnModel.from_tensors(tensors))
    export_bank_csv(bank, args.out, meta.get("sample_rate", args.sample_rate))
    write_sidecar(args.out, "export-learned-bank", args, [args.model], preset=meta.get("preset"),
                  seed=meta.get("seed"))
    print(f"wrote learned bank ({bank.shape[0]} bins x {bank.shape[1]} channels) to {args.out}")


def cmd_train_gmm(args):
    rows, feats = load_feature_dir(args.features)
    pooled = [f for r, f in zip(rows, feats) if r[2] == args.label]
    if not pooled:
        raise StageError("train-gmm", f"no {args.label} utterances in {args.features}")
    cfg = GmmTrainConfig(n_components=args.gmm_k, em_iters=args.em_iters, seed=args.seed)
    model, trace = train_gmm(np.concatenate(pooled), cfg)
    meta = {"label": args.label, "seed": args.seed, "n_components": cfg.n_components,
            "em_iters": cfg.em_iters, "var_floor_factor": cfg.var_floor_factor, "init": cfg.init,
            "log_likelihood_trace": trace}
    save_container(args.out, "gmm", model.tensors(), meta)
    write_sidecar(args.out, "train-gmm", args, [Path(args.features)], seed=args.seed)
    print(f"trained {cfg.n_components}-component {args.label} GMM on {sum(len(f) for f in pooled)} frames")


def cmd_score(args):
    rows, feats = load_feature_dir(args.features)
    human = GmmModel.from_tensors(load_container(args.human, kind="gmm")[0])
    spoof = GmmModel.from_tensors(load_container(args.spoof, kind="gmm")[0])
    entries = []
    for (utt, _, label, attack, _), f in zip(rows, feats):
        try:
            entries.append(ScoreEntry(utt, llr_score(f, human, spoof), label, attack))
        except EvaluationError as exc:
            raise StageError("score", f"utterance {utt}: {exc}") from exc
    write_scores(args.out, entries)
    write_sidecar(args.out, "score", args, [Path(args.features), args.human, args.spoof])
    print(f"scored {len(entries)} utterances to {args.out}")


def _split_ids(text):
    return [t for t in (text or "").split(",") if t]


def cmd_eval(args):
    report = aggregate_report(read_scores(args.scores), _split_ids(args.known), _split_ids(args.unknown),
                              pooled=args.pooled)
    sys.stdout.write(report.format_table(args.feature_name))
    if args.json:
        Path(args.json).write_text(report.to_json())
        write_sidecar(args.json, "eval", args, [args.scores])


def cmd_inspect(args):
    path = Path(args.path)
    head = path.read_bytes()[:4]
    if head == b"FBF1":
        feats, kind = read_features(path)
        print(f"FBF1 features: {feats.shape[0]} frames x {feats.shape[1]} dims, kind={kind}")
        if feats.size:
            print(f"  min {feats.min():.6g}  max {feats.max():.6g}  mean {feats.mean():.6g}")
    elif path.suffix == ".csv":
        bank, freqs = read_bank_csv(path)
        peaks = freqs[np.argmax(bank, axis=0)]
        print(f"filter bank: {bank.shape[0]} bins x {bank.shape[1]} channels")
        print("  peak frequencies (Hz): " + ", ".join(f"{f:.0f}" for f in peaks))
    else:
        doc = json.loads(path.read_text())
        print(f"{doc.get('kind')} model ({doc.get('format')})")
        for name, rec in sorted(doc.get("tensors", {}).items()):
            print(f"  {name}: shape {tuple(rec['shape'])}")
        for key, value in sorted(doc.get("meta", {}).items()):
            if not isinstance(value, list):
                print(f"  {key} = {value}")


# -- argument parsing ------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="dnnfbcc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def preset_args(p, default="lfcc"):
        p.add_argument("--preset", choices=sorted(PRESETS), default=default)
        p.add_argument("--nfft", type=int, help="override the preset FFT size")
        p.add_argument("--channels", type=int, help="override the preset channel count")
        p.add_argument("--sample-rate", type=int, default=dsp.DEFAULT_SAMPLE_RATE)

    p = sub.add_parser("make-bank", help="build a manual filter bank and export it as CSV")
    preset_args(p)
    p.add_argument("--kind", choices=["triangular", "rectangular", "gammatone", "inverted_gammatone"])
    p.add_argument("--f-low", type=float)
    p.add_argument("--f-high", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_bank)

    p = sub.add_parser("extract", help="compute power spectra or delta cepstra for a manifest")
    preset_args(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--mode", choices=["power", "cep"], default="cep")
    p.add_argument("--model", help="trained FBNN (required for dnn-* presets)")
    p.add_argument("--bank", help="CSV filter bank overriding the preset bank")
    p.add_argument("--coeffs", type=int, help="number of cepstral coefficients")
    p.add_argument("--include-static", action="store_true")
    p.add_argument("--pre-emphasis", type=float, default=dsp.DEFAULT_PRE_EMPHASIS)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train-fbnn", help="train the filter bank neural network on power spectra")
    preset_args(p, default="dnn-lfcc")
    p.add_argument("--features", required=True, help="directory written by 'extract --mode power'")
    p.add_argument("--mask", help="CSV mask overriding the preset bank")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--hidden", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_fbnn)

    p = sub.add_parser("export-learned-bank", help="write a trained FBNN's filter bank as CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--sample-rate", type=int, default=dsp.DEFAULT_SAMPLE_RATE)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_learned_bank)

    p = sub.add_parser("train-gmm", help="train one class GMM on extracted features")
    p.add_argument("--features", required=True)
    p.add_argument("--label", choices=["human", "spoof"], required=True)
    p.add_argument("--gmm-k", type=int, default=512)
    p.add_argument("--em-iters", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_gmm)

    p = sub.add_parser("score", help="average log-likelihood ratio per utterance")
    p.add_argument("--features", required=True)
    p.add_argument("--human", required=True)
    p.add_argument("--spoof", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="per-attack and averaged EERs from a score file")
    p.add_argument("--scores", required=True)
    p.add_argument("--known", default="", help="comma-separated known attack ids")
    p.add_argument("--unknown", default="", help="comma-separated unknown attack ids")
    p.add_argument("--pooled", action="store_true", help="pool trials per group instead of averaging EERs")
    p.add_argument("--feature-name", default="score")
    p.add_argument("--json", help="also write the report as JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("inspect", help="summarise a feature file, model or bank CSV")
    p.add_argument("path")
    p.set_defaults(func=cmd_inspect)
    return parser


def run_command(argv=None):
    """Parse ``argv`` and run the subcommand; returns the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except StageError as exc:
        print(f"error in {exc}", file=sys.stderr)
        return 1
    except (ConfigurationError, EvaluationError, FormatError, ManifestError, NumericError, OSError) as exc:
        print(f"error in {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run_command())
