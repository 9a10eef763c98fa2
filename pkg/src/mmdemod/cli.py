"""Command-line entry point: demodulate, featurize, evaluate.

Configuration comes from flags and/or a flat key=value config file; an
explicit flag always beats the file. The effective configuration is echoed
into a sidecar next to the outputs, and the sidecar itself is a valid config
file, so any run can be reproduced from its own sidecar.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import eval_harness, features
from .audio_io import load_wav
from .demod import MediumFrameConfig, esa_single, mmd_demodulate
from .eval_harness import ScenarioConfig, run_scenario
from .features import FrameConfig, FeatureMatrix
from .filterbank import Filterbank, FilterbankConfig, design_filterbank

PROFILES = {
    "mif": {"num_filters": 12, "overlap": 0.70, "kind": "mif"},
    "cif": {"num_filters": 6, "overlap": 0.50, "kind": "cif"},
}


@dataclass
class RunConfig:
    input: str | None = None
    output_dir: str = "."
    profile: str = "mif"
    kind: str | None = None  # defaults to the profile's kind
    mmd: bool = False
    single_channel: int = 0
    num_filters: int | None = None  # defaults to the profile's count
    fmin: float = 200.0
    fmax: float | None = None  # defaults to 0.45 * sample rate
    overlap: float | None = None  # defaults to the profile's overlap
    win: float = 0.025
    hop: float = 0.010
    medium_len: float = 0.1
    num_dct: int = 10
    splice: int = 0
    standardize: str = "on"
    cmvn: str = "off"
    format: str = "csv"
    snr: str = "20,10,0,-5,-10"
    trials: int = 20
    channels: int = 3
    rir: str = ""
    noise_wav: str | None = None
    seed: int = 0
    duration: float = 2.0
    preset: str = "vowel"
    jobs: int = 1


def _parse_config_file(path: str) -> dict:
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def _coerce(name: str, value: str):
    for f in fields(RunConfig):
        if f.name == name:
            if f.type in ("bool", bool):
                return value.lower() in ("1", "true", "yes", "on")
            for typ in (int, float):
                if f.type in (typ.__name__, typ, f"{typ.__name__} | None"):
                    return typ(value)
            return value
    raise ValueError(f"unknown config key: {name}")


def build_config(args: argparse.Namespace) -> RunConfig:
    """Layer defaults < profile < config file < explicit flags."""
    cfg = RunConfig()
    file_values = _parse_config_file(args.config) if args.config else {}
    profile = (args.profile or file_values.get("profile") or cfg.profile)
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}")
    cfg.profile = profile
    for key, value in file_values.items():
        if key == "profile":
            continue
        setattr(cfg, key, _coerce(key, value))
    for f in fields(RunConfig):
        flag_value = getattr(args, f.name, None)
        if flag_value is not None:
            setattr(cfg, f.name, flag_value)
    prof = PROFILES[profile]
    if cfg.kind is None:
        cfg.kind = prof["kind"]
    if cfg.num_filters is None:
        cfg.num_filters = prof["num_filters"]
    if cfg.overlap is None:
        cfg.overlap = prof["overlap"]
    return cfg


def _effective_items(cfg: RunConfig) -> dict:
    items = {f.name: getattr(cfg, f.name) for f in fields(RunConfig)}
    return {k: v for k, v in items.items() if v is not None}


def _bank_for(cfg: RunConfig, sample_rate: int) -> Filterbank:
    fmax = cfg.fmax if cfg.fmax is not None else 0.45 * sample_rate
    return design_filterbank(FilterbankConfig(
        num_filters=cfg.num_filters, f_min=cfg.fmin, f_max=fmax,
        overlap=cfg.overlap, sample_rate=sample_rate))


def _demodulate(cfg: RunConfig, audio, bank):
    if cfg.mmd:
        if audio.num_channels < 2:
            raise ValueError("MMD requires >=2 channels")
        return mmd_demodulate(audio, bank, MediumFrameConfig(cfg.medium_len,
                                                             cfg.medium_len),
                              with_selections=True)
    if not (0 <= cfg.single_channel < audio.num_channels):
        raise ValueError(f"channel index {cfg.single_channel} out of range")
    channel = audio.channels[cfg.single_channel]
    return [esa_single(channel, f, channel=cfg.single_channel) for f in bank], None


def _write_track_csv(path: Path, demods, attr: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(f"band{d.band_index:02d}" for d in demods) + "\n")
        columns = [getattr(d, attr) for d in demods]
        for row in zip(*columns):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def cmd_demod(cfg: RunConfig) -> int:
    if not cfg.input:
        raise ValueError("demod requires --input")
    audio = load_wav(cfg.input)
    bank = _bank_for(cfg, audio.sample_rate)
    demods, selections = _demodulate(cfg, audio, bank)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_track_csv(out / "freq.csv", demods, "freq")
    _write_track_csv(out / "amp.csv", demods, "amp")
    if selections is not None:
        with open(out / "pairs.csv", "w", encoding="utf-8") as fh:
            fh.write("band,frame,m_hat,l_hat,mean_energy\n")
            for sel in selections:
                for j in range(sel.num_frames):
                    fh.write(f"{sel.band_index},{j},{sel.m_hat[j]},"
                             f"{sel.l_hat[j]},{sel.mean_energy[j]!r}\n")
    features.write_sidecar(_effective_items(cfg), out / "run.sidecar",
                           notes={"sample_rate": audio.sample_rate})
    return 0


def cmd_features(cfg: RunConfig) -> int:
    if not cfg.input:
        raise ValueError("features requires --input")
    audio = load_wav(cfg.input)
    bank = _bank_for(cfg, audio.sample_rate)
    demods, _ = _demodulate(cfg, audio, bank)
    if cfg.standardize == "on":
        demods = features.standardize_bands(demods)
    fcfg = FrameConfig(win=cfg.win, hop=cfg.hop)
    if cfg.kind == "mif":
        mat = features.extract_mif(demods, fcfg)
    elif cfg.kind == "cif":
        mat = features.extract_cif(demods, fcfg, num_dct=cfg.num_dct)
    else:
        raise ValueError(f"unknown feature kind {cfg.kind!r}")
    if cfg.splice > 0:
        mat = features.splice(mat, context=cfg.splice)
    if cfg.cmvn == "on":
        mat = features.cmvn(mat)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.format == "csv":
        target = out / "features.csv"
        features.save_feature_csv(mat, target)
    elif cfg.format == "mmdf":
        target = out / "features.mmdf"
        features.save_mmdf(mat, target)
    else:
        raise ValueError(f"unknown output format {cfg.format!r}")
    features.write_sidecar(
        _effective_items(cfg), str(target) + ".sidecar",
        notes={"sample_rate": audio.sample_rate, "rows": mat.num_frames,
               "cols": mat.dim})
    return 0


def _scenario_spec(cfg: RunConfig, sample_rate: int):
    if cfg.preset == "vowel":
        return eval_harness.vowel_like(sample_rate, cfg.duration)
    if cfg.preset == "fricative":
        return eval_harness.fricative_like(sample_rate, cfg.duration)
    if cfg.preset == "tone":
        return eval_harness.calibration_tone(sample_rate, cfg.duration)
    raise ValueError(f"unknown preset {cfg.preset!r}")


def cmd_evaluate(cfg: RunConfig) -> int:
    sample_rate = 16000
    spec = _scenario_spec(cfg, sample_rate)
    bank = _bank_for(cfg, sample_rate)
    snrs = tuple(float(s) for s in cfg.snr.split(",") if s.strip())
    scenario = ScenarioConfig(
        num_channels=cfg.channels, snr_db_list=snrs, trials=cfg.trials,
        seed=cfg.seed,
        rir_paths=tuple(p for p in cfg.rir.split(",") if p.strip()),
        noise_wav=cfg.noise_wav)
    result = run_scenario(
        spec, scenario, bank,
        MediumFrameConfig(cfg.medium_len, cfg.medium_len),
        FrameConfig(win=cfg.win, hop=cfg.hop), jobs=cfg.jobs)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    eval_harness.write_trial_csv(result, out / "trials.csv")
    eval_harness.write_aggregate_csv(result, out / "aggregate.csv")
    features.write_sidecar(_effective_items(cfg), out / "run.sidecar",
                           notes={"sample_rate": sample_rate})
    print("snr_db  mean_reduction_pct  std  n")
    for agg in result.aggregates:
        print(f"{agg['snr_db']:6.1f}  {agg['mean']:18.3f}  {agg['std']:.3f}  {agg['n']}")
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input")
    parser.add_argument("--output-dir", dest="output_dir")
    parser.add_argument("--profile", choices=sorted(PROFILES))
    parser.add_argument("--config")
    parser.add_argument("--mmd", action="store_const", const=True, default=None)
    parser.add_argument("--single-channel", dest="single_channel", type=int)
    parser.add_argument("--num-filters", dest="num_filters", type=int)
    parser.add_argument("--fmin", type=float)
    parser.add_argument("--fmax", type=float)
    parser.add_argument("--overlap", type=float)
    parser.add_argument("--win", type=float)
    parser.add_argument("--hop", type=float)
    parser.add_argument("--medium-len", dest="medium_len", type=float)
    parser.add_argument("--seed", type=int)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmdemod",
        description="Multichannel multiband AM-FM demodulation front-end")
    sub = parser.add_subparsers(dest="mode", required=True)
    p_demod = sub.add_parser("demod", help="write per-band freq/amp tracks")
    _add_common(p_demod)
    p_feat = sub.add_parser("features", help="extract MIF/CIF feature matrices")
    _add_common(p_feat)
    p_feat.add_argument("--kind", choices=["mif", "cif"])
    p_feat.add_argument("--num-dct", dest="num_dct", type=int)
    p_feat.add_argument("--splice", type=int)
    p_feat.add_argument("--standardize", choices=["on", "off"])
    p_feat.add_argument("--cmvn", choices=["on", "off"])
    p_feat.add_argument("--format", choices=["csv", "mmdf"])
    p_eval = sub.add_parser("evaluate", help="run the SNR-sweep comparison")
    _add_common(p_eval)
    p_eval.add_argument("--snr")
    p_eval.add_argument("--trials", type=int)
    p_eval.add_argument("--channels", type=int)
    p_eval.add_argument("--rir")
    p_eval.add_argument("--noise-wav", dest="noise_wav")
    p_eval.add_argument("--duration", type=float)
    p_eval.add_argument("--preset", choices=["vowel", "fricative", "tone"])
    p_eval.add_argument("--jobs", type=int)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = build_config(args)
        if args.mode == "demod":
            return cmd_demod(cfg)
        if args.mode == "features":
            return cmd_features(cfg)
        return cmd_evaluate(cfg)
    except (ValueError, OSError) as exc:
        print(f"mmdemod: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
