"""Command line entry point: detect, stream, eval, synth, dump.

Exit codes follow grep: 0 found / success, 1 nothing found, 2 error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from pathlib import Path

from . import synth
from .audio import AudioError, decode_s16le, encode_wav, read_wav, resample
from .detector import ConfigError, DetectorConfig, SirenStream, detect
from .evaluation import CSV_HEADER, EmptyClass, ManifestError, evaluate_manifest, read_manifest
from .mel import ClipTooShort, DegenerateBank, log_mel

EXIT_FOUND, EXIT_NONE, EXIT_ERROR = 0, 1, 2
STDIN_CHUNK = 8192


class CliError(Exception):
    pass


def _atomic_write(path: str, data: bytes) -> None:
    """Write via a temp file in the target directory so failures leave nothing behind."""
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent or ".", prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_override(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


def resolve_config(args) -> DetectorConfig:
    """Built-in defaults, then the config file, then ``--set`` flags."""
    cfg = DetectorConfig()
    if getattr(args, "config", None):
        cfg = DetectorConfig.from_file(args.config, cfg)
    overrides = dict(getattr(args, "overrides", None) or [])
    return cfg.replace(overrides) if overrides else cfg


def _config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="key=value detector config file")
    p.add_argument("--set", dest="overrides", metavar="KEY=VALUE", action="append", type=_parse_override,
                   help="override one config key (repeatable; wins over --config)")


def cmd_detect(args) -> int:
    cfg = resolve_config(args)
    found = errors = 0
    for path in args.files:
        try:
            result = detect(read_wav(path), cfg)
        except (OSError, AudioError, ClipTooShort) as e:
            print(f"{path}: {e}", file=sys.stderr)
            errors += 1
            continue
        found += result.detected
        print(f"{path}\t{'SIREN' if result.detected else 'NOSIREN'}\t{result.reject_reason}", flush=True)
    if errors:
        return EXIT_ERROR
    return EXIT_FOUND if found else EXIT_NONE


def _stdin_chunks(stream, chunk_bytes: int = STDIN_CHUNK):
    carry = b""
    while True:
        data = stream.read(chunk_bytes)
        if not data:
            break
        data = carry + data
        cut = len(data) - (len(data) % 2)
        carry = data[cut:]
        if cut:
            yield data[:cut]
    if carry:
        raise AudioError("stream ended in the middle of a 16-bit sample")


def cmd_stream(args) -> int:
    cfg = resolve_config(args)
    det = SirenStream(cfg, args.rate, args.window, args.stride)
    out = sys.stdout
    for raw in _stdin_chunks(sys.stdin.buffer):
        for event in det.push(decode_s16le(raw, args.rate).samples):
            out.write(event.to_line() + "\n")
            out.flush()
    return 0


def _load_stub_verdicts(path) -> dict[str, bool]:
    verdicts = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) < 2 or parts[1] not in ("SIREN", "NOSIREN"):
                raise CliError(f"{path}:{n}: expected '<path>\\t<SIREN|NOSIREN>'")
            verdicts[parts[0]] = parts[1] == "SIREN"
    return verdicts


def cmd_eval(args) -> int:
    cfg = resolve_config(args)
    manifest = read_manifest(args.manifest)
    classify = None
    if args.stub_verdicts:
        stub = _load_stub_verdicts(args.stub_verdicts)
        base = Path(args.manifest).parent

        def classify(path):
            rel = os.path.relpath(path, base)
            if rel in stub:
                return stub[rel]
            if path in stub:
                return stub[path]
            raise OSError(f"no stub verdict for {rel}")

    ev = evaluate_manifest(manifest, cfg, classify=classify, n_jobs=args.jobs)
    if args.verdicts:
        for v in ev.verdicts:
            print(v.to_line())
    print(ev.report.to_text(ev.confusion), end="")
    print(f"{'Skipped':<11}  {len(ev.skipped):>10}")
    if args.csv:
        print(ev.report.to_csv(ev.confusion))
    return 0


def cmd_synth(args) -> int:
    rate = args.rate
    if args.kind == "siren":
        spec = synth.SirenSpec(
            f_hi=args.hi, f_lo=args.lo, dwell=args.dwell, cycles=args.cycles, amplitude=args.amp,
            noise_snr_db=args.snr, dropout=tuple(args.dropout) or None, seed=args.seed,
        )
        buf = synth.gen_siren(spec, rate)
    elif args.kind == "tone":
        buf = synth.gen_tone(args.freq, args.dur, rate)
    elif args.kind == "noise":
        buf = synth.gen_noise(args.dur, rate, args.seed)
    else:
        buf = synth.gen_sweep(args.start, args.end, args.dur, rate)
    _atomic_write(args.output, encode_wav(buf, 16))
    return 0


def cmd_dump(args) -> int:
    cfg = resolve_config(args)
    if args.show_config or not args.file:
        sys.stdout.write(cfg.to_text())
    if not args.file:
        return 0
    buf = read_wav(args.file)
    result = detect(buf, cfg)
    for line in result.stage_trace:
        print(line)
    if args.spectrogram:
        if buf.sample_rate != cfg.mel.sample_rate:
            buf = resample(buf, cfg.mel.sample_rate)
        _atomic_write(args.spectrogram, log_mel(buf, cfg.mel).to_csv().encode())
    return 0


def _dropout(text: str) -> tuple[float, float]:
    try:
        pos, length = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected POS:LEN in seconds, got {text!r}") from None
    return pos, length


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hilo-siren", description="Hi-Lo emergency siren detector")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="classify WAV files")
    p.add_argument("files", nargs="+")
    _config_args(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("stream", help="detect onsets in s16le mono PCM read from stdin")
    p.add_argument("--rate", type=int, required=True, help="input sample rate in Hz")
    p.add_argument("--window", type=float, default=4.0, help="analysis window in seconds")
    p.add_argument("--stride", type=float, default=1.0, help="seconds between analyses")
    _config_args(p)
    p.set_defaults(func=cmd_stream)

    p = sub.add_parser("eval", help="score the detector on a labeled manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--csv", action="store_true", help="also print the report as one CSV line: " + CSV_HEADER)
    p.add_argument("--verdicts", action="store_true", help="print per-file verdict lines")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--stub-verdicts", metavar="PATH", help=argparse.SUPPRESS)
    _config_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="write a synthetic 16-bit WAV")
    kinds = p.add_subparsers(dest="kind", required=True)
    s = kinds.add_parser("siren")
    s.add_argument("--hi", type=float, default=1250.0)
    s.add_argument("--lo", type=float, default=970.0)
    s.add_argument("--dwell", type=float, default=0.5)
    s.add_argument("--cycles", type=int, default=4)
    s.add_argument("--amp", type=float, default=synth.AMPLITUDE)
    s.add_argument("--snr", type=float, default=None, help="white noise SNR in dB")
    s.add_argument("--dropout", type=_dropout, action="append", default=[], metavar="POS:LEN")
    s.add_argument("--seed", type=int, default=0)
    t = kinds.add_parser("tone")
    t.add_argument("--freq", type=float, required=True)
    t.add_argument("--dur", type=float, required=True)
    n = kinds.add_parser("noise")
    n.add_argument("--dur", type=float, required=True)
    n.add_argument("--seed", type=int, default=0)
    w = kinds.add_parser("sweep")
    w.add_argument("--start", type=float, default=700.0)
    w.add_argument("--end", type=float, default=1500.0)
    w.add_argument("--dur", type=float, required=True)
    for k in (s, t, n, w):
        k.add_argument("--rate", type=int, default=22050)
        k.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("dump", help="print per-stage debug output for one file")
    p.add_argument("file", nargs="?")
    p.add_argument("--spectrogram", metavar="PATH", help="also write the Log-Mel matrix as CSV")
    p.add_argument("--show-config", action="store_true", help="print the resolved config first")
    _config_args(p)
    p.set_defaults(func=cmd_dump)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, ConfigError, AudioError, ManifestError, EmptyClass, DegenerateBank,
            ClipTooShort, OSError, ValueError) as e:
        print(f"hilo-siren: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
