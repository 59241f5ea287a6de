"""Two-tone (Hi-Lo) siren detection for audio clips and live PCM streams."""

from .audio import AudioBuffer, FrameStream, decode_wav, encode_wav, frame_stream, read_wav, resample
from .detector import (
    DetectionResult,
    DetectorConfig,
    RejectReason,
    SirenStream,
    StreamEvent,
    classify_dominant,
    detect,
    detect_stream,
    dominant_tones,
)
from .estimators import HiLoSirenDetector, LogMelTransformer
from .evaluation import ConfusionMatrix, MetricsReport, confusion, evaluate_manifest, metrics, probit
from .mel import LogMelSpectrogram, MelParams, log_mel
from .synth import SirenSpec, gen_noise, gen_siren, gen_sweep, gen_tone

__version__ = "0.1.0"

__all__ = [
    "AudioBuffer", "FrameStream", "decode_wav", "encode_wav", "frame_stream", "read_wav", "resample",
    "DetectionResult", "DetectorConfig", "RejectReason", "SirenStream", "StreamEvent",
    "classify_dominant", "detect", "detect_stream", "dominant_tones",
    "HiLoSirenDetector", "LogMelTransformer",
    "ConfusionMatrix", "MetricsReport", "confusion", "evaluate_manifest", "metrics", "probit",
    "LogMelSpectrogram", "MelParams", "log_mel",
    "SirenSpec", "gen_noise", "gen_siren", "gen_sweep", "gen_tone",
]
