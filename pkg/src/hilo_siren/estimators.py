"""scikit-learn wrappers so the detector composes with pipelines and model selection.

Inputs ``X`` are sequences of clips: :class:`AudioBuffer` objects, 1-D
sample arrays (interpreted at ``sample_rate``), or a 2-D array whose rows
are equal-length clips.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .audio import DEFAULT_SAMPLE_RATE, AudioBuffer
from .detector import DetectionResult, DetectorConfig, detect
from .mel import MelParams, band_centers, log_mel


def check_audio(x, sample_rate: int = DEFAULT_SAMPLE_RATE) -> AudioBuffer:
    if isinstance(x, AudioBuffer):
        return x
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"a clip must be 1-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("empty clip")
    return AudioBuffer(arr, sample_rate)


def check_audio_batch(X, sample_rate: int = DEFAULT_SAMPLE_RATE) -> list[AudioBuffer]:
    if isinstance(X, AudioBuffer):
        raise TypeError("expected a sequence of clips, got a single AudioBuffer; wrap it in a list")
    if isinstance(X, np.ndarray) and X.dtype != object:
        if X.ndim != 2:
            raise ValueError(f"array input must be 2-D (n_clips, n_samples), got shape {X.shape}")
        return [check_audio(row, sample_rate) for row in X]
    clips = [check_audio(x, sample_rate) for x in X]
    if not clips:
        raise ValueError("no clips given")
    return clips


class LogMelTransformer(TransformerMixin, BaseEstimator):
    """Clips to max-referenced Log-Mel matrices ``[n_mels, n_frames]``.

    Returns a 3-D array when every clip yields the same frame count,
    otherwise a list of 2-D arrays.
    """

    def __init__(self, n_fft=1024, hop=320, n_mels=64, f_min=20.0, f_max=2560.0,
                 sample_rate=DEFAULT_SAMPLE_RATE):
        self.n_fft = n_fft
        self.hop = hop
        self.n_mels = n_mels
        self.f_min = f_min
        self.f_max = f_max
        self.sample_rate = sample_rate

    def fit(self, X=None, y=None):
        self.params_ = MelParams(self.n_fft, self.hop, self.n_mels, self.f_min, self.f_max, self.sample_rate)
        self.band_centers_ = band_centers(self.params_)
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        specs = [log_mel(c, self.params_).values for c in check_audio_batch(X, self.sample_rate)]
        if len({s.shape for s in specs}) == 1:
            return np.stack(specs)
        return specs


class HiLoSirenDetector(ClassifierMixin, BaseEstimator):
    """Rule-based Hi-Lo siren classifier; ``predict`` returns booleans.

    ``fit`` learns nothing. It validates the parameters and freezes them
    into ``config_``, so the estimator can sit inside ``cross_val_score``
    or a ``Pipeline`` unchanged.
    """

    def __init__(self, f_hi_limit=1500.0, f_lo_limit=700.0, db_min=20.0, min_distinct_tones=2,
                 min_gap=122.0, tone_tol=31.0, max_gap_frames=2, transition_gap_frames=1,
                 min_phase_frames=3, min_cycles=2, min_duration=2.0, max_loop_iters=4,
                 n_fft=1024, hop=320, n_mels=64, f_min=20.0, f_max=2560.0,
                 sample_rate=DEFAULT_SAMPLE_RATE):
        self.f_hi_limit = f_hi_limit
        self.f_lo_limit = f_lo_limit
        self.db_min = db_min
        self.min_distinct_tones = min_distinct_tones
        self.min_gap = min_gap
        self.tone_tol = tone_tol
        self.max_gap_frames = max_gap_frames
        self.transition_gap_frames = transition_gap_frames
        self.min_phase_frames = min_phase_frames
        self.min_cycles = min_cycles
        self.min_duration = min_duration
        self.max_loop_iters = max_loop_iters
        self.n_fft = n_fft
        self.hop = hop
        self.n_mels = n_mels
        self.f_min = f_min
        self.f_max = f_max
        self.sample_rate = sample_rate

    @classmethod
    def from_config(cls, cfg: DetectorConfig) -> "HiLoSirenDetector":
        params = {k.removeprefix("mel."): v for k, v in cfg.to_items()}
        return cls(**params)

    def _make_config(self) -> DetectorConfig:
        mel = MelParams(self.n_fft, self.hop, self.n_mels, self.f_min, self.f_max, self.sample_rate)
        return DetectorConfig(
            f_hi_limit=self.f_hi_limit, f_lo_limit=self.f_lo_limit, db_min=self.db_min,
            min_distinct_tones=self.min_distinct_tones, min_gap=self.min_gap, tone_tol=self.tone_tol,
            max_gap_frames=self.max_gap_frames, transition_gap_frames=self.transition_gap_frames,
            min_phase_frames=self.min_phase_frames, min_cycles=self.min_cycles,
            min_duration=self.min_duration, max_loop_iters=self.max_loop_iters, mel=mel,
        )

    def fit(self, X=None, y=None):
        self.config_ = self._make_config()
        self.classes_ = np.array([False, True])
        return self

    def detect(self, X) -> list[DetectionResult]:
        check_is_fitted(self, "config_")
        return [detect(c, self.config_) for c in check_audio_batch(X, self.sample_rate)]

    def predict(self, X) -> np.ndarray:
        return np.array([r.detected for r in self.detect(X)], dtype=bool)

    def decision_function(self, X) -> np.ndarray:
        """Matched cycle count for detections, 0 otherwise."""
        return np.array([r.cycles if r.detected else 0 for r in self.detect(X)], dtype=float)
