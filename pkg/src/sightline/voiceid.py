"""Speaker enrollment and verification from MFCC means, plus age-range estimation."""
from __future__ import annotations

import math
import wave
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.fft import dct, rfft
from scipy.signal import resample_poly

from . import kernels
from .core import AgeRange, AudioSignal, Config, SightlineError


class SignalTooShortError(SightlineError):
    pass


class AudioFormatError(SightlineError):
    pass


@dataclass(frozen=True)
class MfccParams:
    sample_rate: int = 16_000
    pre_emphasis: float = 0.97
    frame_len_ms: int = 25
    frame_hop_ms: int = 10
    n_filters: int = 26
    n_coeffs: int = 13
    f_min_hz: float = 0.0
    f_max_hz: float = 8000.0
    log_floor: float = 1e-10

    @classmethod
    def from_config(cls, cfg: Config) -> "MfccParams":
        return cls(
            sample_rate=cfg.mfcc_sample_rate,
            pre_emphasis=cfg.mfcc_pre_emphasis,
            frame_len_ms=cfg.mfcc_frame_len_ms,
            frame_hop_ms=cfg.mfcc_frame_hop_ms,
            n_filters=cfg.mfcc_n_filters,
            n_coeffs=cfg.mfcc_n_coeffs,
            f_min_hz=cfg.mfcc_f_min_hz,
            f_max_hz=cfg.mfcc_f_max_hz,
        )

    @property
    def frame_len(self) -> int:
        return self.sample_rate * self.frame_len_ms // 1000

    @property
    def hop(self) -> int:
        return self.sample_rate * self.frame_hop_ms // 1000

    @property
    def n_fft(self) -> int:
        return 1 << (self.frame_len - 1).bit_length()


@dataclass(frozen=True, eq=False)
class MfccMatrix:
    frames: np.ndarray  # shape (n_frames, n_coeffs)
    n_coeffs: int
    frame_hop_ms: int
    frame_len_ms: int

    def __len__(self):
        return self.frames.shape[0]


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(params: MfccParams) -> np.ndarray:
    """Triangular filters on the mel scale, shape (n_filters, n_fft//2 + 1)."""
    edges = mel_to_hz(np.linspace(hz_to_mel(params.f_min_hz), hz_to_mel(params.f_max_hz),
                                  params.n_filters + 2))
    freqs = np.arange(params.n_fft // 2 + 1) * params.sample_rate / params.n_fft
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lo) / (mid - lo)
    falling = (hi - freqs) / (hi - mid)
    return np.maximum(0.0, np.minimum(rising, falling))


def _resample(samples: np.ndarray, src_rate: int, dst_rate: int) -> np.ndarray:
    if src_rate == dst_rate:
        return samples
    ratio = Fraction(dst_rate, src_rate)
    return resample_poly(samples, ratio.numerator, ratio.denominator)


def extract_mfcc(signal: AudioSignal, params: MfccParams = MfccParams()) -> MfccMatrix:
    """Cepstral features: pre-emphasis, Hamming frames, |FFT|, mel, log, DCT-II.

    Only complete frames are used, so the frame count is
    ``1 + (len - frame_len) // hop`` and a signal shorter than one window
    raises ``SignalTooShortError``.
    """
    x = _resample(signal.samples, signal.sample_rate, params.sample_rate)
    flen, hop = params.frame_len, params.hop
    if len(x) < flen:
        raise SignalTooShortError(
            f"signal has {len(x)} samples at {params.sample_rate} Hz, "
            f"need at least one {params.frame_len_ms} ms window ({flen} samples)"
        )
    emphasized = np.empty_like(x)
    emphasized[0] = x[0]
    emphasized[1:] = x[1:] - params.pre_emphasis * x[:-1]

    n_frames = 1 + (len(x) - flen) // hop
    idx = np.arange(flen)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = emphasized[idx] * np.hamming(flen)[None, :]
    magnitude = np.abs(rfft(frames, n=params.n_fft, axis=1))
    energies = magnitude @ mel_filterbank(params).T
    log_e = np.log(np.maximum(energies, params.log_floor))
    coeffs = dct(log_e, type=2, norm="ortho", axis=1)[:, : params.n_coeffs]
    return MfccMatrix(coeffs, params.n_coeffs, params.frame_hop_ms, params.frame_len_ms)


def make_profile(mfcc: MfccMatrix) -> np.ndarray:
    if mfcc.frames.shape[0] == 0:
        raise ValueError("cannot build a profile from an empty MFCC matrix")
    return mfcc.frames.mean(axis=0)


@dataclass(frozen=True)
class VoiceProfile:
    user_id: str
    vector: tuple
    enrolled_at: int = 0

    def __post_init__(self):
        if not self.user_id:
            raise ValueError("user_id must be non-empty")
        object.__setattr__(self, "vector", tuple(float(v) for v in self.vector))

    def to_dict(self) -> dict:
        return {"user_id": self.user_id, "vector": list(self.vector), "enrolled_at": self.enrolled_at}

    @classmethod
    def from_dict(cls, d: dict) -> "VoiceProfile":
        return cls(str(d["user_id"]), tuple(d["vector"]), int(d.get("enrolled_at", 0)))


def enroll(user_id: str, signal: AudioSignal, params: MfccParams = MfccParams(),
           enrolled_at: int = 0) -> VoiceProfile:
    return VoiceProfile(user_id, tuple(make_profile(extract_mfcc(signal, params))), enrolled_at)


@dataclass(frozen=True)
class AuthResult:
    accepted: bool
    user_id: Optional[str]  # nearest profile, also reported on rejection
    distance: float


def euclidean(a: Sequence[float], b: Sequence[float]) -> float:
    if len(a) != len(b):
        raise ValueError(f"vector length mismatch: {len(a)} vs {len(b)}")
    return math.dist(a, b)


def verify_vector(candidate: Sequence[float], profiles: Sequence[VoiceProfile], threshold: float) -> AuthResult:
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if not profiles:
        return AuthResult(False, None, math.inf)
    best = min(profiles, key=lambda p: (euclidean(candidate, p.vector), p.user_id))
    d = euclidean(candidate, best.vector)
    return AuthResult(d < threshold, best.user_id, d)


def verify(signal: AudioSignal, profiles: Sequence[VoiceProfile], threshold: float,
           params: MfccParams = MfccParams()) -> AuthResult:
    """Nearest-profile match; accepted only when strictly under ``threshold``."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if not profiles:
        return AuthResult(False, None, math.inf)
    return verify_vector(make_profile(extract_mfcc(signal, params)), profiles, threshold)


# ---------------------------------------------------------------------------
# Age range


class AgeSource(str, Enum):
    ACOUSTIC = "acoustic"
    DECLARED = "declared"
    PROMPTED = "prompted"


class PromptAnswer(str, Enum):
    YES = "yes"
    NO = "no"
    NO_ANSWER = "no_answer"


@dataclass(frozen=True)
class AgeEstimate:
    range: AgeRange
    source: AgeSource
    f0_hz: Optional[float] = None
    energy: Optional[float] = None

    def __post_init__(self):
        if self.source is AgeSource.ACOUSTIC and self.range is not AgeRange.UNKNOWN:
            if self.f0_hz is None or self.f0_hz <= 0:
                raise ValueError("acoustic estimates carry a positive f0")


MIN_AGE_SIGNAL_MS = 100
F0_MIN_HZ = 60.0
F0_MAX_HZ = 500.0
VOICING_THRESHOLD = 0.3
SILENCE_ENERGY = 1e-10

# (signal, config) -> AgeEstimate; wraps an external age model
AgeClassifier = Callable[[AudioSignal, Config], object]


def estimate_f0(signal: AudioSignal) -> tuple:
    """Autocorrelation pitch estimate.

    Returns ``(f0_hz or None, mean energy)``; ``None`` when the signal is
    silent or has no periodicity in the 60-500 Hz band.
    """
    if signal.duration_ms < MIN_AGE_SIGNAL_MS:
        raise SignalTooShortError(f"need at least {MIN_AGE_SIGNAL_MS} ms for pitch estimation")
    x = signal.samples
    energy = float(np.mean(x * x))
    if energy < SILENCE_ENERGY:
        return None, energy
    x = x - x.mean()
    sr = signal.sample_rate
    min_lag = max(2, int(sr // F0_MAX_HZ))
    max_lag = min(len(x) - 2, int(math.ceil(sr / F0_MIN_HZ)))
    r = kernels.autocorrelation(x, max_lag + 1)
    if r[0] <= 0:
        return None, energy
    r = r / r[0]
    band = r[min_lag: max_lag + 1]
    peak = float(band.max())
    if peak < VOICING_THRESHOLD:
        return None, energy
    # first local maximum close to the global one avoids sub-octave picks
    lag = None
    for k in range(min_lag, max_lag + 1):
        if r[k] >= 0.9 * peak and r[k] >= r[k - 1] and r[k] >= r[k + 1]:
            lag = k
            break
    if lag is None:
        lag = min_lag + int(band.argmax())
    denom = r[lag - 1] - 2 * r[lag] + r[lag + 1]
    offset = 0.5 * (r[lag - 1] - r[lag + 1]) / denom if denom != 0 else 0.0
    return sr / (lag + offset), energy


def estimate_age_range(signal: AudioSignal, config: Config = Config(),
                       classifier: Optional[AgeClassifier] = None) -> AgeEstimate:
    if classifier is not None:
        out = classifier(signal, config)
        if not isinstance(out, AgeEstimate):
            raise TypeError("age classifiers must return an AgeEstimate")
        return out
    f0, energy = estimate_f0(signal)
    if f0 is None:
        return AgeEstimate(AgeRange.UNKNOWN, AgeSource.ACOUSTIC, None, energy)
    rng = AgeRange.UNDER_18 if f0 >= config.age_pitch_threshold_hz else AgeRange.OVER_18
    return AgeEstimate(rng, AgeSource.ACOUSTIC, f0, energy)


AGE_PROMPT = "Is your age above 18?"


def confirm_age(answer: PromptAnswer) -> AgeEstimate:
    """Resolve an unknown age from the spoken yes/no prompt; silence counts as under 18."""
    answer = PromptAnswer(answer)
    if answer is PromptAnswer.YES:
        return AgeEstimate(AgeRange.OVER_18, AgeSource.PROMPTED)
    return AgeEstimate(AgeRange.UNDER_18, AgeSource.PROMPTED)


def declared_age(rng: AgeRange) -> AgeEstimate:
    return AgeEstimate(AgeRange(rng), AgeSource.DECLARED)


# ---------------------------------------------------------------------------
# WAV files


def read_wav(path) -> AudioSignal:
    """Read a 16-bit PCM mono WAV file into [-1, 1] samples."""
    try:
        with wave.open(str(path), "rb") as w:
            if w.getnchannels() != 1 or w.getsampwidth() != 2 or w.getcomptype() != "NONE":
                raise AudioFormatError(f"{path}: expected 16-bit PCM mono")
            rate = w.getframerate()
            raw = w.readframes(w.getnframes())
    except (wave.Error, EOFError) as exc:
        raise AudioFormatError(f"{path}: {exc}") from exc
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if samples.size == 0:
        raise AudioFormatError(f"{path}: no samples")
    return AudioSignal(samples, rate)


def write_wav(path, signal: AudioSignal) -> None:
    pcm = np.clip(np.round(signal.samples * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(signal.sample_rate)
        w.writeframes(pcm.tobytes())
