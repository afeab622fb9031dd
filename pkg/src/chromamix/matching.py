"""Chroma match scores and temperature-softmax partner sampling."""
from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from . import chroma
from .audio_io import AudioSegment, Stem
from .errors import EmptyInputError, InvalidInputError, ModeError, ParameterError
from .rng import categorical

DEFAULT_N_CANDIDATES = 8
DEFAULT_SEGMENT_S = 10.0
TEMPERATURES = (0.0, 0.33, 1.0, 3.0)


class MatchMode(str, enum.Enum):
    VOC2VOC = "voc2voc"
    ACC2ACC = "acc2acc"

    @property
    def stem(self) -> Stem:
        return Stem.VOCAL if self is MatchMode.VOC2VOC else Stem.ACCOMPANIMENT


@dataclass(frozen=True)
class MatchConfig:
    n_candidates: int = DEFAULT_N_CANDIDATES
    temperature: float = 1.0
    mode: MatchMode = MatchMode.ACC2ACC
    segment_s: float = DEFAULT_SEGMENT_S
    seed: int = 42

    def __post_init__(self):
        object.__setattr__(self, "mode", MatchMode(self.mode))
        object.__setattr__(self, "temperature", parse_temperature(self.temperature))
        if self.n_candidates < 1:
            raise ParameterError("n_candidates must be >= 1")
        if self.segment_s <= 0:
            raise ParameterError("segment_s must be positive")


@dataclass(frozen=True)
class ScoredCandidate:
    candidate_id: str
    score: float
    probability: float


def parse_temperature(value) -> float:
    """Accept a nonnegative number or ``"inf"``."""
    try:
        t = float(value)
    except (TypeError, ValueError) as exc:
        raise ParameterError(f"invalid temperature {value!r}") from exc
    if math.isnan(t) or t < 0:
        raise ParameterError(f"temperature must be >= 0, got {value!r}")
    return t


def match_score(c0, cj) -> float:
    """Cosine similarity of two chroma vectors; 0 if either is all-zero."""
    a = np.asarray(getattr(c0, "values", c0), dtype=np.float64)
    b = np.asarray(getattr(cj, "values", cj), dtype=np.float64)
    if a.shape != (12,) or b.shape != (12,):
        raise InvalidInputError("chroma vectors must have length 12")
    # pre-scale by the max to keep the squared norms far from overflow
    ma, mb = float(np.max(np.abs(a))), float(np.max(np.abs(b)))
    if ma == 0.0 or mb == 0.0:
        return 0.0
    a, b = a / ma, b / mb
    # sqrt of the product is exact for a == b, so self-similarity is exactly 1
    s = float(np.dot(a, b)) / math.sqrt(float(np.dot(a, a)) * float(np.dot(b, b)))
    return min(1.0, max(-1.0, s))


def softmax_probs(scores: Sequence[float], temperature: float) -> np.ndarray:
    """Softmax of ``scores / temperature``.

    ``temperature == 0`` gives a one-hot on the first maximum and
    ``temperature == inf`` the uniform distribution.
    """
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        raise EmptyInputError("softmax of empty score list")
    if np.isnan(s).any():
        raise InvalidInputError("NaN in scores")
    t = parse_temperature(temperature)
    n = s.size
    if t == 0.0:
        p = np.zeros(n)
        p[int(np.argmax(s))] = 1.0
        return p
    if math.isinf(t):
        return np.full(n, 1.0 / n)
    z = (s - s.max()) / t
    e = np.exp(z)
    return e / e.sum()


def sample_partner(
    anchor: AudioSegment,
    candidates: Sequence[AudioSegment],
    config: MatchConfig,
    rng: np.random.Generator,
    chroma_fn=chroma.segment_chroma,
) -> tuple[int, list[ScoredCandidate]]:
    """Score candidates against ``anchor`` and draw a partner index.

    ``anchor`` and every candidate must carry the stem named by
    ``config.mode``. ``chroma_fn`` lets callers supply a cached chroma
    computation.
    """
    if not candidates:
        raise EmptyInputError("no candidates to sample from")
    want = config.mode.stem
    for seg in (anchor, *candidates):
        if seg.stem is not want:
            raise ModeError(
                f"{config.mode.value} needs {want.value} stems, got {seg.stem.value} "
                f"for {seg.song_id!r}"
            )
    c0 = chroma_fn(anchor)
    scores = [match_score(c0, chroma_fn(c)) for c in candidates]
    probs = softmax_probs(scores, config.temperature)
    idx = categorical(probs, rng)
    scored = [
        ScoredCandidate(candidate_id(c), s, float(p))
        for c, s, p in zip(candidates, scores, probs)
    ]
    return idx, scored


def candidate_id(seg: AudioSegment) -> str:
    return f"{seg.song_id}@{seg.offset_s:.6f}"


def log_lines(anchor_id: str, scored: Sequence[ScoredCandidate], chosen: int) -> list[str]:
    """JSON-lines rows describing one scored candidate set."""
    return [
        json.dumps({"anchor_id": anchor_id, **asdict(c), "chosen": i == chosen})
        for i, c in enumerate(scored)
    ]
