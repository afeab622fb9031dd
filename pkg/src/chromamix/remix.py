"""Mixture synthesis: pitch-aware, random and mix-audio remixing.

Every remix ``i`` of a batch draws from its own stream
``derive_rng(seed, "remix", i)``, in this order:

1. anchor window start in the anchor song,
2. the candidate songs (distinct, anchor's song excluded) and their window starts,
3. one uniform for the partner index.

Pitch-aware remixing at ``T = inf`` and random remixing therefore make
identical choices for the same seed.
"""
from __future__ import annotations

import enum
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import audio_io
from .audio_io import AudioSegment, Stem
from .dataset import SegmentPool, StemPair, draw_candidates, random_window
from .errors import ChromamixError, InsufficientDurationError
from .matching import (
    MatchConfig,
    MatchMode,
    ScoredCandidate,
    candidate_id,
    log_lines,
    match_score,
    sample_partner,
)
from .rng import categorical, derive_rng

log = logging.getLogger(__name__)


class Strategy(str, enum.Enum):
    PITCH_AWARE = "pitch_aware"
    RANDOM = "random"
    MIX_AUDIO = "mix_audio"
    ORIGINAL = "original"  # remix skipped under --remix-prob < 1


@dataclass
class RemixRecord:
    mixture: AudioSegment
    vocal: AudioSegment
    accompaniment: AudioSegment
    strategy: Strategy
    match_score: float | None = None
    temperature: float | None = None
    realized_score: float | None = None
    scored: list[ScoredCandidate] = field(default_factory=list)
    chosen: int | None = None

    @property
    def vocal_source(self) -> str:
        return candidate_id(self.vocal)

    @property
    def accompaniment_source(self) -> str:
        return candidate_id(self.accompaniment)

    def sidecar(self, seed: int | None = None, index: int | None = None) -> dict:
        return {
            "index": index,
            "strategy": self.strategy.value,
            "anchor": {"song_id": self.vocal.song_id, "offset_s": self.vocal.offset_s},
            "partner": {
                "song_id": self.accompaniment.song_id,
                "offset_s": self.accompaniment.offset_s,
            },
            "window_s": self.mixture.duration_s,
            "score": self.match_score,
            "realized_score": self.realized_score,
            "temperature": _json_temperature(self.temperature),
            "seed": seed,
        }


def _json_temperature(t):
    if t is None:
        return None
    return "inf" if math.isinf(t) else t


def _mix(vocal: AudioSegment, acc: AudioSegment) -> AudioSegment:
    # float32 + float32 keeps mixture == vocal + accompaniment exact on disk
    samples = vocal.samples + acc.samples
    return AudioSegment(samples, vocal.sample_rate, vocal.song_id, Stem.MIXTURE, vocal.offset_s)


def _song_id(song) -> str:
    return song.song_id if isinstance(song, StemPair) else str(song)


def _n(segment_s: float) -> int:
    return int(round(segment_s * audio_io.SAMPLE_RATE))


def _anchor_start(pool, sid, n, rng, anchor_start):
    if anchor_start is not None:
        return int(anchor_start)
    return random_window(pool, sid, n, rng)


def remix_pitch_aware(
    anchor_song,
    pool: SegmentPool,
    config: MatchConfig,
    rng: np.random.Generator,
    anchor_start: int | None = None,
) -> RemixRecord:
    """Anchor vocal plus the accompaniment of a chroma-matched partner."""
    sid = _song_id(anchor_song)
    n = _n(config.segment_s)
    start = _anchor_start(pool, sid, n, rng, anchor_start)
    cands = draw_candidates(pool, config.n_candidates, config.segment_s, rng, exclude=[sid])
    stem = config.mode.stem
    anchor_seg = pool.segment(sid, stem, start, n)
    cand_segs = [pool.segment(c, stem, s, n) for c, s in cands]
    idx, scored = sample_partner(anchor_seg, cand_segs, config, rng, chroma_fn=pool.chroma)
    vocal = pool.segment(sid, Stem.VOCAL, start, n)
    acc = pool.segment(cands[idx][0], Stem.ACCOMPANIMENT, cands[idx][1], n)
    return RemixRecord(
        _mix(vocal, acc),
        vocal,
        acc,
        Strategy.PITCH_AWARE,
        match_score=scored[idx].score,
        temperature=config.temperature,
        realized_score=scored[idx].score,
        scored=scored,
        chosen=idx,
    )


def remix_random(
    anchor_song,
    pool: SegmentPool,
    rng: np.random.Generator,
    n_candidates: int = 8,
    segment_s: float = 10.0,
    anchor_start: int | None = None,
    score_mode: MatchMode | None = MatchMode.ACC2ACC,
) -> RemixRecord:
    """Anchor vocal plus a uniformly chosen partner's accompaniment.

    ``score_mode`` only controls the logged ``realized_score``; it never
    influences the choice. Pass ``None`` to skip chroma computation.
    """
    sid = _song_id(anchor_song)
    n = _n(segment_s)
    start = _anchor_start(pool, sid, n, rng, anchor_start)
    cands = draw_candidates(pool, n_candidates, segment_s, rng, exclude=[sid], strict=False)
    idx = categorical(np.full(len(cands), 1.0 / len(cands)), rng)
    vocal = pool.segment(sid, Stem.VOCAL, start, n)
    acc = pool.segment(cands[idx][0], Stem.ACCOMPANIMENT, cands[idx][1], n)
    realized = None
    if score_mode is not None:
        stem = MatchMode(score_mode).stem
        realized = match_score(
            pool.chroma(pool.segment(sid, stem, start, n)),
            pool.chroma(pool.segment(cands[idx][0], stem, cands[idx][1], n)),
        )
    return RemixRecord(
        _mix(vocal, acc), vocal, acc, Strategy.RANDOM, realized_score=realized, chosen=idx
    )


def mix_audio_starts(total: int, n: int, rng: np.random.Generator) -> tuple[int, int]:
    """Uniformly random pair of non-overlapping ``n``-sample windows.

    Returns ``(vocal_start, accompaniment_start)``.
    """
    slack = total - 2 * n
    if slack < 0:
        raise InsufficientDurationError(f"need {2 * n} samples, song has {total}")
    a, b = sorted(int(v) for v in rng.integers(0, slack + 1, size=2))
    first, second = a, b + n
    if rng.random() < 0.5:
        return first, second
    return second, first


def remix_mix_audio(
    song,
    pool: SegmentPool,
    rng: np.random.Generator,
    segment_s: float = 10.0,
    starts: tuple[int, int] | None = None,
    score_mode: MatchMode | None = MatchMode.ACC2ACC,
) -> RemixRecord:
    """Vocal from one window of a song, accompaniment from another window of it."""
    sid = _song_id(song)
    n = _n(segment_s)
    total = pool.n_samples(sid)
    if starts is None:
        vs, as_ = mix_audio_starts(total, n, rng)
    else:
        vs, as_ = (int(s) for s in starts)
        if total < 2 * n or abs(vs - as_) < n:
            raise InsufficientDurationError(f"{sid}: windows overlap or exceed song")
    vocal = pool.segment(sid, Stem.VOCAL, vs, n)
    acc = pool.segment(sid, Stem.ACCOMPANIMENT, as_, n)
    realized = None
    if score_mode is not None:
        stem = MatchMode(score_mode).stem
        realized = match_score(
            pool.chroma(pool.segment(sid, stem, vs, n)),
            pool.chroma(pool.segment(sid, stem, as_, n)),
        )
    return RemixRecord(_mix(vocal, acc), vocal, acc, Strategy.MIX_AUDIO, realized_score=realized)


def _original(song, pool, rng, segment_s) -> RemixRecord:
    sid = _song_id(song)
    n = _n(segment_s)
    start = random_window(pool, sid, n, rng)
    vocal = pool.segment(sid, Stem.VOCAL, start, n)
    acc = pool.segment(sid, Stem.ACCOMPANIMENT, start, n)
    return RemixRecord(_mix(vocal, acc), vocal, acc, Strategy.ORIGINAL)


def remix_one(
    index: int,
    pool: SegmentPool,
    strategy: Strategy | str,
    config: MatchConfig,
    remix_prob: float = 1.0,
) -> RemixRecord:
    """Remix number ``index`` of a batch; anchors cycle through the pool's songs."""
    strategy = Strategy(strategy)
    songs = pool.song_ids
    sid = songs[index % len(songs)]
    rng = derive_rng(config.seed, "remix", index)
    if remix_prob < 1.0 and rng.random() >= remix_prob:
        return _original(sid, pool, rng, config.segment_s)
    if strategy is Strategy.PITCH_AWARE:
        return remix_pitch_aware(sid, pool, config, rng)
    if strategy is Strategy.RANDOM:
        return remix_random(sid, pool, rng, config.n_candidates, config.segment_s,
                            score_mode=config.mode)
    if strategy is Strategy.MIX_AUDIO:
        return remix_mix_audio(sid, pool, rng, config.segment_s, score_mode=config.mode)
    raise ValueError(f"strategy {strategy.value!r} cannot be requested directly")


@dataclass
class BatchResult:
    records: list[RemixRecord | None]
    failures: dict[int, str]
    summary: dict


def summarize(records, strategy: Strategy, config: MatchConfig, failures: dict) -> dict:
    done = [r for r in records if r is not None]
    match = np.array([r.match_score for r in done if r.match_score is not None])
    realized = np.array([r.realized_score for r in done if r.realized_score is not None])

    def stats(a):
        if a.size == 0:
            return None
        hist, edges = np.histogram(a, bins=20, range=(0.0, 1.0))
        return {
            "mean": float(a.mean()),
            "variance": float(a.var()),
            "histogram": {"counts": hist.tolist(), "edges": [float(e) for e in edges]},
        }

    return {
        "strategy": strategy.value,
        "temperature": _json_temperature(config.temperature)
        if strategy is Strategy.PITCH_AWARE else None,
        "mode": config.mode.value,
        "n_candidates": config.n_candidates,
        "segment_s": config.segment_s,
        "seed": config.seed,
        "requested": len(records),
        "written": len(done),
        "failed": len(failures),
        "failures": {str(k): v for k, v in sorted(failures.items())},
        "match_score": stats(match),
        "realized_score": stats(realized),
    }


def run_batch(
    pool: SegmentPool,
    strategy: Strategy | str,
    config: MatchConfig,
    count: int,
    jobs: int = 1,
    remix_prob: float = 1.0,
) -> BatchResult:
    """Produce ``count`` remixes; per-remix failures are collected, not raised."""
    strategy = Strategy(strategy)

    def work(i):
        try:
            return remix_one(i, pool, strategy, config, remix_prob), None
        except ChromamixError as exc:
            log.warning("remix %d failed: %s", i, exc)
            return None, str(exc)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(work, range(count)))
    else:
        results = [work(i) for i in range(count)]
    records = [r for r, _ in results]
    failures = {i: err for i, (_, err) in enumerate(results) if err is not None}
    return BatchResult(records, failures, summarize(records, strategy, config, failures))


def write_batch(result: BatchResult, out_dir, seed: int) -> Path:
    """Write WAV triplets, sidecars, the candidate log and ``summary.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cand_lines = []
    for i, rec in enumerate(result.records):
        if rec is None:
            continue
        stem_name = f"remix_{i:05d}"
        for suffix, seg in (("mixture", rec.mixture), ("vocal", rec.vocal),
                            ("accompaniment", rec.accompaniment)):
            audio_io.save_wav(seg, out / f"{stem_name}_{suffix}.wav")
        with open(out / f"{stem_name}.json", "w") as fh:
            json.dump(rec.sidecar(seed, i), fh, indent=2, sort_keys=True)
        if rec.scored:
            cand_lines.extend(log_lines(f"{i}:{rec.vocal_source}", rec.scored, rec.chosen))
    if cand_lines:
        (out / "candidates.jsonl").write_text("\n".join(cand_lines) + "\n")
    with open(out / "summary.json", "w") as fh:
        json.dump(result.summary, fh, indent=2, sort_keys=True)
    return out
