"""Stem manifests, seeded segment sampling and synthetic corpora.

Manifests are JSON-lines files. The optional first line is a header::

    {"schema": "chromamix.manifest", "version": 1, "dataset_name": "...", "kind": "labeled"}

and every following line is one song::

    {"song_id": "s00", "vocal": "s00_vocal.wav", "accompaniment": "s00_acc.wav",
     "mixture": "s00_mix.wav", "duration_s": 10.0, "provenance": {...}}

Relative paths resolve against the manifest's directory.
"""
from __future__ import annotations

import enum
import json
import math
import os
import threading
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import audio_io, chroma
from .audio_io import SAMPLE_RATE, AudioSegment, Stem
from .errors import (
    DanglingReferenceError,
    InsufficientCandidatesError,
    InsufficientDurationError,
    ValidationError,
)
from .rng import derive_rng

SCHEMA = "chromamix.manifest"
SCHEMA_VERSION = 1


class ManifestKind(str, enum.Enum):
    LABELED = "labeled"
    UNLABELED = "unlabeled"
    PSEUDO_LABELED = "pseudo_labeled"


@dataclass(frozen=True)
class StemPair:
    song_id: str
    vocal_path: Path | None
    accompaniment_path: Path | None
    duration_s: float
    mixture_path: Path | None = None
    provenance: dict | None = None
    labeled: bool | None = None

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * SAMPLE_RATE))

    @property
    def has_stems(self) -> bool:
        return self.vocal_path is not None and self.accompaniment_path is not None

    def path_for(self, stem: Stem) -> Path | None:
        return {
            Stem.VOCAL: self.vocal_path,
            Stem.ACCOMPANIMENT: self.accompaniment_path,
            Stem.MIXTURE: self.mixture_path,
        }[Stem(stem)]


@dataclass(frozen=True)
class Manifest:
    entries: tuple[StemPair, ...] = ()
    dataset_name: str = ""
    kind: ManifestKind = ManifestKind.LABELED
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        object.__setattr__(self, "kind", ManifestKind(self.kind))
        _validate(self)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def by_id(self) -> dict[str, StemPair]:
        return {e.song_id: e for e in self.entries}


def _validate(m: Manifest) -> None:
    seen = set()
    for e in m.entries:
        if e.song_id in seen:
            raise ValidationError(f"duplicate song_id {e.song_id!r} in {m.dataset_name!r}")
        seen.add(e.song_id)
        if m.kind is ManifestKind.UNLABELED and e.mixture_path is None:
            raise ValidationError(f"unlabeled entry {e.song_id!r} has no mixture path")
        if m.kind is not ManifestKind.UNLABELED and not e.has_stems:
            raise ValidationError(f"{m.kind.value} entry {e.song_id!r} lacks stem paths")
        if m.kind is ManifestKind.PSEUDO_LABELED and not e.provenance:
            raise ValidationError(f"pseudo-labeled entry {e.song_id!r} lacks provenance")


def _probe_duration(path: Path) -> float:
    if not path.is_file():
        raise DanglingReferenceError(path)
    rate, frames = audio_io.wav_info(path)
    return round(frames * SAMPLE_RATE / rate) / SAMPLE_RATE


def load_manifest(path) -> Manifest:
    """Parse and validate a JSON-lines manifest, probing every WAV it names."""
    path = Path(path)
    base = path.parent
    header = {}
    entries = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from exc
            if obj.get("schema") == SCHEMA:
                if obj.get("version", 1) > SCHEMA_VERSION:
                    raise ValidationError(f"{path}: unsupported schema version {obj['version']}")
                header = obj
                continue
            if "song_id" not in obj:
                raise ValidationError(f"{path}:{lineno}: entry without song_id")
            entries.append(_entry_from_json(obj, base))
    kind = header.get("kind")
    if kind is None:
        kind = (
            ManifestKind.LABELED
            if all(e.has_stems for e in entries)
            else ManifestKind.UNLABELED
        )
    return Manifest(entries, header.get("dataset_name", path.stem), kind)


def _entry_from_json(obj: dict, base: Path) -> StemPair:
    def resolve(key):
        value = obj.get(key)
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else base / p

    paths = {k: resolve(k) for k in ("vocal", "accompaniment", "mixture")}
    durations = [_probe_duration(p) for p in paths.values() if p is not None]
    if not durations:
        raise ValidationError(f"entry {obj['song_id']!r} references no audio")
    return StemPair(
        song_id=str(obj["song_id"]),
        vocal_path=paths["vocal"],
        accompaniment_path=paths["accompaniment"],
        duration_s=max(durations),
        mixture_path=paths["mixture"],
        provenance=obj.get("provenance"),
        labeled=obj.get("labeled"),
    )


def save_manifest(manifest: Manifest, path) -> None:
    """Write ``manifest`` as JSON lines; paths are stored relative when possible."""
    path = Path(path)
    base = path.parent.resolve()

    def rel(p):
        if p is None:
            return None
        p = Path(p).resolve()
        try:
            return Path(os.path.relpath(p, base)).as_posix()
        except ValueError:  # different drive on Windows
            return str(p)

    with open(path, "w") as fh:
        header = {
            "schema": SCHEMA,
            "version": SCHEMA_VERSION,
            "dataset_name": manifest.dataset_name,
            "kind": manifest.kind.value,
        }
        fh.write(json.dumps(header) + "\n")
        for e in manifest.entries:
            obj = {"song_id": e.song_id}
            for key, p in (
                ("vocal", e.vocal_path),
                ("accompaniment", e.accompaniment_path),
                ("mixture", e.mixture_path),
            ):
                if p is not None:
                    obj[key] = rel(p)
            obj["duration_s"] = e.duration_s
            if e.provenance is not None:
                obj["provenance"] = e.provenance
            if e.labeled is not None:
                obj["labeled"] = e.labeled
            fh.write(json.dumps(obj, sort_keys=False) + "\n")


def _pad_to(x: np.ndarray, n: int) -> np.ndarray:
    return x if len(x) >= n else np.pad(x, (0, n - len(x)))


def load_stems(pair: StemPair) -> tuple[AudioSegment, AudioSegment]:
    """Vocal and accompaniment at equal length (shorter one zero-padded)."""
    voc = audio_io.load_wav(pair.vocal_path, song_id=pair.song_id, stem=Stem.VOCAL)
    acc = audio_io.load_wav(
        pair.accompaniment_path, song_id=pair.song_id, stem=Stem.ACCOMPANIMENT
    )
    n = max(len(voc), len(acc))
    return (
        voc.with_samples(_pad_to(voc.samples, n)),
        acc.with_samples(_pad_to(acc.samples, n)),
    )


def load_mixture(pair: StemPair) -> AudioSegment:
    if pair.mixture_path is not None:
        return audio_io.load_wav(pair.mixture_path, song_id=pair.song_id, stem=Stem.MIXTURE)
    voc, acc = load_stems(pair)
    return voc.with_samples(voc.samples + acc.samples, stem=Stem.MIXTURE)


class SegmentPool:
    """Thread-safe cached reader over a manifest's stems.

    Whole songs are decoded once; chroma vectors are memoized per window.
    """

    def __init__(self, manifest: Manifest, chroma_cache_size: int = 1 << 16):
        self.manifest = manifest
        self._entries = manifest.by_id()
        self._songs: dict[str, dict[Stem, AudioSegment]] = {}
        self._chroma: OrderedDict = OrderedDict()
        self._chroma_cache_size = chroma_cache_size
        self._lock = threading.Lock()

    @property
    def song_ids(self) -> list[str]:
        return [e.song_id for e in self.manifest.entries]

    def entry(self, song_id: str) -> StemPair:
        return self._entries[song_id]

    def song(self, song_id: str) -> dict[Stem, AudioSegment]:
        with self._lock:
            cached = self._songs.get(song_id)
        if cached is not None:
            return cached
        voc, acc = load_stems(self._entries[song_id])
        stems = {Stem.VOCAL: voc, Stem.ACCOMPANIMENT: acc}
        with self._lock:
            return self._songs.setdefault(song_id, stems)

    def n_samples(self, song_id: str) -> int:
        return len(self.song(song_id)[Stem.VOCAL])

    def segment(self, song_id: str, stem: Stem, start: int, n: int) -> AudioSegment:
        return audio_io.slice_samples(self.song(song_id)[Stem(stem)], start, n)

    def chroma(self, seg: AudioSegment) -> chroma.ChromaVector:
        """Chroma vector of a pool segment, memoized by (song, stem, window)."""
        key = (seg.song_id, seg.stem, round(seg.offset_s * seg.sample_rate), len(seg))
        with self._lock:
            hit = self._chroma.get(key)
            if hit is not None:
                self._chroma.move_to_end(key)
                return hit
        value = chroma.segment_chroma(seg)
        with self._lock:
            self._chroma[key] = value
            if len(self._chroma) > self._chroma_cache_size:
                self._chroma.popitem(last=False)
        return value


def _segment_samples(duration_s: float) -> int:
    return int(round(duration_s * SAMPLE_RATE))


def eligible_songs(pool: SegmentPool, n: int, exclude=()) -> list[str]:
    excluded = set(exclude)
    return [
        sid for sid in pool.song_ids
        if sid not in excluded and pool.n_samples(sid) >= n
    ]


def random_window(pool: SegmentPool, song_id: str, n: int, rng: np.random.Generator) -> int:
    """Uniform start sample of an ``n``-sample window inside ``song_id``."""
    total = pool.n_samples(song_id)
    if total < n:
        raise InsufficientDurationError(f"{song_id}: {total} samples < {n}")
    return int(rng.integers(0, total - n + 1))


def random_segment(
    manifest: Manifest | SegmentPool,
    stem: Stem | str,
    duration_s: float,
    rng: np.random.Generator,
    exclude=(),
) -> AudioSegment:
    """A uniformly random ``duration_s`` window of a uniformly random eligible song."""
    pool = manifest if isinstance(manifest, SegmentPool) else SegmentPool(manifest)
    n = _segment_samples(duration_s)
    songs = eligible_songs(pool, n, exclude)
    if not songs:
        raise InsufficientDurationError(f"no song of at least {duration_s} s")
    sid = songs[int(rng.integers(len(songs)))]
    start = random_window(pool, sid, n, rng)
    return pool.segment(sid, stem, start, n)


def draw_candidates(
    pool: SegmentPool,
    k: int,
    duration_s: float,
    rng: np.random.Generator,
    exclude=(),
    strict: bool = True,
) -> list[tuple[str, int]]:
    """Draw ``k`` distinct songs and a random window start in each.

    With ``strict=False`` fewer than ``k`` songs are returned when the pool
    is smaller; at least one is always required.
    """
    n = _segment_samples(duration_s)
    songs = eligible_songs(pool, n, exclude)
    if not songs or (strict and len(songs) < k):
        raise InsufficientCandidatesError(
            f"need {k} candidate songs of >= {duration_s} s, pool has {len(songs)}"
        )
    k = min(k, len(songs))
    picks = rng.choice(len(songs), size=k, replace=False)
    return [(songs[int(i)], random_window(pool, songs[int(i)], n, rng)) for i in picks]


# --- synthetic corpora -----------------------------------------------------

MAJOR_SCALE = (0, 2, 4, 5, 7, 9, 11)
_NUMERALS = {"I": 0, "II": 1, "III": 2, "IV": 3, "V": 4, "VI": 5, "VII": 6}
DEFAULT_CHORDS = ("I", "IV", "V", "I")
DEFAULT_MELODY = (0, 2, 4, 5, 4, 2, 0, 4)
# fundamental + two octave partials, so every note exercises octave folding
PARTIALS = ((1, 1.0), (2, 0.5), (4, 0.25))
CHORD_TONE_GAINS = (1.0, 0.6, 0.6)  # root, third, fifth


def parse_key(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) % 12
    name = str(key).strip()
    if name in chroma.PITCH_CLASSES:
        return chroma.PITCH_CLASSES.index(name)
    flats = {"Db": 1, "Eb": 3, "Gb": 6, "Ab": 8, "Bb": 10}
    if name in flats:
        return flats[name]
    raise ValidationError(f"unknown key {key!r}")


def _degree_to_midi(tonic_midi: int, degree: int) -> int:
    octave, step = divmod(int(degree), 7)
    return tonic_midi + 12 * octave + MAJOR_SCALE[step]


def _chord_degrees(numeral: str) -> list[int]:
    root = _NUMERALS.get(numeral.upper())
    if root is None:
        raise ValidationError(f"unknown chord numeral {numeral!r}")
    return [root, root + 2, root + 4]


def _tone(midi: int, n: int, amp: float, phase: np.ndarray) -> np.ndarray:
    f0 = 440.0 * 2.0 ** ((midi - 69) / 12.0)
    t = np.arange(n) / SAMPLE_RATE
    out = np.zeros(n)
    for (h, weight), ph in zip(PARTIALS, phase):
        if f0 * h < SAMPLE_RATE / 2:
            out += weight * np.sin(2 * np.pi * f0 * h * t + ph)
    return amp * out


def _envelope(n: int) -> np.ndarray:
    a = min(n // 4, int(0.01 * SAMPLE_RATE))
    r = min(n // 4, int(0.03 * SAMPLE_RATE))
    env = np.ones(n)
    if a:
        env[:a] = np.linspace(0.0, 1.0, a, endpoint=False)
    if r:
        env[n - r :] = np.linspace(1.0, 0.0, r)
    return env


def _render(events, n_total: int, amp: float, rng: np.random.Generator) -> np.ndarray:
    """``events`` is a list of ``[(midi, gain), ...]`` (None = rest), spread evenly."""
    out = np.zeros(n_total)
    if not events:
        return out
    bounds = np.linspace(0, n_total, len(events) + 1).round().astype(int)
    for notes, s, e in zip(events, bounds[:-1], bounds[1:]):
        if notes is None or e <= s:
            continue
        seg = np.zeros(e - s)
        for m, gain in notes:
            seg += _tone(m, e - s, amp * gain, rng.uniform(0, 2 * np.pi, len(PARTIALS)))
        out[s:e] = seg * _envelope(e - s)
    return out


def render_song(song: dict, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Render the vocal and accompaniment stems of one song description."""
    key = parse_key(song.get("key", 0))
    n = int(round(float(song.get("duration_s", 10.0)) * SAMPLE_RATE))
    rng = derive_rng(seed, "synth", str(song["song_id"]))
    melody = song.get("melody", DEFAULT_MELODY)
    chords = song.get("chords", DEFAULT_CHORDS)
    vocal_tonic = 72 + key
    acc_tonic = 60 + key
    vocal_events = [
        None if d is None else [(_degree_to_midi(vocal_tonic, d), 1.0)] for d in melody
    ]
    chord_events = [
        None if c is None
        else [(_degree_to_midi(acc_tonic, d), g) for d, g in zip(_chord_degrees(c), CHORD_TONE_GAINS)]
        for c in chords
    ]
    vocal = _render(vocal_events, n, float(song.get("vocal_gain", 0.3)), rng)
    acc = _render(chord_events, n, float(song.get("accompaniment_gain", 0.12)), rng)
    return vocal.astype(np.float32), acc.astype(np.float32)


def synth_corpus(spec: dict, out_dir, seed: int = 42) -> Manifest:
    """Write sine-based stem WAVs for every song in ``spec`` plus a manifest.

    ``spec`` looks like ``{"dataset_name": ..., "songs": [{"song_id", "key",
    "duration_s", "melody", "chords"}, ...]}``. Melody entries are major-scale
    degrees (0 = tonic, 7 = octave up, ``None`` = rest); chords are roman
    numerals. The manifest is written to ``out_dir/manifest.jsonl``.
    """
    out = Path(out_dir)
    songs = spec.get("songs", [])
    name = spec.get("dataset_name", "synthetic")
    if not songs:
        return Manifest((), name, ManifestKind.LABELED)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for song in songs:
        sid = str(song["song_id"])
        vocal, acc = render_song(song, seed)
        paths = {
            Stem.VOCAL: out / f"{sid}_vocal.wav",
            Stem.ACCOMPANIMENT: out / f"{sid}_accompaniment.wav",
            Stem.MIXTURE: out / f"{sid}_mixture.wav",
        }
        for stem, data in ((Stem.VOCAL, vocal), (Stem.ACCOMPANIMENT, acc), (Stem.MIXTURE, vocal + acc)):
            audio_io.save_wav(AudioSegment(data, SAMPLE_RATE, sid, stem), paths[stem])
        entries.append(
            StemPair(
                sid,
                paths[Stem.VOCAL],
                paths[Stem.ACCOMPANIMENT],
                len(vocal) / SAMPLE_RATE,
                mixture_path=paths[Stem.MIXTURE],
                provenance={"generator": "synth_corpus", "seed": seed, "key": parse_key(song.get("key", 0))},
            )
        )
    manifest = Manifest(entries, name, ManifestKind.LABELED)
    save_manifest(manifest, out / "manifest.jsonl")
    return manifest


def unlabeled_view(manifest: Manifest, name: str | None = None) -> Manifest:
    """Mixture-only copy of a manifest (stems hidden), e.g. to feed a separator."""
    missing = [e.song_id for e in manifest if e.mixture_path is None]
    if missing:
        raise ValidationError(f"entries without mixture path: {missing}")
    entries = [
        replace(e, vocal_path=None, accompaniment_path=None, provenance=None, labeled=None)
        for e in manifest
    ]
    return Manifest(entries, name or f"{manifest.dataset_name}-unlabeled", ManifestKind.UNLABELED)


PROGRESSIONS = (
    ("I", "IV", "V", "I"),
    ("I", "VI", "IV", "V"),
    ("I", "V", "VI", "IV"),
)


def default_corpus_spec(n_songs: int = 20, duration_s: float = 10.0, seed: int = 0) -> dict:
    """Tonally diverse corpus description: keys cycle through all twelve classes."""
    rng = derive_rng(seed, "corpus-spec")
    songs = []
    for i in range(n_songs):
        melody = [int(d) for d in rng.integers(0, 8, size=8)]
        songs.append(
            {
                "song_id": f"song{i:02d}",
                "key": chroma.PITCH_CLASSES[(i * 7) % 12],
                "duration_s": duration_s,
                "melody": melody,
                "chords": list(PROGRESSIONS[i % len(PROGRESSIONS)]),
            }
        )
    return {"dataset_name": "synthetic", "songs": songs}


def corpus_spec_path_or_default(path, n_songs: int = 20) -> dict:
    if path is None:
        return default_corpus_spec(n_songs)
    with open(path) as fh:
        return json.load(fh)
