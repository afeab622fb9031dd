"""Teacher/student data flow with a pluggable separator.

    D_u --pseudo_label--> D_0 --vad_filter--> D_f0 --build_student_dataset(D_l, .)--> D_l + D_f0

Neural separators are out of scope; anything with a ``separate(mixture)``
method fits. :class:`IrmOracleSeparator` stands in for a well-trained
teacher when ground-truth stems are available.
"""
from __future__ import annotations

import logging
import shlex
import subprocess
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Protocol, runtime_checkable

import numpy as np

from . import audio_io, dataset, spectral
from .audio_io import AudioSegment, Stem
from .dataset import Manifest, ManifestKind, StemPair
from .errors import ChromamixError, SeparatorError, ShapeError, ValidationError

log = logging.getLogger(__name__)

IRM_EPS = 1e-8


@runtime_checkable
class Separator(Protocol):
    name: str
    thread_safe: bool

    def separate(self, mixture: AudioSegment) -> tuple[AudioSegment, AudioSegment]:
        ...


def _as_stem(seg: AudioSegment, samples, stem: Stem) -> AudioSegment:
    return AudioSegment(np.asarray(samples), seg.sample_rate, seg.song_id, stem, seg.offset_s)


class IdentitySeparator:
    """Returns the mixture as vocal and silence as accompaniment."""

    name = "identity"
    thread_safe = True

    def separate(self, mixture):
        return (
            _as_stem(mixture, mixture.samples, Stem.VOCAL),
            _as_stem(mixture, np.zeros_like(mixture.samples), Stem.ACCOMPANIMENT),
        )


class IrmOracleSeparator:
    """Ideal-ratio-mask separation using known stems, keyed by song id."""

    name = "irm_oracle"
    thread_safe = True

    def __init__(self, stems: Mapping[str, tuple], eps: float = IRM_EPS):
        self._stems = {
            sid: tuple(np.asarray(getattr(s, "samples", s), dtype=np.float64) for s in pair)
            for sid, pair in stems.items()
        }
        self.eps = eps

    def separate(self, mixture):
        try:
            voc, acc = self._stems[mixture.song_id]
        except KeyError:
            raise SeparatorError(f"no oracle stems for {mixture.song_id!r}") from None
        start = int(round(mixture.offset_s * mixture.sample_rate))
        n = len(mixture)
        if len(voc) < start + n or len(acc) < start + n:
            raise ShapeError(f"{mixture.song_id}: oracle stems shorter than mixture")
        V = spectral.magnitude(spectral.stft(voc[start : start + n]))
        A = spectral.magnitude(spectral.stft(acc[start : start + n]))
        M = spectral.stft(mixture)
        denom = V + A + self.eps
        est_v = spectral.istft(replace(M, bins=M.bins * (V / denom)), n)
        est_a = spectral.istft(replace(M, bins=M.bins * (A / denom)), n)
        return (
            _as_stem(mixture, est_v.samples, Stem.VOCAL),
            _as_stem(mixture, est_a.samples, Stem.ACCOMPANIMENT),
        )


def irm_oracle_separator(true_stems) -> IrmOracleSeparator:
    """Build an IRM oracle from a :class:`StemPair`, an iterable of them, or a manifest."""
    if isinstance(true_stems, StemPair):
        true_stems = [true_stems]
    if isinstance(true_stems, Mapping):
        return IrmOracleSeparator(true_stems)
    return IrmOracleSeparator({p.song_id: dataset.load_stems(p) for p in true_stems})


class ExternalSeparator:
    """Runs ``<cmd> MIXTURE.wav VOCAL_OUT.wav ACCOMPANIMENT_OUT.wav`` per song."""

    thread_safe = True

    def __init__(self, command: str, timeout: float | None = None):
        self.argv = shlex.split(command)
        if not self.argv:
            raise ValueError("empty external separator command")
        self.name = f"extern:{command}"
        self.timeout = timeout

    def separate(self, mixture):
        with tempfile.TemporaryDirectory() as tmp:
            tmp = Path(tmp)
            paths = [tmp / "mixture.wav", tmp / "vocal.wav", tmp / "accompaniment.wav"]
            audio_io.save_wav(mixture, paths[0])
            proc = subprocess.run(
                [*self.argv, *map(str, paths)], capture_output=True, text=True, timeout=self.timeout
            )
            if proc.returncode != 0:
                raise SeparatorError(
                    f"{self.argv[0]} exited {proc.returncode}: {proc.stderr.strip()[-500:]}"
                )
            try:
                voc = audio_io.load_wav(paths[1], mixture.sample_rate)
                acc = audio_io.load_wav(paths[2], mixture.sample_rate)
            except (OSError, ChromamixError) as exc:
                raise SeparatorError(f"external separator output unreadable: {exc}") from exc
        return (
            _as_stem(mixture, voc.samples, Stem.VOCAL),
            _as_stem(mixture, acc.samples, Stem.ACCOMPANIMENT),
        )


def pseudo_label(
    unlabeled: Manifest,
    separator: Separator,
    out_dir,
    jobs: int = 1,
    manifest_name: str | None = "pseudo_labeled.jsonl",
) -> Manifest:
    """Separate every mixture in ``unlabeled`` and catalog the estimates.

    Songs the separator fails on are skipped and listed in
    ``result.meta["failures"]``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    serial = threading.Lock()

    def work(entry: StemPair):
        try:
            mix = dataset.load_mixture(entry)
            if separator.thread_safe:
                voc, acc = separator.separate(mix)
            else:
                with serial:
                    voc, acc = separator.separate(mix)
            if len(voc) != len(mix) or len(acc) != len(mix):
                raise SeparatorError(f"{separator.name} changed the signal length")
        except (ChromamixError, OSError, subprocess.SubprocessError) as exc:
            log.warning("pseudo-labelling %s failed: %s", entry.song_id, exc)
            return None, str(exc)
        vpath = out / f"{entry.song_id}_vocal_est.wav"
        apath = out / f"{entry.song_id}_accompaniment_est.wav"
        audio_io.save_wav(voc, vpath)
        audio_io.save_wav(acc, apath)
        return (
            StemPair(
                entry.song_id,
                vpath,
                apath,
                entry.duration_s,
                mixture_path=entry.mixture_path,
                provenance={"separator": separator.name, "source_dataset": unlabeled.dataset_name},
                labeled=False,
            ),
            None,
        )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(work, unlabeled.entries))
    else:
        results = [work(e) for e in unlabeled.entries]
    entries = [r for r, _ in results if r is not None]
    failures = {e.song_id: err for e, (_, err) in zip(unlabeled.entries, results) if err}
    result = Manifest(
        entries,
        f"{unlabeled.dataset_name}-pseudo",
        ManifestKind.PSEUDO_LABELED,
        meta={"failures": failures, "separator": separator.name},
    )
    if manifest_name:
        dataset.save_manifest(result, out / manifest_name)
    return result


@dataclass(frozen=True)
class VadConfig:
    frame_s: float = 0.03
    rms_threshold: float = 0.01
    min_voiced_fraction: float = 0.1

    def __post_init__(self):
        if self.frame_s <= 0 or self.rms_threshold <= 0:
            raise ValueError("frame_s and rms_threshold must be positive")
        if not 0 < self.min_voiced_fraction <= 1:
            raise ValueError("min_voiced_fraction must be in (0, 1]")


def frame_rms(samples, frame_len: int) -> np.ndarray:
    """RMS of consecutive non-overlapping frames; a short tail counts as a frame."""
    x = np.asarray(samples, dtype=np.float64)
    n_frames = -(-len(x) // frame_len)
    padded = np.zeros(n_frames * frame_len)
    padded[: len(x)] = x
    frames = padded.reshape(n_frames, frame_len)
    counts = np.full(n_frames, frame_len, dtype=np.float64)
    if len(x) % frame_len:
        counts[-1] = len(x) % frame_len
    return np.sqrt((frames**2).sum(axis=1) / counts)


def voiced_fraction(segment: AudioSegment, config: VadConfig = VadConfig()) -> float:
    frame_len = max(1, int(round(config.frame_s * segment.sample_rate)))
    rms = frame_rms(segment.samples, frame_len)
    return float(np.mean(rms >= config.rms_threshold)) if rms.size else 0.0


def vad_filter(pseudo: Manifest, config: VadConfig = VadConfig()) -> Manifest:
    """Keep entries whose estimated vocal is active in enough frames."""
    kept, fractions = [], {}
    for entry in pseudo.entries:
        voc = audio_io.load_wav(entry.vocal_path, song_id=entry.song_id, stem=Stem.VOCAL)
        frac = voiced_fraction(voc, config)
        fractions[entry.song_id] = frac
        if frac >= config.min_voiced_fraction:
            kept.append(entry)
    return Manifest(
        kept,
        f"{pseudo.dataset_name}-vad",
        pseudo.kind,
        meta={
            "kept": len(kept),
            "dropped": len(pseudo) - len(kept),
            "voiced_fraction": fractions,
            "vad": {
                "frame_s": config.frame_s,
                "rms_threshold": config.rms_threshold,
                "min_voiced_fraction": config.min_voiced_fraction,
            },
        },
    )


LABELED_PREFIX = "labeled/"
PSEUDO_PREFIX = "pseudo/"


def build_student_dataset(labeled: Manifest, filtered: Manifest, name: str = "student") -> Manifest:
    """Union of labeled and filtered pseudo-labeled songs with namespaced ids."""

    def tag(entries: Iterable[StemPair], prefix: str, is_labeled: bool):
        for e in entries:
            prov = dict(e.provenance or {})
            prov.setdefault("origin_id", e.song_id)
            yield replace(e, song_id=prefix + e.song_id, labeled=is_labeled, provenance=prov)

    entries = [*tag(labeled, LABELED_PREFIX, True), *tag(filtered, PSEUDO_PREFIX, False)]
    try:
        return Manifest(
            entries,
            name,
            ManifestKind.LABELED,
            meta={"n_labeled": len(labeled), "n_pseudo": len(filtered)},
        )
    except ValidationError as exc:
        raise ValidationError(f"song id collision after namespacing: {exc}") from exc


def run_pipeline(
    unlabeled: Manifest,
    labeled: Manifest,
    separator: Separator,
    out_dir,
    vad: VadConfig = VadConfig(),
    jobs: int = 1,
) -> dict[str, Manifest]:
    """Run all steps, writing each manifest under ``out_dir``."""
    out = Path(out_dir)
    d0 = pseudo_label(unlabeled, separator, out / "pseudo", jobs=jobs)
    df0 = vad_filter(d0, vad)
    student = build_student_dataset(labeled, df0)
    dataset.save_manifest(d0, out / "d0.jsonl")
    dataset.save_manifest(df0, out / "df0.jsonl")
    dataset.save_manifest(student, out / "student.jsonl")
    return {"d0": d0, "df0": df0, "student": student}
