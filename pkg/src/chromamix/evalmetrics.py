"""Segment-median SDR evaluation and the waveform/spectral l1 training losses.

SDR here is the plain energy ratio ``10 log10(|ref|^2 / |ref - est|^2)``, not
the BSS-eval projection variant, so absolute values are only comparable
between runs of this package.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Mapping

import numpy as np

from . import spectral
from .audio_io import SAMPLE_RATE, AudioSegment
from .errors import EmptyEvaluationError, ShapeError, UndefinedReferenceError

SDR_CAP_DB = 100.0
_CAP_RATIO = 1e-10
SOURCES = ("vocal", "accompaniment")


def _arr(x) -> np.ndarray:
    return np.asarray(x.samples if isinstance(x, AudioSegment) else x, dtype=np.float64)


def sdr(reference, estimate) -> float:
    """Signal-to-distortion ratio in dB, capped at +100 dB."""
    ref, est = _arr(reference), _arr(estimate)
    if ref.shape != est.shape:
        raise ShapeError(f"length mismatch: {ref.shape} vs {est.shape}")
    num = float(np.dot(ref, ref))
    if num == 0.0:
        raise UndefinedReferenceError("reference has zero energy")
    resid = ref - est
    den = float(np.dot(resid, resid))
    if den < _CAP_RATIO * num:
        return SDR_CAP_DB
    return 10.0 * math.log10(num / den)


@dataclass
class SdrReport:
    per_segment: dict[str, list[dict]] = field(default_factory=dict)
    per_song: dict[str, dict[str, float | None]] = field(default_factory=dict)
    corpus: dict[str, float | None] = field(default_factory=dict)
    mean_of_sources: float | None = None
    skipped: dict[str, list[dict]] = field(default_factory=dict)
    segment_s: float = 10.0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def table(self, label: str = "Estimate", sep: str = " | ") -> str:
        """Table-style rows: name, SDR (V), SDR (A), Mean."""

        def fmt(v):
            return "N/A" if v is None else f"{v:.2f}"

        header = sep.join(["Experiment", "SDR (V)", "SDR (A)", "Mean"])
        row = sep.join([
            label,
            fmt(self.corpus.get("vocal")),
            fmt(self.corpus.get("accompaniment")),
            fmt(self.mean_of_sources),
        ])
        return header + "\n" + row


def _median(values) -> float | None:
    vals = [v for v in values if v is not None]
    return float(np.median(vals)) if vals else None


def evaluate_separation(
    references: Mapping[str, tuple],
    estimates: Mapping[str, tuple],
    segment_s: float = 10.0,
    sample_rate: int = SAMPLE_RATE,
) -> SdrReport:
    """Median-of-medians SDR over non-overlapping ``segment_s`` windows.

    ``references`` and ``estimates`` map song id to a ``(vocal,
    accompaniment)`` pair of equal-length segments or arrays. A trailing
    partial window is dropped; windows whose reference stem is silent are
    skipped for that source and listed in ``SdrReport.skipped``.
    """
    missing = set(references) ^ set(estimates)
    if missing:
        raise ShapeError(f"songs present on only one side: {sorted(missing)}")
    n = int(round(segment_s * sample_rate))
    report = SdrReport(segment_s=segment_s)
    any_segment = False
    for sid in sorted(references):
        refs = [_arr(x) for x in references[sid]]
        ests = [_arr(x) for x in estimates[sid]]
        for r, e in zip(refs, ests):
            if r.shape != e.shape:
                raise ShapeError(f"{sid}: reference/estimate lengths differ")
        n_seg = len(refs[0]) // n
        rows = []
        for k in range(n_seg):
            row = {"index": k}
            win = np.s_[k * n : (k + 1) * n]
            for name, r, e in zip(SOURCES, refs, ests):
                rw = r[win]
                if not np.any(rw):
                    row[name] = None
                    report.skipped.setdefault(sid, []).append({"index": k, "source": name})
                    continue
                row[name] = sdr(rw, e[win])
            rows.append(row)
        any_segment |= n_seg > 0
        report.per_segment[sid] = rows
        report.per_song[sid] = {name: _median(r[name] for r in rows) for name in SOURCES}
    if not any_segment:
        raise EmptyEvaluationError(f"no complete {segment_s} s segment in any song")
    report.corpus = {
        name: _median(s[name] for s in report.per_song.values()) for name in SOURCES
    }
    if all(report.corpus[name] is not None for name in SOURCES):
        report.mean_of_sources = (report.corpus["vocal"] + report.corpus["accompaniment"]) / 2
    return report


@dataclass(frozen=True)
class LossWeights:
    lambda_audio: float = 1.0
    lambda_spec: float = 1.0
    lambda_voc: float = 1.0
    lambda_acc: float = 1.0

    def __post_init__(self):
        for name, v in asdict(self).items():
            if v < 0:
                raise ValueError(f"{name} must be >= 0")


def source_loss(y, y_hat, weights: LossWeights = LossWeights()) -> float:
    """Weighted sum of waveform l1 and STFT-magnitude l1 (both means)."""
    a, b = _arr(y), _arr(y_hat)
    if a.shape != b.shape:
        raise ShapeError(f"length mismatch: {a.shape} vs {b.shape}")
    loss = 0.0
    if weights.lambda_audio:
        loss += weights.lambda_audio * float(np.mean(np.abs(a - b)))
    if weights.lambda_spec:
        mag_a = spectral.magnitude(spectral.stft(a))
        mag_b = spectral.magnitude(spectral.stft(b))
        loss += weights.lambda_spec * float(np.mean(np.abs(mag_a - mag_b)))
    return loss


def total_loss(voc, acc, weights: LossWeights = LossWeights()) -> float:
    """``voc`` and ``acc`` are ``(y, y_hat)`` pairs."""
    return combine_losses(source_loss(*voc, weights), source_loss(*acc, weights), weights)


def combine_losses(loss_voc: float, loss_acc: float, weights: LossWeights = LossWeights()) -> float:
    return weights.lambda_voc * loss_voc + weights.lambda_acc * loss_acc
