"""``chromamix`` command-line entry point.

Exit codes: 0 success, 1 other error, 2 usage, 3 I/O, 4 validation,
5 partial failure (some items of a batch failed).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import audio_io, chroma, dataset, evalmetrics, remix, selftrain
from .errors import (
    ChromamixError,
    EmptyEvaluationError,
    FormatError,
    InsufficientCandidatesError,
    InsufficientDurationError,
    ParameterError,
    ShapeError,
    ValidationError,
)
from .matching import MatchConfig, match_score, parse_temperature

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_VALIDATION = 4
EXIT_PARTIAL = 5

log = logging.getLogger("chromamix")


class UsageError(ChromamixError):
    pass


def _emit(args, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        print(text)


def _dump(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)


# --- synth -----------------------------------------------------------------

def cmd_synth(args) -> int:
    if args.spec:
        with open(args.spec) as fh:
            spec = json.load(fh)
    else:
        spec = dataset.default_corpus_spec(args.n_songs, args.duration, seed=args.seed)
    manifest = dataset.synth_corpus(spec, args.out, seed=args.seed)
    if len(manifest):
        dataset.save_manifest(dataset.unlabeled_view(manifest), Path(args.out) / "unlabeled.jsonl")
    _emit(
        args,
        {"songs": len(manifest), "manifest": str(Path(args.out) / "manifest.jsonl")},
        f"wrote {len(manifest)} songs to {args.out}",
    )
    return EXIT_OK


# --- chroma ----------------------------------------------------------------

def cmd_chroma(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names, cgrams, vectors = [], [], []
    for path in args.inputs:
        seg = audio_io.load_wav(path)
        cg = chroma.chromagram(seg)
        vec = chroma.chroma_vector(cg)
        if not np.any(vec.values):
            log.warning("%s: chroma vector is all zero (silent input)", path)
        name = Path(path).stem
        chroma.write_csv(cg, out / f"{name}_chromagram.csv")
        _dump(vec.to_dict(), out / f"{name}_chroma.json")
        names.append(name)
        cgrams.append(cg)
        vectors.append(vec)
    scores = [[match_score(a, b) for b in vectors] for a in vectors]
    payload = {"inputs": names, "argmax": [v.argmax for v in vectors]}
    if len(vectors) > 1:
        _dump({"inputs": names, "scores": scores}, out / "scores.json")
        with open(out / "scores.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["", *names])
            for name, row in zip(names, scores):
                w.writerow([name, *(f"{s:.6f}" for s in row)])
        payload["scores"] = scores
    if args.plot:
        from .plotting import plot_chromagrams

        plot_chromagrams(names, cgrams, vectors, out / "chroma.png", scores)
    lines = [
        f"{n}: argmax {chroma.PITCH_CLASSES[v.argmax]} ({v.argmax})" for n, v in zip(names, vectors)
    ]
    if len(vectors) > 1:
        lines += [
            ",".join([""] + names),
            *(",".join([n] + [f"{s:.4f}" for s in row]) for n, row in zip(names, scores)),
        ]
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK


# --- augment ---------------------------------------------------------------

def cmd_augment(args) -> int:
    strategy = remix.Strategy(args.strategy)
    if args.T is not None and strategy is not remix.Strategy.PITCH_AWARE:
        raise UsageError("--T only applies to --strategy pitch_aware")
    if not 0.0 <= args.remix_prob <= 1.0:
        raise UsageError("--remix-prob must be in [0, 1]")
    if args.count < 0:
        raise UsageError("--count must be >= 0")
    try:
        config = MatchConfig(
            n_candidates=args.n,
            temperature=1.0 if args.T is None else parse_temperature(args.T),
            mode=args.mode,
            segment_s=args.segment_s,
            seed=args.seed,
        )
    except ParameterError as exc:
        raise UsageError(str(exc)) from exc
    manifest = dataset.load_manifest(args.manifest)
    if not len(manifest):
        raise ValidationError("manifest has no songs")
    pool = dataset.SegmentPool(manifest)
    result = remix.run_batch(pool, strategy, config, args.count, jobs=args.jobs,
                             remix_prob=args.remix_prob)
    out = remix.write_batch(result, args.out, args.seed)
    if args.plot:
        from .plotting import plot_score_histogram

        plot_score_histogram(result.summary, out / "scores.png")
    s = result.summary
    text = f"{s['written']}/{s['requested']} remixes written to {out}"
    stats = s["match_score"] or s["realized_score"]
    if stats:
        text += f"; chosen score mean {stats['mean']:.4f} var {stats['variance']:.4f}"
    if s["failed"]:
        text += f"; {s['failed']} failed"
    _emit(args, s, text)
    return EXIT_PARTIAL if s["failed"] else EXIT_OK


# --- eval ------------------------------------------------------------------

def load_aligned(ref: dataset.Manifest, est: dataset.Manifest):
    refs, ests = ref.by_id(), est.by_id()
    if set(refs) != set(ests):
        raise ValidationError(
            f"manifests cover different songs: {sorted(set(refs) ^ set(ests))}"
        )
    ref_stems, est_stems = {}, {}
    for sid in sorted(refs):
        r = dataset.load_stems(refs[sid])
        e = dataset.load_stems(ests[sid])
        if len(r[0]) != len(e[0]):
            raise ValidationError(f"{sid}: reference and estimate lengths differ")
        ref_stems[sid], est_stems[sid] = r, e
    return ref_stems, est_stems


def cmd_eval(args) -> int:
    ref = dataset.load_manifest(args.ref)
    est = dataset.load_manifest(args.est)
    refs, ests = load_aligned(ref, est)
    report = evalmetrics.evaluate_separation(refs, ests, segment_s=args.segment_s)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(report.to_json())
        if args.plot:
            from .plotting import plot_sdr_report

            plot_sdr_report(report, out.with_suffix(".png"))
    _emit(args, report.to_dict(), report.table(args.label or est.dataset_name))
    return EXIT_OK


# --- selftrain -------------------------------------------------------------

def make_separator(spec: str, truth: dataset.Manifest | None):
    if spec == "identity":
        return selftrain.IdentitySeparator()
    if spec == "irm":
        if truth is None:
            raise UsageError("--separator irm needs --truth (or --labeled) with true stems")
        return selftrain.irm_oracle_separator(truth)
    if spec.startswith("extern:"):
        return selftrain.ExternalSeparator(spec[len("extern:"):])
    raise UsageError(f"unknown separator {spec!r}")


def cmd_selftrain(args) -> int:
    unlabeled = dataset.load_manifest(args.unlabeled)
    labeled = (
        dataset.load_manifest(args.labeled)
        if args.labeled
        else dataset.Manifest((), "empty", dataset.ManifestKind.LABELED)
    )
    truth = dataset.load_manifest(args.truth) if args.truth else (labeled if args.labeled else None)
    separator = make_separator(args.separator, truth)
    vad = selftrain.VadConfig(args.vad_frame_s, args.vad_threshold, args.vad_min_fraction)
    res = selftrain.run_pipeline(unlabeled, labeled, separator, args.out, vad, jobs=args.jobs)
    failures = res["d0"].meta.get("failures", {})
    summary = {
        "unlabeled": len(unlabeled),
        "pseudo_labeled": len(res["d0"]),
        "failures": failures,
        "vad_kept": res["df0"].meta["kept"],
        "vad_dropped": res["df0"].meta["dropped"],
        "student": len(res["student"]),
        "separator": separator.name,
    }
    _dump(summary, Path(args.out) / "selftrain_summary.json")
    _emit(
        args,
        summary,
        f"D_u {len(unlabeled)} -> D_0 {len(res['d0'])} -> D_f0 {len(res['df0'])} "
        f"-> student {len(res['student'])}",
    )
    return EXIT_PARTIAL if failures else EXIT_OK


# --- wiring ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chromamix", description="Pitch-aware remixing toolkit")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--log-level", default=os.environ.get("CHROMAMIX_LOG", "WARNING"))
    p.add_argument("--json", action="store_true", help="machine-readable summary on stdout")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic stem corpus")
    s.add_argument("--spec", help="corpus description JSON (default: tonally diverse corpus)")
    s.add_argument("--out", required=True)
    s.add_argument("--n-songs", type=int, default=20)
    s.add_argument("--duration", type=float, default=12.0)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("chroma", help="chromagrams, chroma vectors and pairwise scores")
    s.add_argument("inputs", nargs="+")
    s.add_argument("--out", required=True)
    s.add_argument("--plot", action="store_true")
    s.set_defaults(func=cmd_chroma)

    s = sub.add_parser("augment", help="batch remixing")
    s.add_argument("--manifest", required=True)
    s.add_argument("--strategy", choices=[x.value for x in remix.Strategy if x is not remix.Strategy.ORIGINAL],
                   default="pitch_aware")
    s.add_argument("--T", default=None, help="softmax temperature, number or 'inf'")
    s.add_argument("--n", type=int, default=8, help="candidates per anchor")
    s.add_argument("--mode", choices=["voc2voc", "acc2acc"], default="acc2acc")
    s.add_argument("--count", type=int, default=100)
    s.add_argument("--segment-s", type=float, default=10.0)
    s.add_argument("--remix-prob", type=float, default=1.0)
    s.add_argument("--out", required=True)
    s.add_argument("--plot", action="store_true")
    s.set_defaults(func=cmd_augment)

    s = sub.add_parser("eval", help="segment-median SDR of estimates against references")
    s.add_argument("--ref", required=True)
    s.add_argument("--est", required=True)
    s.add_argument("--segment-s", type=float, default=10.0)
    s.add_argument("--out", help="report JSON path")
    s.add_argument("--label")
    s.add_argument("--plot", action="store_true")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("selftrain", help="pseudo-label, VAD-filter and build the student set")
    s.add_argument("--unlabeled", required=True)
    s.add_argument("--labeled")
    s.add_argument("--truth", help="manifest with true stems for the irm oracle")
    s.add_argument("--separator", default="irm", help="irm | identity | extern:<cmd>")
    s.add_argument("--vad-threshold", type=float, default=0.01)
    s.add_argument("--vad-frame-s", type=float, default=0.03)
    s.add_argument("--vad-min-fraction", type=float, default=0.1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_selftrain)
    return p


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (UsageError, ParameterError)):
        return EXIT_USAGE
    if isinstance(exc, OSError):
        return EXIT_IO
    if isinstance(exc, (ValidationError, FormatError, ShapeError, EmptyEvaluationError,
                        InsufficientDurationError, InsufficientCandidatesError)):
        return EXIT_VALIDATION
    return EXIT_ERROR


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=str(args.log_level).upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ChromamixError, OSError, ValueError) as exc:
        code = exit_code_for(exc)
        if code == EXIT_ERROR and isinstance(exc, ValueError) and not isinstance(exc, ChromamixError):
            code = EXIT_USAGE
        print(f"chromamix {args.command}: error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
