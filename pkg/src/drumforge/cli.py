"""Command-line pipeline: compose, render, analyze, coverage, fit, pipeline.

Every command validates its inputs, snapshots the resolved configuration
into the output directory before producing anything, and maintains a
machine-readable run-state marker (a crashed run leaves it at "running").
Exit codes: 0 success, 1 validation error, 2 partial failure.
"""

import argparse
import concurrent.futures
import csv
import json
import os
import sys
from pathlib import Path

from . import __version__
from .analytics import (
    coverage,
    fingerprint_dataset,
    track_report,
)
from .composer import (
    FULL_SCALE_TRACKS,
    TRAINING_SPLIT_TRACKS,
    CompositionConfig,
    TrackPlan,
    compose_corpus,
    plan_duration_s,
    realize_midi,
)
from .errors import ForgeError, ValidationError
from .library import DistanceWeights, load_library
from .midi import PPQ, VOICE_ORDER, Voice, parse_smf, write_smf
from .presets import PresetPool, TruncationConfig, assign_presets, audit_assignment
from .quantize import QuantizationSpec, quantize_track_set
from .scaling import (
    Split,
    compare_gaps,
    fit_learning_curve,
    group_points,
    read_points_csv,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_PARTIAL = 2


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _require(args, *names: str) -> None:
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise ValidationError(
            f"missing required argument(s): {', '.join(missing)} "
            "(set them as flags or in --config)"
        )


def _set_state(out_dir: Path, status: str, **extra) -> None:
    _write_json(out_dir / "run_state.json", {"status": status, **extra})


def _snapshot_config(out_dir: Path, command: str, payload: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "run_config.json", {"command": command, **payload})
    _set_state(out_dir, "running")


# ---------------------------------------------------------------------------
# compose

_WORKER_LIBRARY = None


def _init_compose_worker(manifest_path: str) -> None:
    global _WORKER_LIBRARY
    _WORKER_LIBRARY = load_library(manifest_path)


def _realize_worker(args: tuple) -> tuple[str, str | None]:
    plan_dict, corpus_dir, quantize_payload = args
    try:
        plan = TrackPlan.from_dict(plan_dict)
        track_set = realize_midi(plan, _WORKER_LIBRARY)
        if quantize_payload is not None:
            spec = QuantizationSpec(
                grid_division=quantize_payload["grid_division"],
                velocity_targets=frozenset(quantize_payload["velocity_targets"]),
            )
            track_set = quantize_track_set(track_set, spec)
        midi_path = Path(corpus_dir) / "midi" / f"{plan.track_id}.mid"
        midi_path.parent.mkdir(parents=True, exist_ok=True)
        midi_path.write_bytes(write_smf(track_set))
        return plan.track_id, None
    except Exception as exc:  # collected as a partial failure
        return plan_dict.get("track_id", "?"), str(exc)


def cmd_compose(args) -> int:
    _require(args, "manifest", "out")
    out_dir = Path(args.out)
    config = CompositionConfig(
        target_duration_s=args.duration,
        num_voices=args.voices,
        weights=DistanceWeights(),
        tempo_window_ratio=args.tempo_window,
        seed=args.seed,
    )
    quantize_payload = None
    if args.quantize:
        spec = QuantizationSpec(
            grid_division=args.quantize_grid,
            velocity_targets=frozenset(_parse_velocities(args.quantize_velocities)),
        )
        if PPQ % spec.grid_division != 0:
            raise ValidationError(
                f"--quantize-grid {spec.grid_division} does not divide the "
                f"internal resolution ({PPQ} ticks per quarter)"
            )
        quantize_payload = {
            "grid_division": spec.grid_division,
            "velocity_targets": sorted(spec.velocity_targets),
        }
    _snapshot_config(out_dir, "compose", {
        "manifest": str(args.manifest),
        "num_tracks": args.num_tracks,
        "train_split": args.train_split,
        "target_duration_s": args.duration,
        "num_voices": args.voices,
        "tempo_window_ratio": args.tempo_window,
        "seed": args.seed,
        "quantize": quantize_payload,
    })

    library = load_library(args.manifest)
    for error in library.load_errors:
        print(f"warning: {error}", file=sys.stderr)

    plans = compose_corpus(library, config, args.num_tracks)
    corpus_dir = out_dir / "corpus"
    (corpus_dir / "plans").mkdir(parents=True, exist_ok=True)
    for plan in plans:
        _write_json(corpus_dir / "plans" / f"{plan.track_id}.plan.json",
                    plan.to_dict())

    tasks = [(plan.to_dict(), str(corpus_dir), quantize_payload) for plan in plans]
    failures: list[tuple[str, str]] = []
    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=args.jobs,
            initializer=_init_compose_worker,
            initargs=(str(args.manifest),),
        ) as pool:
            results = list(pool.map(_realize_worker, tasks))
    else:
        _init_compose_worker(str(args.manifest))
        results = [_realize_worker(task) for task in tasks]
    for track_id, error in results:
        if error is not None:
            failures.append((track_id, error))
            print(f"error: {track_id}: {error}", file=sys.stderr)

    manifest_rows = [
        {
            "track_id": plan.track_id,
            "seed": plan.seed,
            "num_voices": plan.num_voices,
            "duration_s": plan_duration_s(plan),
            "split": "train" if index < args.train_split else "holdout",
            "plan": f"plans/{plan.track_id}.plan.json",
            "midi": f"midi/{plan.track_id}.mid",
        }
        for index, plan in enumerate(plans)
    ]
    _write_json(corpus_dir / "manifest.json",
                {"tracks": manifest_rows, "count": len(manifest_rows)})

    if failures:
        _set_state(out_dir, "partial",
                   errors=[f"{t}: {e}" for t, e in failures])
        return EXIT_PARTIAL
    _set_state(out_dir, "complete")
    print(f"composed {len(plans)} tracks into {corpus_dir}")
    return EXIT_OK


def _parse_velocities(raw: str) -> set[int]:
    try:
        values = {int(v) for v in raw.split(",") if v.strip()}
    except ValueError as exc:
        raise ValidationError(f"bad velocity list {raw!r}") from exc
    if not values:
        raise ValidationError("empty velocity list")
    return values


# ---------------------------------------------------------------------------
# render

_RENDER_STATE: dict = {}


def _init_render_worker(backend_config: dict) -> None:
    _RENDER_STATE["config"] = backend_config
    if backend_config["backend"] == "soundfont":
        from .audio.sf2 import SoundFontBackend

        preset_map = {
            pid: tuple(bp) for pid, bp in backend_config["preset_map"].items()
        }
        _RENDER_STATE["backend"] = SoundFontBackend.from_file(
            backend_config["sf2"], preset_map
        )
    else:
        from .audio.synth import ReferenceBackend

        _RENDER_STATE["backend"] = ReferenceBackend()


def _render_worker(args: tuple) -> tuple[str, str | None]:
    from .audio.mix import normalize_and_mix, stem_gain
    from .audio.synth import render_stem
    from .audio.wav import write_wav

    track_id, midi_path, chosen, out_dir = args
    config = _RENDER_STATE["config"]
    backend = _RENDER_STATE["backend"]
    try:
        track_set = parse_smf(Path(midi_path).read_bytes())
        track_dir = Path(out_dir) / track_id
        track_dir.mkdir(parents=True, exist_ok=True)
        stems = []
        for voice_name, preset_id in sorted(chosen.items()):
            voice = Voice(voice_name)
            track = track_set.voices.get(voice)
            if track is None or not track.notes:
                continue
            stem = render_stem(track, preset_id, backend,
                               sample_rate=config["sample_rate"],
                               tail_s=config["tail_s"])
            target = config["target_lufs"] + config["voice_offsets"].get(voice_name, 0.0)
            gain = stem_gain(stem, target)
            if gain is not None:
                stem = stem.scaled(gain)
            write_wav(track_dir / f"{voice_name}.wav", stem)
            stems.append(stem)
        if not stems:
            return track_id, "no renderable voices"
        mix = normalize_and_mix(stems, target_lufs=config["target_lufs"],
                                peak_ceiling_db=config["peak_ceiling_db"])
        write_wav(track_dir / "mix.wav", mix.as_stereo())
        return track_id, None
    except Exception as exc:
        return track_id, str(exc)


def cmd_render(args) -> int:
    _require(args, "corpus", "out")
    corpus_dir = Path(args.corpus)
    manifest_path = corpus_dir / "manifest.json"
    if not manifest_path.is_file():
        raise ValidationError(f"no corpus manifest at {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    tracks = manifest["tracks"]
    if not tracks:
        raise ValidationError("corpus manifest lists no tracks")

    if args.pool:
        pool = PresetPool.from_json(args.pool)
    else:
        pool = PresetPool.procedural(args.drum_presets, args.other_presets)
    truncation = None
    if args.truncate_presets:
        k, r = args.truncate_presets
        truncation = TruncationConfig(k_presets=k, max_reuses=r)

    # presets are assigned over every voice the corpus carries, so the
    # voice-count variants of one corpus share timbres; --voices only
    # restricts which stems are rendered
    corpus_voices = VOICE_ORDER[: max(t["num_voices"] for t in tracks)]
    rendered_voices = corpus_voices
    if args.voices is not None:
        if not 1 <= args.voices <= len(corpus_voices):
            raise ValidationError(
                f"--voices {args.voices} outside 1..{len(corpus_voices)} "
                "(the corpus voice count)"
            )
        rendered_voices = corpus_voices[: args.voices]
    out_dir = Path(args.out)
    _snapshot_config(out_dir, "render", {
        "corpus": str(corpus_dir),
        "backend": args.backend,
        "sf2": str(args.sf2) if args.sf2 else None,
        "voices": len(rendered_voices),
        "target_lufs": args.target_lufs,
        "voice_offsets": args.voice_offset or {},
        "truncate_presets": list(args.truncate_presets) if args.truncate_presets else None,
        "sample_rate": args.sample_rate,
        "seed": args.seed,
        "pool_sizes": {
            "drums": len(pool.drum_presets),
            "other": {v.value: len(p) for v, p in pool.other_presets.items()},
        },
    })

    track_ids = [t["track_id"] for t in tracks]
    assignment = assign_presets(track_ids, pool, voices=corpus_voices,
                                truncation=truncation, seed=args.seed)
    audit_assignment(assignment,
                     reuse_cap=truncation.max_reuses if truncation else None)
    audio_dir = out_dir / "audio"
    _write_json(audio_dir / "assignment.json", assignment.to_dict())

    if args.backend == "soundfont":
        if not args.sf2:
            raise ValidationError("--backend soundfont requires --sf2")
        preset_map = _soundfont_preset_map(pool, args.sf2)
    else:
        preset_map = {}
    backend_config = {
        "backend": args.backend,
        "sf2": str(args.sf2) if args.sf2 else None,
        "preset_map": preset_map,
        "sample_rate": args.sample_rate,
        "target_lufs": args.target_lufs,
        "voice_offsets": args.voice_offset or {},
        "peak_ceiling_db": args.peak_ceiling,
        "tail_s": args.tail,
    }

    tasks = []
    for row in tracks:
        chosen = {
            voice.value: preset
            for voice, preset in assignment.assignments[row["track_id"]].items()
            if voice in rendered_voices
        }
        tasks.append((row["track_id"], str(corpus_dir / row["midi"]), chosen,
                      str(audio_dir)))

    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=args.jobs,
            initializer=_init_render_worker,
            initargs=(backend_config,),
        ) as pool_executor:
            results = list(pool_executor.map(_render_worker, tasks))
    else:
        _init_render_worker(backend_config)
        results = [_render_worker(task) for task in tasks]

    failures = [(t, e) for t, e in results if e is not None]
    for track_id, error in failures:
        print(f"error: {track_id}: {error}", file=sys.stderr)
    if failures:
        _set_state(out_dir, "partial", errors=[f"{t}: {e}" for t, e in failures])
        return EXIT_PARTIAL
    _set_state(out_dir, "complete")
    print(f"rendered {len(tracks)} tracks into {audio_dir}")
    return EXIT_OK


def _soundfont_preset_map(pool: PresetPool, sf2_path: str) -> dict:
    """preset_id -> (bank, program); descriptors without one fall back to
    the soundfont's preset order."""
    from .audio.sf2 import SoundFont

    font = SoundFont.from_file(sf2_path)
    keys = font.preset_keys()
    if not keys:
        raise ValidationError(f"{sf2_path}: soundfont exposes no presets")
    mapping = {}
    all_descriptors = list(pool.drum_presets)
    for descriptors in pool.other_presets.values():
        all_descriptors.extend(descriptors)
    for index, descriptor in enumerate(all_descriptors):
        if descriptor.bank is not None and descriptor.program is not None:
            mapping[descriptor.preset_id] = (descriptor.bank, descriptor.program)
        else:
            mapping[descriptor.preset_id] = keys[index % len(keys)]
    return mapping


# ---------------------------------------------------------------------------
# analyze / coverage

def _report_worker(midi_path: str):
    """Per-track statistics; None for tracks without a drum voice."""
    track_set = parse_smf(Path(midi_path).read_bytes())
    if Voice.DRUMS not in track_set.voices:
        return None
    return track_report(track_set)


def _dataset_midi_paths(path: Path) -> list[Path]:
    if path.is_file() and path.suffix == ".mid":
        return [path]
    for candidate in (path / "manifest.json", path / "corpus" / "manifest.json"):
        if candidate.is_file():
            base = candidate.parent
            rows = json.loads(candidate.read_text())["tracks"]
            return [base / row["midi"] for row in rows]
    midi_files = sorted(path.glob("*.mid"))
    if not midi_files:
        raise ValidationError(f"{path}: no corpus manifest and no .mid files")
    return midi_files


def _load_dataset(path: Path) -> list:
    """A dataset is a corpus dir (manifest.json), a dir of .mid files, or a
    single .mid file."""
    if path.is_file() and path.suffix == ".mid":
        return [parse_smf(path.read_bytes())]
    manifest = None
    for candidate in (path / "manifest.json", path / "corpus" / "manifest.json"):
        if candidate.is_file():
            manifest = candidate
            break
    if manifest is not None:
        base = manifest.parent
        rows = json.loads(manifest.read_text())["tracks"]
        return [parse_smf((base / row["midi"]).read_bytes()) for row in rows]
    midi_files = sorted(path.glob("*.mid"))
    if not midi_files:
        raise ValidationError(f"{path}: no corpus manifest and no .mid files")
    return [parse_smf(p.read_bytes()) for p in midi_files]


def _dataset_label(path: Path) -> str:
    if path.is_file():
        return path.stem
    if path.name == "corpus" and path.parent.name:
        return path.parent.name
    return path.name


def cmd_analyze(args) -> int:
    _require(args, "out")
    out_dir = Path(args.out)
    paths = [Path(p) for p in args.datasets]
    _snapshot_config(out_dir, "analyze", {"datasets": [str(p) for p in paths]})

    from .plots import plot_distributions

    reports = {}
    for path in paths:
        label = _dataset_label(path)
        midi_paths = [str(p) for p in _dataset_midi_paths(path)]
        if args.jobs > 1:
            with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
                parts = list(pool.map(_report_worker, midi_paths))
        else:
            parts = [_report_worker(p) for p in midi_paths]
        skipped = sum(1 for part in parts if part is None)
        parts = [part for part in parts if part is not None]
        if skipped:
            print(f"warning: {label}: skipped {skipped} track(s) without drums",
                  file=sys.stderr)
        if not parts:
            raise ValidationError(f"{path}: no tracks with a drum voice")
        report = parts[0]
        for part in parts[1:]:
            report = report.merge(part)
        reports[label] = report
        _write_json(out_dir / f"{label}.report.json", report.to_dict())
    plot_distributions(reports, out_dir / "distributions.svg")
    _set_state(out_dir, "complete")
    print(f"analyzed {len(reports)} dataset(s) into {out_dir}")
    return EXIT_OK


def cmd_coverage(args) -> int:
    _require(args, "out")
    out_dir = Path(args.out)
    paths = [Path(p) for p in args.datasets]
    if len(paths) < 1:
        raise ValidationError("need at least one dataset")
    _snapshot_config(out_dir, "coverage", {"datasets": [str(p) for p in paths]})

    from .plots import plot_coverage_heatmap

    codes = {}
    for path in paths:
        label = _dataset_label(path)
        codes[label] = fingerprint_dataset(_load_dataset(path))
        if not codes[label]:
            raise ValidationError(f"{path}: dataset has zero beats")
    labels = sorted(codes)

    matrix = {}
    for source in labels:
        for target in labels:
            matrix[(source, target)] = coverage(codes[source], codes[target])

    with (out_dir / "coverage.csv").open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow([
            "source", "target", "beat_coverage", "unique_sequence_coverage",
            "source_unique", "target_unique", "target_beats",
        ])
        for (source, target), result in sorted(matrix.items()):
            writer.writerow([
                source, target, f"{result.beat_coverage:.6f}",
                f"{result.unique_sequence_coverage:.6f}", result.source_unique,
                result.target_unique, result.target_beats,
            ])
    plot_coverage_heatmap(matrix, labels, labels, out_dir / "coverage_beats.svg",
                          measure="beat_coverage")
    plot_coverage_heatmap(matrix, labels, labels, out_dir / "coverage_unique.svg",
                          measure="unique_sequence_coverage")

    if args.export_fingerprints:
        for label in labels:
            lines = "".join(f"{code:015x}\n" for code in sorted(set(codes[label])))
            (out_dir / f"{label}.fingerprints.hex").write_text(lines)

    _set_state(out_dir, "complete")
    print(f"coverage over {len(labels)} dataset(s) into {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit

def cmd_fit(args) -> int:
    _require(args, "out")
    out_dir = Path(args.out)
    _snapshot_config(out_dir, "fit", {
        "losses": str(args.losses),
        "bootstrap": args.bootstrap,
        "seed": args.seed,
        "log_space": not args.linear_space,
    })

    from .plots import plot_learning_curves

    points = read_points_csv(args.losses)
    groups = group_points(points)
    fits = {}
    for (dataset, split), group in sorted(
        groups.items(), key=lambda kv: (kv[0][0], kv[0][1].value)
    ):
        fits[(dataset, split)] = fit_learning_curve(
            group, log_space=not args.linear_space
        )
    _write_json(out_dir / "fits.json",
                [fit.to_dict() for fit in fits.values()])

    for split in (Split.VALIDATION, Split.TEST):
        split_fits = {
            dataset: fit for (dataset, s), fit in fits.items() if s is split
        }
        if split_fits:
            plot_learning_curves(split_fits, out_dir / f"curves_{split.value}.svg")

    test_fits = {d: f for (d, s), f in fits.items() if s is Split.TEST}
    if len(test_fits) >= 2:
        ranking = compare_gaps(test_fits, n_resamples=args.bootstrap, seed=args.seed)
        _write_json(out_dir / "ranking.json", [entry.to_dict() for entry in ranking])
        print("transfer-gap ranking (ascending loss floor):")
        for entry in ranking:
            tie = " (tied with previous)" if entry.tied_with_previous else ""
            print(f"  {entry.dataset_label}: gamma={entry.gamma:.5f} "
                  f"CI [{entry.ci_low:.5f}, {entry.ci_high:.5f}]{tie}")

    _set_state(out_dir, "complete")
    print(f"fitted {len(fits)} learning curve(s) into {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# pipeline

def cmd_pipeline(args) -> int:
    _require(args, "manifest", "out")
    out_dir = Path(args.out)
    _snapshot_config(out_dir, "pipeline", {
        "manifest": str(args.manifest),
        "num_tracks": args.num_tracks,
        "train_split": args.train_split,
        "seed": args.seed,
        "quantize_variant": args.quantize,
    })

    stages: list[str] = []
    compose_args = argparse.Namespace(
        manifest=args.manifest, out=str(out_dir / "main"),
        num_tracks=args.num_tracks, train_split=args.train_split,
        duration=args.duration, voices=args.voices,
        tempo_window=args.tempo_window, seed=args.seed, quantize=False,
        quantize_grid=4, quantize_velocities="127,100", jobs=args.jobs,
    )
    code = cmd_compose(compose_args)
    if code != EXIT_OK:
        _set_state(out_dir, "partial", stages=stages + ["compose:failed"])
        return code
    stages.append("compose")

    datasets = [str(out_dir / "main")]
    if args.quantize:
        quantized_args = argparse.Namespace(**vars(compose_args))
        quantized_args.out = str(out_dir / "quantized")
        quantized_args.quantize = True
        code = cmd_compose(quantized_args)
        if code != EXIT_OK:
            _set_state(out_dir, "partial", stages=stages + ["quantize:failed"])
            return code
        stages.append("quantize")
        datasets.append(str(out_dir / "quantized"))

    render_args = argparse.Namespace(
        corpus=str(out_dir / "main" / "corpus"), out=str(out_dir / "main"),
        backend=args.backend, sf2=args.sf2, pool=None,
        drum_presets=args.drum_presets, other_presets=args.other_presets,
        truncate_presets=args.truncate_presets, voices=None,
        target_lufs=args.target_lufs, voice_offset={},
        sample_rate=args.sample_rate, seed=args.seed,
        peak_ceiling=-1.0, tail=0.1, jobs=args.jobs,
    )
    code = cmd_render(render_args)
    if code != EXIT_OK:
        _set_state(out_dir, "partial", stages=stages + ["render:failed"])
        return code
    stages.append("render")

    analyze_args = argparse.Namespace(datasets=datasets,
                                      out=str(out_dir / "analysis"),
                                      jobs=args.jobs)
    code = cmd_analyze(analyze_args)
    if code != EXIT_OK:
        _set_state(out_dir, "partial", stages=stages + ["analyze:failed"])
        return code
    stages.append("analyze")

    if len(datasets) > 1:
        coverage_args = argparse.Namespace(datasets=datasets,
                                           out=str(out_dir / "coverage"),
                                           export_fingerprints=True)
        code = cmd_coverage(coverage_args)
        if code != EXIT_OK:
            _set_state(out_dir, "partial", stages=stages + ["coverage:failed"])
            return code
        stages.append("coverage")

    _set_state(out_dir, "complete", stages=stages)
    print(f"pipeline finished: {', '.join(stages)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing

class _VoiceOffset(argparse.Action):
    def __call__(self, parser, namespace, values, option_string=None):
        offsets = getattr(namespace, self.dest) or {}
        for item in values:
            try:
                voice, value = item.split("=", 1)
                Voice(voice)
                offsets[voice] = float(value)
            except (ValueError, KeyError) as exc:
                raise argparse.ArgumentError(
                    self, f"expected VOICE=DB with voice in "
                    f"{[v.value for v in VOICE_ORDER]}: {item!r} ({exc})"
                )
        setattr(namespace, self.dest, offsets)


def _apply_config_file(subparsers: dict, argv: list[str]) -> None:
    """--config FILE provides per-flag defaults; explicit flags still win."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, rest = probe.parse_known_args(argv)
    if not known.config:
        return
    defaults = json.loads(Path(known.config).read_text())
    if not isinstance(defaults, dict):
        raise ValidationError(f"{known.config}: config must be a JSON object")
    command = next((a for a in rest if not a.startswith("-")), None)
    if command in subparsers:
        valid = {
            action.dest for action in subparsers[command]._actions
        }
        unknown = set(defaults) - valid
        if unknown:
            raise ValidationError(
                f"{known.config}: unknown config keys {sorted(unknown)}"
            )
        subparsers[command].set_defaults(**defaults)


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(
        prog="drumforge",
        description="Loop-based synthetic dataset forge for drum transcription",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    jobs_default = os.cpu_count() or 1

    compose = sub.add_parser("compose", help="compose MIDI tracks from a loop library")
    compose.add_argument("--config", help="JSON file with flag defaults")
    compose.add_argument("--manifest", help="loop manifest JSON")
    compose.add_argument("--out", help="output run directory")
    compose.add_argument("--num-tracks", type=int, default=FULL_SCALE_TRACKS,
                         dest="num_tracks",
                         help="corpus size (default: the full production scale)")
    compose.add_argument("--train-split", type=int,
                         default=TRAINING_SPLIT_TRACKS, dest="train_split",
                         help="first N tracks are labeled 'train' in the manifest")
    compose.add_argument("--duration", type=float, default=180.0,
                         help="target track duration in seconds")
    compose.add_argument("--voices", type=int, default=4, choices=(1, 2, 3, 4))
    compose.add_argument("--tempo-window", type=float, default=1.1,
                         dest="tempo_window")
    compose.add_argument("--seed", type=int, default=0)
    compose.add_argument("--quantize", action="store_true",
                         help="simulate offline annotation on the realized MIDI")
    compose.add_argument("--quantize-grid", type=int, default=4,
                         dest="quantize_grid",
                         help="grid subdivisions per quarter note")
    compose.add_argument("--quantize-velocities", default="127,100",
                         dest="quantize_velocities")
    compose.add_argument("--jobs", type=int, default=jobs_default)
    compose.set_defaults(func=cmd_compose)

    render = sub.add_parser("render", help="render a composed corpus to audio")
    render.add_argument("--config", help="JSON file with flag defaults")
    render.add_argument("--corpus", help="corpus directory")
    render.add_argument("--out")
    render.add_argument("--backend", choices=("reference", "soundfont"),
                        default="reference")
    render.add_argument("--sf2", help="SoundFont file for --backend soundfont")
    render.add_argument("--pool", help="preset pool JSON")
    render.add_argument("--drum-presets", type=int, default=512,
                        dest="drum_presets")
    render.add_argument("--other-presets", type=int, default=458,
                        dest="other_presets")
    render.add_argument("--truncate-presets", type=int, nargs=2,
                        metavar=("K", "R"), dest="truncate_presets",
                        help="use only K drum presets, at most R times each")
    render.add_argument("--voices", type=int, choices=(1, 2, 3, 4),
                        help="render only the first N voices of the corpus")
    render.add_argument("--target-lufs", type=float, default=-23.0,
                        dest="target_lufs")
    render.add_argument("--voice-offset", nargs="*", action=_VoiceOffset,
                        dest="voice_offset", metavar="VOICE=DB",
                        help="per-voice loudness offset in LU")
    render.add_argument("--peak-ceiling", type=float, default=-1.0,
                        dest="peak_ceiling")
    render.add_argument("--tail", type=float, default=0.1,
                        help="silence appended after the last note (s)")
    render.add_argument("--sample-rate", type=int, choices=(44_100, 48_000),
                        default=44_100, dest="sample_rate")
    render.add_argument("--seed", type=int, default=0)
    render.add_argument("--jobs", type=int, default=jobs_default)
    render.set_defaults(func=cmd_render)

    analyze = sub.add_parser("analyze", help="dataset distribution reports")
    analyze.add_argument("datasets", nargs="+",
                         help="corpus dirs, .mid dirs, or .mid files")
    analyze.add_argument("--out")
    analyze.add_argument("--jobs", type=int, default=jobs_default)
    analyze.set_defaults(func=cmd_analyze)

    cover = sub.add_parser("coverage", help="pairwise beat-fingerprint coverage")
    cover.add_argument("datasets", nargs="+")
    cover.add_argument("--out")
    cover.add_argument("--export-fingerprints", action="store_true",
                       dest="export_fingerprints")
    cover.set_defaults(func=cmd_coverage)

    fit = sub.add_parser("fit", help="fit learning curves to measured losses")
    fit.add_argument("losses", help="CSV with header dataset,split,n_tracks,loss")
    fit.add_argument("--out")
    fit.add_argument("--bootstrap", type=int, default=1000)
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--linear-space", action="store_true", dest="linear_space",
                     help="fit plain least squares instead of log space")
    fit.set_defaults(func=cmd_fit)

    pipeline = sub.add_parser("pipeline", help="compose, render and analyze")
    pipeline.add_argument("--config", help="JSON file with flag defaults")
    pipeline.add_argument("--manifest")
    pipeline.add_argument("--out")
    pipeline.add_argument("--num-tracks", type=int, default=FULL_SCALE_TRACKS,
                          dest="num_tracks")
    pipeline.add_argument("--train-split", type=int,
                          default=TRAINING_SPLIT_TRACKS, dest="train_split")
    pipeline.add_argument("--duration", type=float, default=180.0)
    pipeline.add_argument("--voices", type=int, default=4, choices=(1, 2, 3, 4))
    pipeline.add_argument("--tempo-window", type=float, default=1.1,
                          dest="tempo_window")
    pipeline.add_argument("--seed", type=int, default=0)
    pipeline.add_argument("--quantize", action="store_true",
                          help="also emit the quantized corpus variant")
    pipeline.add_argument("--backend", choices=("reference", "soundfont"),
                          default="reference")
    pipeline.add_argument("--sf2")
    pipeline.add_argument("--drum-presets", type=int, default=512,
                          dest="drum_presets")
    pipeline.add_argument("--other-presets", type=int, default=458,
                          dest="other_presets")
    pipeline.add_argument("--truncate-presets", type=int, nargs=2,
                          metavar=("K", "R"), dest="truncate_presets")
    pipeline.add_argument("--target-lufs", type=float, default=-23.0,
                          dest="target_lufs")
    pipeline.add_argument("--sample-rate", type=int, choices=(44_100, 48_000),
                          default=44_100, dest="sample_rate")
    pipeline.add_argument("--jobs", type=int, default=jobs_default)
    pipeline.set_defaults(func=cmd_pipeline)

    return parser, {
        "compose": compose, "render": render, "analyze": analyze,
        "coverage": cover, "fit": fit, "pipeline": pipeline,
    }


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subparsers = build_parser()
    try:
        _apply_config_file(subparsers, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except ForgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
