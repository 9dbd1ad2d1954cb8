"""Acceptance suite: every contract the build must honor, one test per
criterion, each summarized as a PASS/FAIL line at the end of the run."""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from drumforge.analytics import (
    FINGERPRINT_CELLS,
    BeatFingerprint,
    beat_fingerprint,
    coverage,
    distribution_report,
    fingerprint_dataset,
    off_grid_interval_mass,
)
from drumforge.audio import (
    BELOW_GATE,
    AudioBuffer,
    ReferenceBackend,
    measure_loudness,
    normalize_and_mix,
    render_stem,
)
from drumforge.audio.mix import stem_gain
from drumforge.cli import EXIT_OK, EXIT_VALIDATION, main
from drumforge.composer import CompositionConfig, compose_corpus, realize_midi, select_loop
from drumforge.errors import ValidationError
from drumforge.library import (
    DistanceWeights,
    LoopMeta,
    SelectionConstraints,
    load_library,
    loops_from_tracksets,
)
from drumforge.midi import (
    PPQ,
    MeterMap,
    NoteEvent,
    SmfParseError,
    TempoMap,
    TrackSet,
    Voice,
    normalize_overlaps,
    parse_smf,
    write_smf,
)
from drumforge.presets import PresetPool, TruncationConfig, assign_presets
from drumforge.quantize import DrumClass, QuantizationSpec, quantize_track_set
from drumforge.rng import SplitMix64
from drumforge.scaling import (
    LearningCurvePoint,
    Split,
    compare_gaps,
    fit_learning_curve,
)

from .helpers import (
    build_library,
    criterion,
    make_track_set,
    random_loop_notes,
    uniform_drum_specs,
)

PLANTED = ((0.4, 0.35, 0.05), (1.0, 0.5, 0.0), (0.2, 0.2, 0.15))
N_GRID = tuple(int(n) for n in np.unique(np.geomspace(1, 8192, 8).round()))


def _planted_points(alpha, beta, gamma, noise=0.0, seed=0, label="d"):
    rng = np.random.default_rng(seed)
    return [
        LearningCurvePoint(
            n,
            (alpha * n ** (-beta) + gamma) * float(1 + rng.uniform(-noise, noise)),
            Split.TEST,
            label,
        )
        for n in N_GRID
    ]


@criterion("1. scaling-law recovery: planted curves, noise tolerance, "
           "runtime < 1 s/fit, gap ordering")
def test_criterion_1_scaling_law_recovery():
    # noiseless curves recovered to 1e-6
    for alpha, beta, gamma in PLANTED:
        fit = fit_learning_curve(_planted_points(alpha, beta, gamma))
        assert abs(fit.alpha - alpha) < 1e-6
        assert abs(fit.beta - beta) < 1e-6
        assert abs(fit.gamma - gamma) < 1e-6

    # 2 % multiplicative noise (frozen realization), stated tolerances
    fits = {}
    for alpha, beta, gamma in PLANTED:
        label = f"curve-{gamma:.2f}"
        start = time.perf_counter()
        fit = fit_learning_curve(
            _planted_points(alpha, beta, gamma, noise=0.02, seed=1, label=label)
        )
        elapsed = time.perf_counter() - start
        assert elapsed < 1.0, f"fit took {elapsed:.2f}s"
        assert abs(fit.alpha - alpha) / alpha < 0.05
        assert abs(fit.beta - beta) / beta < 0.05
        assert abs(fit.gamma - gamma) < 0.005
        fits[label] = fit

    # planted gamma ordering recovered across the three curve families
    ranking = compare_gaps(fits, n_resamples=1000, seed=0)
    assert [e.dataset_label for e in ranking] == [
        "curve-0.00", "curve-0.05", "curve-0.15",
    ]


def _random_code_dataset(rng, max_beats=1000):
    tracks = []
    total_beats = 0
    while total_beats < rng.integers(50, max_beats):
        bars = int(rng.integers(1, 5))
        notes = random_loop_notes(rng, Voice.DRUMS, bars, jitter_ticks=10,
                                  density=float(rng.uniform(0.2, 0.8)))
        tracks.append(make_track_set(notes_by_voice={Voice.DRUMS: notes}))
        total_beats += bars * 4
    codes = fingerprint_dataset(tracks)
    return codes[:max_beats]


@criterion("2. coverage equals the exhaustive oracle on 50 random pairs; "
           "self-coverage (1,1); monotone in the source")
def test_criterion_2_coverage_oracle_equivalence():
    rng = np.random.default_rng(2024)
    for _ in range(50):
        source = _random_code_dataset(rng)
        target = _random_code_dataset(rng)
        result = coverage(source, target)

        # oracle: nested-loop membership, dict-based uniqueness
        covered_beats = 0
        for t in target:
            for s in source:
                if s == t:
                    covered_beats += 1
                    break
        unique_targets = list(dict.fromkeys(target))
        covered_unique = 0
        for t in unique_targets:
            for s in source:
                if s == t:
                    covered_unique += 1
                    break
        assert result.beat_coverage == covered_beats / len(target)
        assert result.unique_sequence_coverage == covered_unique / len(unique_targets)
        assert result.target_beats == len(target)
        assert result.target_unique == len(unique_targets)

        self_result = coverage(target, target)
        assert self_result.beat_coverage == 1.0
        assert self_result.unique_sequence_coverage == 1.0

    for chain in range(20):
        chain_rng = np.random.default_rng(31_000 + chain)
        target = _random_code_dataset(chain_rng)
        source = _random_code_dataset(chain_rng, max_beats=100)
        previous = coverage(source, target)
        for _ in range(5):
            source = source + _random_code_dataset(chain_rng, max_beats=100)
            current = coverage(source, target)
            assert current.beat_coverage >= previous.beat_coverage
            assert (current.unique_sequence_coverage
                    >= previous.unique_sequence_coverage)
            previous = current


@criterion("3. fingerprint encode/decode bijective (60 single cells + 10k "
           "random); collision removal")
def test_criterion_3_fingerprint_correctness():
    for bit in range(FINGERPRINT_CELLS):
        fp = BeatFingerprint(1 << bit)
        assert BeatFingerprint.from_cells(fp.cells()).code == 1 << bit

    rng = np.random.default_rng(60)
    for _ in range(10_000):
        code = int(rng.integers(0, 1 << 60, dtype=np.uint64))
        fp = BeatFingerprint(code)
        assert BeatFingerprint.from_cells(fp.cells()).code == code

    # duplicate same-class, same-bin notes leave the code unchanged
    single = beat_fingerprint(
        [NoteEvent(125, 10, 42, 100, Voice.DRUMS)], (0, 480)
    )
    double = beat_fingerprint(
        [NoteEvent(125, 10, 42, 100, Voice.DRUMS),
         NoteEvent(128, 10, 46, 40, Voice.DRUMS)],
        (0, 480),
    )
    assert single.code == double.code != 0


def _humanized_velocity(rng) -> int:
    roll = rng.random()
    if roll < 0.35:
        return 127
    if roll < 0.50:
        return 100
    return int(np.clip(rng.normal(105, 15), 1, 126))


def _humanized_corpus(rng, n_tracks=12):
    """Performed tracks plus their offline-annotated twins."""
    spec = QuantizationSpec()
    originals = []
    for _ in range(n_tracks):
        notes = []
        total = 4 * 1920
        for slot in range(0, total, PPQ // 4):
            if rng.random() > 0.55:
                continue
            onset = max(0, slot + int(rng.integers(-40, 41)))
            notes.append(NoteEvent(onset, 60, int(rng.choice((36, 38, 42, 46, 49))),
                                   _humanized_velocity(rng), Voice.DRUMS))
        if len(notes) < 2:
            notes = [NoteEvent(0, 60, 36, 127, Voice.DRUMS),
                     NoteEvent(120, 60, 38, 100, Voice.DRUMS)]
        performed = make_track_set({Voice.DRUMS: normalize_overlaps(notes)})
        originals.append(performed)
        originals.append(quantize_track_set(performed, spec))
    return originals


@criterion("4. quantized variant: on-grid intervals only, velocity support "
           "{100,127}, original strictly broader; idempotent on 1k tracks")
def test_criterion_4_quantization_ablation_signature():
    rng = np.random.default_rng(52)
    spec = QuantizationSpec()
    originals = _humanized_corpus(rng)
    quantized = [quantize_track_set(ts, spec) for ts in originals]

    q_report = distribution_report(quantized)
    o_report = distribution_report(originals)

    assert off_grid_interval_mass(q_report.onset_interval_hist, 4) == 0.0
    q_velocity = {i for i, c in enumerate(q_report.velocity_hist.counts) if c}
    assert q_velocity == {100, 127}

    o_velocity = {i for i, c in enumerate(o_report.velocity_hist.counts) if c}
    assert o_velocity > q_velocity  # strict superset
    q_support = {i for i, c in enumerate(q_report.onset_interval_hist.counts) if c}
    o_support = {i for i, c in enumerate(o_report.onset_interval_hist.counts) if c}
    assert o_support > q_support

    for seed in range(1000):
        track_rng = np.random.default_rng(100_000 + seed)
        notes = random_loop_notes(track_rng, Voice.DRUMS, 2, jitter_ticks=35,
                                  density=0.6)
        once = quantize_track_set(
            make_track_set({Voice.DRUMS: notes}), spec
        ).voices[Voice.DRUMS]
        twice = quantize_track_set(
            TrackSet.build({Voice.DRUMS: once.notes}), spec
        ).voices[Voice.DRUMS]
        assert once == twice


@criterion("5. composer: byte-identical reruns, theme chaining, usage "
           "spread <= 2, select_loop matches the distance oracle x1000")
def test_criterion_5_composer_contracts(tmp_path):
    # byte-identical corpora from the same seed, via the CLI
    specs = uniform_drum_specs(6, theme="alpha") + uniform_drum_specs(6, theme="beta")
    specs += [dict(uniform_drum_specs(1)[0], loop_id=f"piano-{i}", voice="piano")
              for i in range(3)]
    manifest = build_library(tmp_path, specs)
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / f"run-{run}"
        code = main([
            "compose", "--manifest", str(manifest), "--out", str(out),
            "--num-tracks", "6", "--duration", "30", "--voices", "2",
            "--seed", "77", "--jobs", "1",
        ])
        assert code == EXIT_OK
        tree = {}
        for path in sorted((out / "corpus").rglob("*")):
            if path.is_file():
                tree[str(path.relative_to(out))] = path.read_bytes()
        outputs.append(tree)
    assert outputs[0] == outputs[1]

    # theme chaining on every generated plan
    library = load_library(manifest)
    config = CompositionConfig(target_duration_s=45.0, num_voices=1, seed=5)
    for plan in compose_corpus(library, config, 10):
        themes = {library.loops[s.master_loop].meta.theme for s in plan.sections}
        assert len(themes) == 1

    # 32 tracks over 16 equally compatible drum loops: spread <= 2
    even_manifest = build_library(tmp_path, uniform_drum_specs(16), name="even")
    even_library = load_library(even_manifest)
    compose_corpus(even_library,
                   CompositionConfig(target_duration_s=30.0, num_voices=1, seed=13),
                   32)
    counts = list(even_library.usage_counts.values())
    assert max(counts) - min(counts) <= 2

    # selection equals the brute-force distance oracle on 1000 random cases
    case_rng = np.random.default_rng(555)
    genres = ("rock", "jazz", "funk", "edm")
    for case in range(1000):
        m = int(case_rng.integers(2, 12))
        pairs = []
        for i in range(m):
            meta = LoopMeta(
                loop_id=f"loop-{i:02d}",
                voice=Voice.DRUMS,
                theme="t",
                genre=str(case_rng.choice(genres)),
                tempo_bpm=float(case_rng.integers(70, 180)),
                time_signature=(int(case_rng.choice((3, 4))), 4),
                key_signature=(int(case_rng.integers(-3, 4)), int(case_rng.integers(0, 2))),
                length_bars=int(case_rng.choice((1, 2, 4, 8))),
                file_path=f"loop-{i:02d}.mid",
            )
            notes = [NoteEvent(0, 120, 36, 100, Voice.DRUMS)]
            pairs.append((meta, make_track_set({Voice.DRUMS: notes})))
        library = loops_from_tracksets(pairs)
        for loop_id in library.usage_counts:
            library.usage_counts[loop_id] = int(case_rng.integers(0, 5))
        constraints = SelectionConstraints(
            tempo_bpm=float(case_rng.integers(80, 160)),
            length_bars=int(case_rng.choice((2, 4))),
            genre=str(case_rng.choice(genres)),
            time_signature=(4, 4),
            key_signature=(0, 0),
        )
        weights = DistanceWeights()
        counts_before = library.snapshot_usage()
        config = CompositionConfig(seed=int(case_rng.integers(0, 2**32)))
        winner = select_loop(library, Voice.DRUMS, constraints, config,
                             SplitMix64(int(case_rng.integers(0, 2**32))))

        def oracle_distance(meta):
            d = weights.usage * counts_before[meta.loop_id]
            d += weights.tempo * abs(math.log(meta.tempo_bpm / constraints.tempo_bpm))
            d += (weights.length
                  * abs(meta.length_bars - constraints.length_bars)
                  / constraints.length_bars)
            if meta.genre != constraints.genre:
                d += weights.genre
            if meta.time_signature != constraints.time_signature:
                d += weights.meter
            if meta.key_signature != constraints.key_signature:
                d += weights.key
            return d

        distances = {
            loop.meta.loop_id: oracle_distance(loop.meta)
            for loop in library.by_voice(Voice.DRUMS)
        }
        best = min(distances.values())
        argmin = {loop_id for loop_id, d in distances.items() if d == best}
        assert winner in argmin
        assert distances[winner] == best


@criterion("6. loudness: 997 Hz sine -3.01+-0.1, -20 dB linearity, stems "
           "re-measure at -23+-0.5, no clipping, >=10x real-time")
def test_criterion_6_loudness_and_rendering(tmp_path):
    fs = 44_100
    t = np.arange(5 * fs) / fs
    sine = AudioBuffer(np.sin(2 * np.pi * 997.0 * t), fs, 1)
    full = measure_loudness(sine)
    assert full == pytest.approx(-3.01, abs=0.1)
    low = measure_loudness(sine.scaled(10 ** (-20 / 20)))
    assert low - full == pytest.approx(-20.0, abs=0.05)

    # 4-voice fixture: compose, realize, render, normalize, re-measure
    specs = uniform_drum_specs(4)
    specs += [dict(uniform_drum_specs(1)[0], loop_id=f"p{i}", voice="piano")
              for i in range(2)]
    specs += [dict(uniform_drum_specs(1)[0], loop_id=f"b{i}", voice="bass")
              for i in range(2)]
    library = load_library(build_library(tmp_path, specs))
    config = CompositionConfig(target_duration_s=20.0, num_voices=4, seed=3)
    plans = compose_corpus(library, config, 1)
    track_set = realize_midi(plans[0], library)

    backend = ReferenceBackend()
    stems = []
    for index, (voice, track) in enumerate(sorted(track_set.voices.items(),
                                                  key=lambda kv: kv[0].value)):
        stems.append(render_stem(track, f"preset-{index}", backend, tail_s=0.2))
    target = -23.0
    normalized = []
    for stem in stems:
        gain = stem_gain(stem, target)
        assert gain is not None
        scaled = stem.scaled(gain)
        remeasured = measure_loudness(scaled)
        assert remeasured is not BELOW_GATE
        assert remeasured == pytest.approx(target, abs=0.5)
        normalized.append(scaled)

    mix = normalize_and_mix(stems, target_lufs=target)
    assert mix.peak() <= 1.0

    # throughput: rendered seconds per wall second, single instrument
    rng = np.random.default_rng(9)
    notes = random_loop_notes(rng, Voice.DRUMS, 32, density=0.9)
    big = make_track_set({Voice.DRUMS: notes}).voices[Voice.DRUMS]
    backend.one_shot("preset-0", 36, fs)  # cache warm, as in a corpus run
    start = time.perf_counter()
    rendered = render_stem(big, "preset-0", backend)
    ratio = rendered.duration_s / (time.perf_counter() - start)
    assert ratio >= 10.0, f"only {ratio:.1f}x real-time"


@criterion("7. presets: 100 tracks under k=8/r=20 keep caps and tuple "
           "uniqueness; infeasible configs rejected")
def test_criterion_7_preset_assignment():
    pool = PresetPool.procedural(16, 12)
    track_ids = [f"track{i:05d}" for i in range(100)]
    assignment = assign_presets(
        track_ids, pool, truncation=TruncationConfig(k_presets=8, max_reuses=20),
        seed=20,
    )
    drum_counts: dict[str, int] = {}
    tuples = set()
    for track_id in track_ids:
        chosen = assignment.assignments[track_id]
        drum_counts[chosen[Voice.DRUMS]] = drum_counts.get(chosen[Voice.DRUMS], 0) + 1
        tuples.add(assignment.tuple_for(track_id))
    assert max(drum_counts.values()) <= 20
    assert set(drum_counts) <= {f"drum-{i:03d}" for i in range(8)}
    assert len(tuples) == 100

    with pytest.raises(ValidationError):
        assign_presets(track_ids, pool,
                       truncation=TruncationConfig(k_presets=4, max_reuses=20),
                       seed=1)


def _random_track_set(rng) -> TrackSet:
    ppq = int(rng.choice((96, 240, 480, 960)))
    tempo_entries = [(0, int(rng.integers(150_000, 1_500_000)))]
    for _ in range(int(rng.integers(0, 3))):
        tempo_entries.append(
            (int(rng.integers(1, 40_000)), int(rng.integers(150_000, 1_500_000)))
        )
    meter_entries = [(0, int(rng.integers(1, 13)), int(rng.choice((1, 2, 4, 8, 16, 32))))]
    tempo = TempoMap.from_entries(tempo_entries)
    meter = MeterMap.from_entries(meter_entries)
    notes_by_voice = {}
    n_voices = int(rng.integers(1, 5))
    for voice in list(Voice)[:n_voices]:
        notes = []
        for _ in range(int(rng.integers(1, 14))):
            notes.append(NoteEvent(
                int(rng.integers(0, 30_000)),
                int(rng.integers(1, 2_000)),
                int(rng.integers(0, 128)),
                int(rng.integers(1, 128)),
                voice,
            ))
        notes_by_voice[voice] = normalize_overlaps(notes)
    return TrackSet.build(notes_by_voice, tempo, meter, ppq)


@criterion("8. MIDI: parse(write(x)) == x on 10k random track sets; 100k "
           "fuzz inputs never crash the parser")
def test_criterion_8_midi_round_trip_and_fuzz():
    rng = np.random.default_rng(88)
    for _ in range(10_000):
        ts = _random_track_set(rng)
        assert parse_smf(write_smf(ts)) == ts

    def survives(data: bytes) -> None:
        try:
            parse_smf(data)
        except SmfParseError:
            pass

    fuzz_rng = np.random.default_rng(99)
    for _ in range(70_000):
        n = int(fuzz_rng.integers(0, 64))
        survives(fuzz_rng.integers(0, 256, size=n, dtype=np.uint8).tobytes())
    for _ in range(20_000):
        n = int(fuzz_rng.integers(0, 96))
        survives(b"MThd" + fuzz_rng.integers(0, 256, size=n, dtype=np.uint8).tobytes())
    seed_file = bytearray(write_smf(_random_track_set(np.random.default_rng(5))))
    for _ in range(10_000):
        mutated = bytearray(seed_file)
        for _ in range(int(fuzz_rng.integers(1, 6))):
            mutated[int(fuzz_rng.integers(0, len(mutated)))] = int(
                fuzz_rng.integers(0, 256)
            )
        survives(bytes(mutated))
