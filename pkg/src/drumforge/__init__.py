"""drumforge: loop-based synthetic dataset forge for drum transcription.

Composes multi-voice MIDI tracks from loop libraries, renders them to
loudness-normalized audio stems, computes dataset distribution and
beat-coverage statistics, and fits learning curves to measured losses to
extract each training set's loss floor.
"""

__version__ = "0.1.0"

from .analytics import (
    BeatFingerprint,
    CoverageResult,
    DistributionReport,
    beat_fingerprint,
    coverage,
    distribution_report,
    fingerprint_dataset,
    onset_intervals,
)
from .composer import (
    CompositionConfig,
    SectionPlan,
    TrackPlan,
    compose_corpus,
    compose_track,
    realize_midi,
    select_loop,
)
from .errors import ForgeError, ValidationError
from .library import (
    DistanceWeights,
    LoopLibrary,
    LoopMeta,
    SelectionConstraints,
    candidates,
    load_library,
)
from .midi import (
    MeterMap,
    NoteEvent,
    TempoMap,
    TrackSet,
    Voice,
    VoiceTrack,
    parse_smf,
    ticks_to_seconds,
    write_smf,
)
from .presets import PresetPool, TruncationConfig, assign_presets
from .quantize import DrumClass, QuantizationSpec, map_class, quantize_performance
from .scaling import (
    LearningCurveFit,
    LearningCurvePoint,
    Split,
    compare_gaps,
    fit_learning_curve,
    predict_loss,
)

__all__ = [
    "__version__",
    "BeatFingerprint", "CoverageResult", "DistributionReport",
    "beat_fingerprint", "coverage", "distribution_report",
    "fingerprint_dataset", "onset_intervals",
    "CompositionConfig", "SectionPlan", "TrackPlan",
    "compose_corpus", "compose_track", "realize_midi", "select_loop",
    "ForgeError", "ValidationError",
    "DistanceWeights", "LoopLibrary", "LoopMeta", "SelectionConstraints",
    "candidates", "load_library",
    "MeterMap", "NoteEvent", "TempoMap", "TrackSet", "Voice", "VoiceTrack",
    "parse_smf", "ticks_to_seconds", "write_smf",
    "PresetPool", "TruncationConfig", "assign_presets",
    "DrumClass", "QuantizationSpec", "map_class", "quantize_performance",
    "LearningCurveFit", "LearningCurvePoint", "Split",
    "compare_gaps", "fit_learning_curve", "predict_loss",
]
