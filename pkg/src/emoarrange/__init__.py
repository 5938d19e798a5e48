"""Real-time emotion-driven symbolic music arrangement engine.

Per 4-bar timestep the engine recognizes the emotion of the previously
emitted segment, fuses it with the current target emotion, and regenerates
melody detail plus harmony from a downsampled skeleton of the original
melody. Ships with the full objective metric suite (consonance, chord
entropy, tonal-centroid coherence, similarity, real-time fit).
"""

from emoarrange.core import (
    HOLD,
    REST,
    Chord,
    EmotionVA,
    MalformedGridError,
    Note,
    PolyphonyError,
    Segment,
    Token,
    Tonality,
    decode_melody,
    encode_melody,
    scale_pitch_classes,
)

__version__ = "0.1.0"

__all__ = [
    "Chord",
    "EmotionVA",
    "HOLD",
    "MalformedGridError",
    "Note",
    "PolyphonyError",
    "REST",
    "Segment",
    "Token",
    "Tonality",
    "decode_melody",
    "encode_melody",
    "scale_pitch_classes",
    "__version__",
]
