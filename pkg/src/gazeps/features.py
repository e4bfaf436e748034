"""Gaze-stream feature extraction.

Converts raw unit gaze directions into the fixed-length angular-velocity
windows consumed by the autoencoder. Units are degrees, degrees/second and
milliseconds throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateTimingError, InvalidInputError, WindowUnavailableError

WINDOW_SAMPLES = 37  # gaze vectors per selection window
WINDOW_VALUES = WINDOW_SAMPLES - 1  # velocities per window
POST_SELECTION_MS = 200.0  # window ends at the first sample at/after this offset

UNIT_NORM_TOL = 1e-6


class Method(Enum):
    """Gaze-based selection method tag."""

    DWELL_TIME = "dwell"
    GAZE_AND_HEAD = "gaze_head"
    NOD = "nod"

    @classmethod
    def parse(cls, name: str) -> "Method":
        for m in cls:
            if m.value == name:
                return m
        raise InvalidInputError(f"unknown method {name!r}")


@dataclass(frozen=True)
class GazeSample:
    """One timestamped gaze (and optional head) direction, unit length."""

    t_ms: float
    gaze: np.ndarray
    head: Optional[np.ndarray] = None

    def __post_init__(self):
        g = np.asarray(self.gaze, dtype=float)
        object.__setattr__(self, "gaze", g)
        _check_unit(g, "gaze")
        if self.head is not None:
            h = np.asarray(self.head, dtype=float)
            object.__setattr__(self, "head", h)
            _check_unit(h, "head")


@dataclass(frozen=True)
class SelectionEvent:
    """A selection trigger with optional ground-truth label."""

    t_ms: float
    method: Method
    target_id: int
    label: Optional[str] = None  # "correct" | "incorrect" | None


@dataclass
class Recording:
    """Column-wise gaze recording: timestamps, directions and selection events.

    Timestamps must strictly increase. ``head`` may be None when no head
    stream was captured.
    """

    t_ms: np.ndarray
    gaze: np.ndarray
    head: Optional[np.ndarray] = None
    events: list[SelectionEvent] = field(default_factory=list)

    def __post_init__(self):
        self.t_ms = np.asarray(self.t_ms, dtype=float)
        self.gaze = np.asarray(self.gaze, dtype=float)
        if self.head is not None:
            self.head = np.asarray(self.head, dtype=float)
        if self.gaze.shape != (len(self.t_ms), 3):
            raise InvalidInputError("gaze array must be [n, 3]")
        if len(self.t_ms) > 1 and not np.all(np.diff(self.t_ms) > 0):
            raise InvalidInputError("timestamps must strictly increase")

    def __len__(self) -> int:
        return len(self.t_ms)

    def sample(self, i: int) -> GazeSample:
        head = None if self.head is None else self.head[i]
        return GazeSample(float(self.t_ms[i]), self.gaze[i], head)


@dataclass(frozen=True)
class AngleSeries:
    """Angular distances in degrees between consecutive window samples."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if np.any(~np.isfinite(v)) or np.any(v < 0.0) or np.any(v > 180.0):
            raise InvalidInputError("angular distances must be finite and in [0, 180]")


@dataclass(frozen=True)
class VelocityWindow:
    """The 36 angular velocities (deg/s) around one selection event."""

    values: np.ndarray
    method: Optional[Method] = None
    label: Optional[str] = None
    selection_t_ms: Optional[float] = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.shape != (WINDOW_VALUES,):
            raise InvalidInputError(
                f"velocity window must hold exactly {WINDOW_VALUES} values, got {v.shape}"
            )
        if np.any(~np.isfinite(v)) or np.any(v < 0.0):
            raise InvalidInputError("velocities must be finite and non-negative")


def _check_unit(vec: np.ndarray, name: str) -> None:
    if vec.shape != (3,):
        raise InvalidInputError(f"{name} must be a 3-vector")
    if not np.all(np.isfinite(vec)):
        raise InvalidInputError(f"{name} has non-finite components")
    n = float(np.linalg.norm(vec))
    if abs(n - 1.0) > UNIT_NORM_TOL:
        raise InvalidInputError(f"{name} must be unit length, |v| = {n:.9f}")


def angular_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Angle in degrees between two unit 3-vectors.

    The dot product is clamped to [-1, 1]; floating-point noise on
    near-parallel inputs otherwise lands outside arccos's domain.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_unit(u, "u")
    _check_unit(v, "v")
    d = float(np.clip(np.dot(u, v), -1.0, 1.0))
    return float(np.degrees(np.arccos(d)))


def angular_distances(gaze: np.ndarray) -> np.ndarray:
    """Consecutive angular distances (degrees) along a [n, 3] unit-vector path."""
    gaze = np.asarray(gaze, dtype=float)
    if gaze.ndim != 2 or gaze.shape[1] != 3:
        raise InvalidInputError("expected an [n, 3] array of gaze vectors")
    if not np.all(np.isfinite(gaze)):
        raise InvalidInputError("gaze vectors have non-finite components")
    norms = np.linalg.norm(gaze, axis=1)
    if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
        raise InvalidInputError("gaze vectors must be unit length")
    dots = np.clip(np.einsum("ij,ij->i", gaze[:-1], gaze[1:]), -1.0, 1.0)
    return np.degrees(np.arccos(dots))


def angle_series(gaze: np.ndarray) -> AngleSeries:
    """AngleSeries over exactly 37 gaze vectors."""
    gaze = np.asarray(gaze, dtype=float)
    if gaze.shape != (WINDOW_SAMPLES, 3):
        raise InvalidInputError(f"expected {WINDOW_SAMPLES} gaze vectors")
    return AngleSeries(angular_distances(gaze))


def angular_velocity_series(t_ms: np.ndarray, gaze: np.ndarray) -> np.ndarray:
    """36 angular velocities (deg/s) over 37 timestamped gaze vectors.

    Each velocity is the inter-sample angle divided by the actual gap in
    seconds, so dropped frames widen the divisor instead of inflating the
    apparent speed.
    """
    t_ms = np.asarray(t_ms, dtype=float)
    if t_ms.shape != (WINDOW_SAMPLES,):
        raise InvalidInputError(f"expected {WINDOW_SAMPLES} samples, got {t_ms.shape}")
    gaps_ms = np.diff(t_ms)
    if np.any(gaps_ms == 0.0):
        raise DegenerateTimingError("duplicate timestamps in window")
    if np.any(gaps_ms < 0.0):
        raise DegenerateTimingError("timestamps must strictly increase")
    angles = angular_distances(np.asarray(gaze, dtype=float).reshape(WINDOW_SAMPLES, 3))
    return angles / (gaps_ms * 1e-3)


def window_slice(t_ms: np.ndarray, selection_t_ms: float) -> slice:
    """Index range of the 37-sample window for a selection event.

    The last window sample is the first one at or after selection + 200 ms;
    the window is the 37 samples ending there.
    """
    t_ms = np.asarray(t_ms, dtype=float)
    deadline = selection_t_ms + POST_SELECTION_MS
    cut = int(np.searchsorted(t_ms, deadline, side="left"))
    if cut >= len(t_ms):
        raise WindowUnavailableError(
            f"no sample at or after selection + {POST_SELECTION_MS:g} ms"
        )
    if cut < WINDOW_SAMPLES - 1:
        raise WindowUnavailableError(
            f"only {cut + 1} samples available before the window cut, need {WINDOW_SAMPLES}"
        )
    return slice(cut - (WINDOW_SAMPLES - 1), cut + 1)


def extract_window(
    recording: Recording,
    selection_t_ms: float,
    method: Optional[Method] = None,
    label: Optional[str] = None,
) -> VelocityWindow:
    """Velocity window around a selection event in a recording.

    Raises WindowUnavailableError when fewer than 37 samples precede the
    cut or the recording ends before selection + 200 ms; callers must then
    treat the selection as unclassifiable.
    """
    sl = window_slice(recording.t_ms, selection_t_ms)
    values = angular_velocity_series(recording.t_ms[sl], recording.gaze[sl])
    return VelocityWindow(values, method=method, label=label, selection_t_ms=selection_t_ms)


def windows_from_recording(
    recording: Recording,
    method: Optional[Method] = None,
    label: Optional[str] = None,
    skip_unavailable: bool = True,
) -> list[VelocityWindow]:
    """Extract windows for every selection event, filtered by method/label."""
    out = []
    for ev in recording.events:
        if method is not None and ev.method is not method:
            continue
        if label is not None and ev.label != label:
            continue
        try:
            out.append(extract_window(recording, ev.t_ms, method=ev.method, label=ev.label))
        except WindowUnavailableError:
            if not skip_unavailable:
                raise
    return out
