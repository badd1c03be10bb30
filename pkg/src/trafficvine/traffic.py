"""Per-car-per-frame parameter extraction from rounD-style trajectory CSVs.

Derives four quantities for every car-class track and frame: speed (VelCar),
the number of vehicles within a radius (TrafficCar), cumulative standstill
seconds (WaitTime), and the minimal center distance to another vehicle
(DistCar).  Rows without any other vehicle in the frame are dropped because
their minimal distance is undefined.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

FPS = 25  # recording frame rate

#: motorized classes counted as neighbors for density/distance (VRUs excluded)
DEFAULT_VEHICLE_CLASSES = ("car", "truck", "van", "bus", "trailer", "motorcycle")

OUTPUT_HEADER = "recordingId,trackId,frame,VelCar,TrafficCar,WaitTime,DistCar"

_COLUMN_ALIASES = {
    "trackId": ("trackId", "track_id", "id"),
    "frame": ("frame",),
    "x": ("xCenter", "x", "x_center"),
    "y": ("yCenter", "y", "y_center"),
    "vx": ("xVelocity", "vx", "x_velocity"),
    "vy": ("yVelocity", "vy", "y_velocity"),
    "recordingId": ("recordingId", "recording_id"),
    "class": ("class", "cls", "label"),
}


class RecordingError(ValueError):
    """A recording file failed to parse or violates track invariants."""


class GeometryError(ValueError):
    """The roundabout geometry config is missing or malformed."""


@dataclass(frozen=True)
class RoundaboutGeometry:
    """Entry circle of the roundabout: center coordinates and radius, meters."""

    center_x: float
    center_y: float
    entry_radius: float

    @classmethod
    def from_json(cls, path) -> "RoundaboutGeometry":
        path = Path(path)
        if not path.exists():
            raise GeometryError(f"geometry config not found: {path}")
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise GeometryError(f"{path}: invalid JSON ({exc})") from None
        try:
            cx, cy = (float(v) for v in obj["center"])
            radius = float(obj["entryRadius"])
        except (KeyError, TypeError, ValueError):
            raise GeometryError(
                f"{path}: expected {{\"center\": [x, y], \"entryRadius\": r}}"
            ) from None
        if radius <= 0:
            raise GeometryError(f"{path}: entryRadius must be positive")
        return cls(cx, cy, radius)


@dataclass(frozen=True)
class ExtractConfig:
    geometry: RoundaboutGeometry
    radius: float = 10.0                 # neighbor-count radius, inclusive
    standstill_speed: float = 0.1        # m/s
    standstill_min_frames: int = 3
    vehicle_classes: tuple[str, ...] = DEFAULT_VEHICLE_CLASSES
    subject_class: str = "car"
    waittime_mode: str = "running"       # "running" | "track-total"
    fps: int = FPS

    def __post_init__(self):
        if self.waittime_mode not in ("running", "track-total"):
            raise ValueError("waittime_mode must be 'running' or 'track-total'")


@dataclass
class Track:
    """One road user's trajectory; frames are contiguous and increasing."""

    recording_id: str
    track_id: int
    cls: str
    frames: np.ndarray
    x: np.ndarray
    y: np.ndarray
    speed: np.ndarray


def _find_column(columns, key, required=True, path=""):
    for alias in _COLUMN_ALIASES[key]:
        if alias in columns:
            return alias
    if required:
        raise RecordingError(f"{path}: missing required column '{_COLUMN_ALIASES[key][0]}'")
    return None


def _speed_from_positions(x: np.ndarray, y: np.ndarray, fps: int) -> np.ndarray:
    # central differences inside, one-sided at the ends (np.gradient), per frame
    if x.size == 1:
        return np.zeros(1)
    return np.hypot(np.gradient(x), np.gradient(y)) * fps


def load_recording(path, meta_path=None, fps: int = FPS) -> list[Track]:
    """Read a rounD-style tracks CSV into per-track records.

    Speed uses the velocity columns when present, otherwise the finite
    difference of positions times the frame rate.  Vehicle classes come from
    the optional tracksMeta CSV, from a class column in the tracks file, or
    default to "car".
    """
    import pandas as pd

    path = Path(path)
    try:
        head = pd.read_csv(path, nrows=0)
        rec_col = _find_column(list(head.columns), "recordingId", required=False)
        # recording ids stay strings so values like "00" survive the parse
        frame = pd.read_csv(path, dtype={rec_col: str} if rec_col else None)
    except FileNotFoundError:
        raise RecordingError(f"recording not found: {path}") from None
    except RecordingError:
        raise
    except Exception as exc:  # pandas raises several parser error types
        raise RecordingError(f"{path}: parse error: {exc}") from None

    cols = list(frame.columns)
    c_track = _find_column(cols, "trackId", path=path)
    c_frame = _find_column(cols, "frame", path=path)
    c_x = _find_column(cols, "x", path=path)
    c_y = _find_column(cols, "y", path=path)
    c_vx = _find_column(cols, "vx", required=False)
    c_vy = _find_column(cols, "vy", required=False)
    c_rec = _find_column(cols, "recordingId", required=False)
    c_cls = _find_column(cols, "class", required=False)

    classes: dict[int, str] = {}
    if meta_path is not None:
        meta = pd.read_csv(meta_path)
        m_track = _find_column(list(meta.columns), "trackId", path=meta_path)
        m_cls = _find_column(list(meta.columns), "class", path=meta_path)
        classes = dict(zip(meta[m_track].astype(int), meta[m_cls].astype(str)))

    rec_default = path.stem.replace("_tracks", "")
    tracks: list[Track] = []
    for track_id, grp in frame.groupby(c_track, sort=True):
        grp = grp.sort_values(c_frame, kind="mergesort")
        frames = grp[c_frame].to_numpy(dtype=int)
        if frames.size > 1:
            diffs = np.diff(frames)
            if np.any(diffs <= 0):
                raise RecordingError(
                    f"{path}: track {track_id} has non-increasing frames"
                )
            if np.any(diffs != 1):
                raise RecordingError(
                    f"{path}: track {track_id} has a frame gap (frames must be contiguous)"
                )
        x = grp[c_x].to_numpy(dtype=float)
        y = grp[c_y].to_numpy(dtype=float)
        if c_vx is not None and c_vy is not None:
            speed = np.hypot(
                grp[c_vx].to_numpy(dtype=float), grp[c_vy].to_numpy(dtype=float)
            )
        else:
            speed = _speed_from_positions(x, y, fps)
        if np.any(speed < 0):
            raise RecordingError(f"{path}: track {track_id} has negative speed")
        rec_id = str(grp[c_rec].iloc[0]) if c_rec is not None else rec_default
        if classes:
            cls = classes.get(int(track_id), "car")
        elif c_cls is not None:
            cls = str(grp[c_cls].iloc[0])
        else:
            cls = "car"
        tracks.append(Track(rec_id, int(track_id), cls, frames, x, y, speed))
    return tracks


def _vehicle_mask(classes, vehicle_classes) -> np.ndarray:
    if isinstance(classes, np.ndarray) and classes.dtype == bool:
        return classes
    return np.asarray([c in vehicle_classes for c in classes])


def traffic_density(x, y, classes, radius: float = 10.0,
                    vehicle_classes=DEFAULT_VEHICLE_CLASSES) -> np.ndarray:
    """Neighbor counts for one frame: per record, how many OTHER vehicle-class
    records lie within ``radius`` (inclusive) of it.

    ``classes`` is a sequence of class labels, or a precomputed boolean
    is-vehicle mask.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    is_vehicle = _vehicle_mask(classes, vehicle_classes)
    dx = x[:, None] - x[None, :]
    dy = y[:, None] - y[None, :]
    dist = np.hypot(dx, dy)
    within = (dist <= radius) & is_vehicle[None, :]
    np.fill_diagonal(within, False)
    return within.sum(axis=1)


def min_distance(x, y, classes, vehicle_classes=DEFAULT_VEHICLE_CLASSES) -> np.ndarray:
    """Minimal center distance to any other vehicle in the frame; infinity when
    no other vehicle exists (callers drop such rows)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    is_vehicle = _vehicle_mask(classes, vehicle_classes)
    dist = np.hypot(x[:, None] - x[None, :], y[:, None] - y[None, :])
    dist[:, ~is_vehicle] = np.inf
    np.fill_diagonal(dist, np.inf)
    return dist.min(axis=1)


def wait_time(track: Track, geometry: RoundaboutGeometry,
              threshold: float = 0.1, min_frames: int = 3, fps: int = FPS) -> np.ndarray:
    """Cumulative standstill seconds per frame of one track.

    A standstill is a run of at least ``min_frames`` consecutive frames with
    speed below ``threshold``; every frame of a qualifying run counts (1/fps
    seconds each) and the value at a frame is the running total so far.
    Accrual covers time before entering the roundabout and inside it, and
    stops permanently once the track has exited the entry circle (was inside
    at an earlier frame, now outside); tracks that never enter keep accruing.
    """
    n = track.frames.size
    below = track.speed < threshold

    inside = (
        np.hypot(track.x - geometry.center_x, track.y - geometry.center_y)
        <= geometry.entry_radius
    )
    entered = np.maximum.accumulate(inside)
    has_exited = np.maximum.accumulate(entered & ~inside)
    eligible = below & ~has_exited

    counted = np.zeros(n, dtype=bool)
    run_start = None
    for i in range(n + 1):
        active = i < n and eligible[i]
        if active and run_start is None:
            run_start = i
        elif not active and run_start is not None:
            if i - run_start >= min_frames:
                counted[run_start:i] = True
            run_start = None
    return np.cumsum(counted) / float(fps)


@dataclass
class ExtractResult:
    rows: list[tuple]            # (recordingId, trackId, frame, vel, density, wait, dist)
    errors: list[tuple[str, str]] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.rows)

    def values(self) -> np.ndarray:
        return np.array([[r[3], r[4], r[5], r[6]] for r in self.rows], dtype=float)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(OUTPUT_HEADER + "\n")
            for rec, track, frame, vel, dens, wait, dist in self.rows:
                fh.write(
                    f"{rec},{track},{frame},{vel!r},{dens},{wait!r},{dist!r}\n"
                )


def extract_recording(tracks: list[Track], config: ExtractConfig) -> list[tuple]:
    """Join the four per-frame parameters for car-class tracks of one recording."""
    wait_arrays: dict[int, np.ndarray] = {}
    for tr in tracks:
        w = wait_time(
            tr,
            config.geometry,
            threshold=config.standstill_speed,
            min_frames=config.standstill_min_frames,
            fps=config.fps,
        )
        if config.waittime_mode == "track-total":
            w = np.full_like(w, w[-1] if w.size else 0.0)
        wait_arrays[tr.track_id] = w

    # flat per-row view over all tracks, frame statistics filled frame by frame
    if not tracks:
        return []
    all_frames = np.concatenate([tr.frames for tr in tracks])
    if all_frames.size == 0:
        return []
    x_all = np.concatenate([tr.x for tr in tracks])
    y_all = np.concatenate([tr.y for tr in tracks])
    veh_all = np.concatenate(
        [np.full(tr.frames.size, tr.cls in config.vehicle_classes) for tr in tracks]
    )
    order = np.argsort(all_frames, kind="mergesort")
    sorted_frames = all_frames[order]
    boundaries = np.concatenate(
        ([0], np.nonzero(np.diff(sorted_frames))[0] + 1, [sorted_frames.size])
    )
    dens_flat = np.zeros(all_frames.size, dtype=int)
    dist_flat = np.full(all_frames.size, np.inf)
    for s, e in zip(boundaries[:-1], boundaries[1:]):
        idx = order[s:e]
        veh = veh_all[idx]
        dens_flat[idx] = traffic_density(
            x_all[idx], y_all[idx], veh, config.radius, config.vehicle_classes
        )
        dist_flat[idx] = min_distance(
            x_all[idx], y_all[idx], veh, config.vehicle_classes
        )

    rows = []
    start = 0
    for tr in tracks:
        n = tr.frames.size
        if tr.cls == config.subject_class:
            dens_tr = dens_flat[start : start + n]
            dist_tr = dist_flat[start : start + n]
            wait_tr = wait_arrays[tr.track_id]
            for j, frame in enumerate(tr.frames.tolist()):
                dist = dist_tr[j]
                if not math.isfinite(dist):
                    continue  # no other vehicle in the frame: DistCar undefined
                rows.append(
                    (
                        tr.recording_id,
                        tr.track_id,
                        frame,
                        float(tr.speed[j]),
                        int(dens_tr[j]),
                        float(wait_tr[j]),
                        float(dist),
                    )
                )
        start += n
    rows.sort(key=lambda r: (str(r[0]), r[1], r[2]))
    return rows


def extract(paths, config: ExtractConfig, meta_paths=None) -> ExtractResult:
    """Extract parameter samples from one or more recordings.

    Recording-level failures are collected and reported; the remaining
    recordings still contribute.  Row order is (recordingId, trackId, frame).
    """
    paths = [Path(p) for p in paths]
    if meta_paths is None:
        meta_paths = [_guess_meta(p) for p in paths]
    all_rows: list[tuple] = []
    errors: list[tuple[str, str]] = []
    for path, meta in zip(paths, meta_paths):
        try:
            tracks = load_recording(path, meta_path=meta, fps=config.fps)
            all_rows.extend(extract_recording(tracks, config))
        except (RecordingError, OSError) as exc:
            log.warning("skipping %s: %s", path, exc)
            errors.append((str(path), str(exc)))
    all_rows.sort(key=lambda r: (str(r[0]), r[1], r[2]))
    return ExtractResult(all_rows, errors)


def _guess_meta(path: Path):
    name = path.name
    if name.endswith("_tracks.csv"):
        cand = path.with_name(name.replace("_tracks.csv", "_tracksMeta.csv"))
        if cand.exists():
            return cand
    return None
