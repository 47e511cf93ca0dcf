"""Observation quality of target faces seen by passive optical observers.

Each quality factor is a plain function that broadcasts over numpy arrays.
``quality_tensor`` and ``agent_contribution`` evaluate all of them at once
over targets, samples and faces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .astro import EARTH, Constants, Ephemeris

FRAME_MODES = ("inertial", "lvlh")


@dataclass(frozen=True)
class SensorModel:
    aperture_d: float = 0.2                 # m
    wavelength: float = 550e-9              # m
    q_lit_min: float = 0.2
    q_dark: float = 0.05
    resolve_ref_distance: float = 400e3     # m

    def __post_init__(self):
        if not (self.aperture_d > 0 and self.wavelength > 0):
            raise ValueError("aperture diameter and wavelength must be positive")
        if not 0.0 <= self.q_lit_min <= 1.0:
            raise ValueError(f"q_lit_min must lie in [0, 1], got {self.q_lit_min}")
        if not 0.0 < self.q_dark < 1.0:
            raise ValueError(f"q_dark must lie in (0, 1), got {self.q_dark}")
        if not self.resolve_ref_distance > 0:
            raise ValueError("resolve_ref_distance must be positive")


@dataclass(frozen=True)
class FaceSet:
    """Outward unit normals of the faces of one target.

    In ``lvlh`` mode the normals are body components along
    (radial, transverse, orbit normal); ``inertial`` normals are fixed.
    """

    normals: np.ndarray
    frame_mode: str = "lvlh"

    def __post_init__(self):
        n = np.array(self.normals, dtype=float)
        if n.ndim == 1:
            n = n.reshape(1, 3)
        if n.ndim != 2 or n.shape[1] != 3 or n.shape[0] < 1:
            raise ValueError(f"normals must have shape (L, 3) with L >= 1, got {n.shape}")
        if np.any(np.abs(np.linalg.norm(n, axis=1) - 1.0) > 1e-12):
            raise ValueError("face normals must be unit vectors")
        if self.frame_mode not in FRAME_MODES:
            raise ValueError(f"frame_mode must be one of {FRAME_MODES}, got {self.frame_mode!r}")
        n.setflags(write=False)
        object.__setattr__(self, "normals", n)

    def __len__(self) -> int:
        return self.normals.shape[0]


@dataclass(frozen=True)
class QualityWeights:
    """Exponents of the factors in the combined metric."""

    resolve: float = 1.0
    los: float = 1.0
    lum: float = 1.0
    lit: float = 1.0
    view: float = 1.0


@dataclass(frozen=True)
class ObservationGeometry:
    target_pos: np.ndarray   # km
    observer_pos: np.ndarray  # km
    sun_unit: np.ndarray     # Earth -> Sun
    view_unit: np.ndarray = field(init=False)
    delta: float = field(init=False)  # m

    def __post_init__(self):
        t = np.asarray(self.target_pos, dtype=float)
        o = np.asarray(self.observer_pos, dtype=float)
        diff = o - t
        dist = float(np.linalg.norm(diff))
        if dist == 0.0:
            raise ValueError("observer and target coincide")
        object.__setattr__(self, "target_pos", t)
        object.__setattr__(self, "observer_pos", o)
        object.__setattr__(self, "sun_unit", _unit(self.sun_unit))
        object.__setattr__(self, "view_unit", diff / dist)
        object.__setattr__(self, "delta", dist * 1e3)


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


# --- individual factors ---

def rayleigh_resolve(delta, sensor: SensorModel):
    """Diffraction-limited resolving value D / (1.22 lambda delta), unbounded."""
    return sensor.aperture_d / (1.22 * sensor.wavelength * np.asarray(delta, dtype=float))


def q_resolve(delta, sensor: SensorModel):
    """Resolving value normalized by its value at the reference distance, capped at 1."""
    delta = np.asarray(delta, dtype=float)
    if np.any(delta <= 0):
        raise ValueError("range must be positive")
    return np.minimum(1.0, sensor.resolve_ref_distance / delta)


def alpha_lit(view_unit, sun_unit):
    """Angle between the view direction and the direction sunlight travels (-sun_unit)."""
    cosang = -np.sum(np.asarray(view_unit) * np.asarray(sun_unit), axis=-1)
    return np.arccos(np.clip(cosang, -1.0, 1.0))


def q_lit(alpha, q_min: float):
    alpha = np.asarray(alpha, dtype=float)
    lit = q_min + (1.0 - q_min) * np.sin(2.0 * alpha) ** 2
    return np.where(alpha < 0.5 * math.pi, lit, q_min)


def _segment_clearance(target, observer):
    """Distance from the origin to the closest point of each segment."""
    d = observer - target
    dd = np.sum(d * d, axis=-1)
    s = np.clip(-np.sum(target * d, axis=-1) / np.where(dd > 0, dd, 1.0), 0.0, 1.0)
    closest = target + s[..., None] * d
    return np.linalg.norm(closest, axis=-1)


def q_los(target, observer, c: Constants = EARTH):
    """1 when the Earth sphere does not block the segment, else 0."""
    target = np.asarray(target, dtype=float)
    observer = np.asarray(observer, dtype=float)
    if np.any(np.linalg.norm(target, axis=-1) < c.r_earth) or \
            np.any(np.linalg.norm(observer, axis=-1) < c.r_earth):
        raise ValueError("line-of-sight endpoint lies inside the Earth")
    return np.where(_segment_clearance(target, observer) < c.r_earth, 0.0, 1.0)


def q_lum(target, sun_unit, c: Constants = EARTH, q_dark: float = 0.05):
    """1 in sunlight, ``q_dark`` inside the cylindrical umbra."""
    target = np.asarray(target, dtype=float)
    sun = _unit(sun_unit)
    along = target @ sun
    perp = np.linalg.norm(target - along[..., None] * sun, axis=-1)
    shadowed = (along < 0.0) & (perp < c.r_earth)
    return np.where(shadowed, q_dark, 1.0)


def lvlh_frame(r, v) -> np.ndarray:
    """Rotation matrices (..., 3, 3) whose columns are radial, transverse, normal."""
    r = np.asarray(r, dtype=float)
    v = np.asarray(v, dtype=float)
    h = np.cross(r, v)
    hn = np.linalg.norm(h, axis=-1)
    if np.any(hn <= 1e-12 * np.linalg.norm(r, axis=-1) * np.linalg.norm(v, axis=-1)):
        raise ValueError("LVLH frame undefined for zero angular momentum")
    radial = r / np.linalg.norm(r, axis=-1)[..., None]
    normal = h / hn[..., None]
    transverse = np.cross(normal, radial)
    return np.stack([radial, transverse, normal], axis=-1)


def face_normals_inertial(faces: FaceSet, r, v) -> np.ndarray:
    """Inertial face normals, shape (L, 3) for one state or (N, L, 3) for many."""
    if faces.frame_mode == "inertial":
        r = np.asarray(r)
        if r.ndim == 1:
            return np.array(faces.normals)
        return np.broadcast_to(faces.normals, (r.shape[0],) + faces.normals.shape).copy()
    frame = lvlh_frame(r, v)
    return np.einsum("...ab,lb->...la", frame, faces.normals)


def q_view(normal, view_unit):
    return np.maximum(0.0, np.sum(np.asarray(normal) * np.asarray(view_unit), axis=-1))


def combine(resolve, los, lum, lit, view, weights: Optional[QualityWeights] = None):
    w = weights or QualityWeights()
    return (np.power(resolve, w.resolve) * np.power(los, w.los) * np.power(lum, w.lum)
            * np.power(lit, w.lit) * np.power(view, w.view))


def quality_entry(g: ObservationGeometry, normal, s: SensorModel, c: Constants = EARTH,
                  weights: Optional[QualityWeights] = None) -> float:
    return float(combine(
        q_resolve(g.delta, s),
        q_los(g.target_pos, g.observer_pos, c),
        q_lum(g.target_pos, g.sun_unit, c, s.q_dark),
        q_lit(alpha_lit(g.view_unit, g.sun_unit), s.q_lit_min),
        q_view(normal, g.view_unit),
        weights,
    ))


# --- batched evaluation ---

@dataclass(frozen=True)
class TargetField:
    """Precomputed per-target quantities that do not depend on the observers.

    positions: (n, N, 3) km; normals: (n, N, L, 3); shadowed: (n, N) bool.
    """

    positions: np.ndarray
    normals: np.ndarray
    shadowed: np.ndarray
    sun_unit: np.ndarray

    @property
    def shape(self) -> tuple[int, int, int]:
        n, N, L, _ = self.normals.shape
        return n, N, L


def prepare_targets(targets: Sequence[Ephemeris], faces: Sequence[FaceSet], sun_unit,
                    c: Constants = EARTH) -> TargetField:
    if len(targets) != len(faces) or not targets:
        raise ValueError("need one FaceSet per target and at least one target")
    grid = targets[0].grid
    if any(t.grid != grid for t in targets):
        raise ValueError("all target ephemerides must share one time grid")
    n_faces = {len(f) for f in faces}
    if len(n_faces) != 1:
        raise ValueError(f"all targets must carry the same number of faces, got {sorted(n_faces)}")
    sun = _unit(sun_unit)
    positions = np.stack([t.positions for t in targets])
    normals = np.stack([face_normals_inertial(f, t.positions, t.velocities)
                        for f, t in zip(faces, targets)])
    along = positions @ sun
    perp = np.linalg.norm(positions - along[..., None] * sun, axis=-1)
    shadowed = (along < 0.0) & (perp < c.r_earth)
    return TargetField(positions, normals, shadowed, sun)


def agent_quality(field_: TargetField, observer_pos, sensor: SensorModel,
                  c: Constants = EARTH, weights: Optional[QualityWeights] = None) -> np.ndarray:
    """Quality of every (target, sample, face) seen from one observer track, (n, N, L).

    ``observer_pos`` is (N, 3) aligned with the target samples. A coincident
    observer and target yield quality 0.
    """
    obs = np.asarray(observer_pos, dtype=float)
    diff = obs[None, :, :] - field_.positions
    dist = np.linalg.norm(diff, axis=-1)
    safe = np.where(dist > 0.0, dist, 1.0)
    view = diff / safe[..., None]
    resolve = np.minimum(1.0, sensor.resolve_ref_distance / (safe * 1e3))
    los = _segment_clearance(field_.positions, obs[None, :, :]) >= c.r_earth
    lum = np.where(field_.shadowed, sensor.q_dark, 1.0)
    lit = q_lit(alpha_lit(view, field_.sun_unit), sensor.q_lit_min)
    ndotv = np.einsum("inlc,inc->inl", field_.normals, view)
    viewq = np.maximum(0.0, ndotv)
    scalar = combine(resolve, los.astype(float), lum, lit, 1.0, weights)
    if weights is not None and weights.view != 1.0:
        viewq = np.power(viewq, weights.view)
    q = scalar[..., None] * viewq
    q[dist == 0.0] = 0.0
    return q


def agent_contribution(field_: TargetField, observer_pos, sensor: SensorModel,
                       c: Constants = EARTH, weights: Optional[QualityWeights] = None) -> np.ndarray:
    """One observer's share of the cumulative quality matrix, (n, L)."""
    return agent_quality(field_, observer_pos, sensor, c, weights).sum(axis=1)


@dataclass(frozen=True)
class QualityTensor:
    """Quality entries indexed (target i, agent j, sample k, face l)."""

    values: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.values, dtype=float)
        if q.ndim != 4:
            raise ValueError(f"quality tensor must be 4-D, got shape {q.shape}")
        if not np.all(np.isfinite(q)) or np.any(q < 0.0) or np.any(q > 1.0):
            raise ValueError("quality entries must be finite and lie in [0, 1]")
        object.__setattr__(self, "values", q)

    @property
    def shape(self):
        return self.values.shape

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\r\n")
            writer.writerow(["i", "j", "k", "l", "q"])
            for idx, q in np.ndenumerate(self.values):
                writer.writerow([*idx, format(float(q), ".17g")])


def quality_tensor(targets: Sequence[Ephemeris], faces: Sequence[FaceSet],
                   agents: Sequence[Ephemeris], sensors: Sequence[SensorModel], sun_unit,
                   c: Constants = EARTH, weights: Optional[QualityWeights] = None) -> QualityTensor:
    if len(agents) != len(sensors) or not agents:
        raise ValueError("need one SensorModel per agent and at least one agent")
    grid = targets[0].grid if targets else None
    if any(a.grid != grid for a in agents):
        raise ValueError("agent and target ephemerides must share one time grid")
    field_ = prepare_targets(targets, faces, sun_unit, c)
    slices = [agent_quality(field_, a.positions, s, c, weights) for a, s in zip(agents, sensors)]
    return QualityTensor(np.stack(slices, axis=1))


def j_sum(q: QualityTensor) -> np.ndarray:
    """Cumulative quality matrix (n, L): sum over agents and samples."""
    values = q.values if isinstance(q, QualityTensor) else np.asarray(q)
    return values.sum(axis=(1, 2))


def quality_field(target_pos, target_vel, faces: Sequence[FaceSet], sensor: SensorModel,
                  sun_unit, points, c: Constants = EARTH,
                  weights: Optional[QualityWeights] = None) -> np.ndarray:
    """Field value at each point treated as a virtual observer: sum over targets of best-face quality.

    ``target_pos``/``target_vel`` are (n, 3) states at one sample. Points within
    the Earth sphere come back as NaN.
    """
    target_pos = np.asarray(target_pos, dtype=float).reshape(-1, 3)
    target_vel = np.asarray(target_vel, dtype=float).reshape(-1, 3)
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    sun = _unit(sun_unit)
    inside = np.linalg.norm(points, axis=1) < c.r_earth
    outside = points[~inside]
    total = np.zeros(len(outside))
    for r, v, f in zip(target_pos, target_vel, faces):
        normals = face_normals_inertial(f, r, v)
        diff = outside - r
        dist = np.linalg.norm(diff, axis=1)
        safe = np.where(dist > 0.0, dist, 1.0)
        view = diff / safe[:, None]
        resolve = np.minimum(1.0, sensor.resolve_ref_distance / (safe * 1e3))
        los = (_segment_clearance(np.broadcast_to(r, outside.shape), outside) >= c.r_earth)
        lum = q_lum(r, sun, c, sensor.q_dark)
        lit = q_lit(alpha_lit(view, sun), sensor.q_lit_min)
        viewq = q_view(normals[None, :, :], view[:, None, :])
        q = combine(resolve, los.astype(float), lum, lit, 1.0, weights)[:, None]
        q = q * (np.power(viewq, weights.view) if weights is not None else viewq)
        q[dist == 0.0] = 0.0
        total += q.max(axis=1)
    out = np.full(len(points), np.nan)
    out[~inside] = total
    return out
