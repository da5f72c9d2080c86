"""Synthetic range scanner: partial-view, noisy point clouds with dropouts."""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ScanFrame:
    cloud: np.ndarray
    t: float = 0.0
    valid: bool = True

    def __post_init__(self):
        cloud = np.asarray(self.cloud, dtype=float).reshape(-1, 3)
        if not self.valid:
            cloud = np.empty((0, 3))
        object.__setattr__(self, "cloud", cloud)


@dataclass(frozen=True)
class FaultSchedule:
    """Blackout windows ``[start, end)`` in seconds, sorted and disjoint."""

    windows: tuple = field(default_factory=tuple)

    def __post_init__(self):
        wins = tuple((float(a), float(b)) for a, b in self.windows)
        for a, b in wins:
            if not b > a:
                raise ValueError(f"blackout window ({a}, {b}) has non-positive length")
        for (a0, b0), (a1, b1) in zip(wins, wins[1:]):
            if a1 < b0:
                raise ValueError("blackout windows must be sorted and non-overlapping")
        object.__setattr__(self, "windows", wins)

    def blocked(self, t):
        return any(a <= t < b for a, b in self.windows)


def visible_mask(model, pose, view_dir):
    """Model points whose centroid-radial direction faces the sensor."""
    normals = (model.points - model.centroid) @ pose.matrix.T
    return normals @ np.asarray(view_dir, dtype=float) < 0.0


def sample_scan(model, true_pose, m, sigma, seed, view_dir=None, t=0.0):
    """Draw ``m`` visible model points, move them to ``true_pose``, add noise.

    ``view_dir`` points from the sensor toward the scene in sensor
    coordinates; ``None`` disables culling. When fewer than ``m`` points are
    visible the draw uses the whole model.
    """
    if len(model) < 3:
        raise ValueError("model must have at least 3 points")
    if m < 3:
        raise ValueError("a scan needs at least 3 points")
    rng = np.random.default_rng(seed)
    if view_dir is None:
        pool = np.arange(len(model))
    else:
        pool = np.flatnonzero(visible_mask(model, true_pose, view_dir))
        if len(pool) < m:
            pool = np.arange(len(model))
    pick = rng.choice(pool, size=m, replace=len(pool) < m)
    cloud = true_pose.apply(model.points[np.sort(pick)])
    if sigma > 0.0:
        cloud = cloud + rng.normal(scale=sigma, size=cloud.shape)
    return ScanFrame(cloud, t=t, valid=True)


def apply_faults(t, frame, sched):
    if sched is not None and sched.blocked(t):
        return ScanFrame(np.empty((0, 3)), t=frame.t, valid=False)
    return frame
