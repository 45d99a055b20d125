"""
Angle helpers for the x-z plane.

Yaw 0 faces +z and positive yaw turns toward +x, so the forward vector
for a yaw of a degrees is (sin a, cos a).
"""
import math

import numpy as np


def wrap_angle(angle: float) -> float:
    """Wrap degrees into [-180, 180)."""
    return (angle + 180.0) % 360.0 - 180.0


def wrap_angles(angles: np.ndarray) -> np.ndarray:
    return (np.asarray(angles, dtype=float) + 180.0) % 360.0 - 180.0


def bearing(px: float, pz: float, tx: float, tz: float) -> float:
    """Yaw (deg) that faces (tx, tz) from (px, pz)."""
    return math.degrees(math.atan2(tx - px, tz - pz))


def bearings(x: np.ndarray, z: np.ndarray, tx: float, tz: float) -> np.ndarray:
    return np.degrees(np.arctan2(tx - np.asarray(x, dtype=float), tz - np.asarray(z, dtype=float)))
