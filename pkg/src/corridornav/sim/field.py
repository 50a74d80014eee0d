"""Synthetic indoor magnetic field and device-frame sensor readings.

The world field is a uniform base vector plus smooth local anomalies
(Gaussian bumps, as steel doors or cabinets would produce) plus optional
linear ramps, which make parallel corridors magnetically distinct. The
device measures the field and gravity in its own frame, derived from
the world frame by the walker's yaw and a fixed handheld tilt.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GRAVITY = 9.81


@dataclass(frozen=True)
class FieldBump:
    center: tuple[float, float]
    amplitude: tuple[float, float, float]   # microtesla, world frame
    sigma_m: float


@dataclass(frozen=True)
class FieldRamp:
    """Linear field change along a direction, e.g. across corridors."""
    origin: tuple[float, float]
    direction: tuple[float, float]          # unit vector in the floor plane
    slope: tuple[float, float, float]       # microtesla per meter, per axis


@dataclass
class MagneticFieldModel:
    base: tuple[float, float, float] = (22.0, 5.0, -43.0)
    bumps: list[FieldBump] = field(default_factory=list)
    ramps: list[FieldRamp] = field(default_factory=list)

    def field_at(self, p) -> np.ndarray:
        """World-frame field vector at a floor position (meters)."""
        p = np.asarray(p, dtype=float).reshape(2)
        f = np.array(self.base, dtype=float)
        for bump in self.bumps:
            d2 = float((p[0] - bump.center[0]) ** 2 + (p[1] - bump.center[1]) ** 2)
            f += np.asarray(bump.amplitude) * np.exp(-d2 / (2.0 * bump.sigma_m ** 2))
        for ramp in self.ramps:
            along = ((p[0] - ramp.origin[0]) * ramp.direction[0]
                     + (p[1] - ramp.origin[1]) * ramp.direction[1])
            f += np.asarray(ramp.slope) * along
        return f

    def to_document(self) -> dict:
        return {
            "base": list(self.base),
            "bumps": [{"center": list(b.center), "amplitude": list(b.amplitude),
                       "sigma_m": b.sigma_m} for b in self.bumps],
            "ramps": [{"origin": list(r.origin), "direction": list(r.direction),
                       "slope": list(r.slope)} for r in self.ramps],
        }


def field_model_from_document(doc: dict) -> MagneticFieldModel:
    return MagneticFieldModel(
        base=tuple(doc.get("base", (22.0, 5.0, -43.0))),
        bumps=[FieldBump(tuple(b["center"]), tuple(b["amplitude"]), float(b["sigma_m"]))
               for b in doc.get("bumps", [])],
        ramps=[FieldRamp(tuple(r["origin"]), tuple(r["direction"]), tuple(r["slope"]))
               for r in doc.get("ramps", [])],
    )


def _rot_z(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _rot_x(phi: float) -> np.ndarray:
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def device_vectors(world_magnetic, yaw: float,
                   tilt: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """(magnetic, gravity) as the handheld device senses them.

    The device frame is the world frame rotated by the walker's yaw,
    then pitched forward by a fixed tilt. Gravity points down in the
    world frame.
    """
    world_to_device = _rot_x(-tilt) @ _rot_z(-yaw)
    m = world_to_device @ np.asarray(world_magnetic, dtype=float).reshape(3)
    g = world_to_device @ np.array([0.0, 0.0, -GRAVITY])
    return m, g
