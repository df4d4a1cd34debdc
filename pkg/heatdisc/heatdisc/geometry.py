"""The unit square, its boundary split and the movable disc.

The square is heated through its bottom side Γ0 = (0,1)×{0}; the rest of
the boundary, Γn, is insulated.  The conductive inclusion is a disc that
must stay strictly inside the square, at least `margin` away from ∂Ω.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, InfeasibleGeometryError

GAMMA_0 = "gamma0"
GAMMA_N = "gamman"

ON_CIRCLE_TOL = 1e-9


@dataclass(frozen=True)
class DomainSpec:
    """Boundary partition of Ω = (0,1)² and the disc clearance."""
    margin: float = 0.02

    def __post_init__(self):
        if not self.margin > 0:
            raise ContractViolation(f"margin must be positive, got {self.margin}")

    @staticmethod
    def boundary_tag(a, b):
        """Tags the boundary segment a-b as Γ0 or Γn."""
        if a[1] == 0.0 and b[1] == 0.0:
            return GAMMA_0
        return GAMMA_N


@dataclass(frozen=True)
class DiscGeometry:
    """Represents the design variable: a disc of fixed radius."""
    center: tuple
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise InfeasibleGeometryError(f"radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @property
    def c(self):
        return np.array(self.center)

    def clearance(self):
        """Distance from the disc to ∂Ω."""
        cx, cy = self.center
        return min(cx, 1.0 - cx, cy, 1.0 - cy) - self.radius

    def is_interior(self, margin):
        return self.clearance() >= margin - 1e-12

    def check_interior(self, margin):
        if not self.is_interior(margin):
            raise InfeasibleGeometryError(
                f"disc not interior: center {self.center}, radius {self.radius}, "
                f"clearance {self.clearance():.6g} < margin {margin}")
        return self

    def moved(self, center):
        return DiscGeometry(tuple(center), self.radius)

    def mirrored(self):
        """Reflection about the vertical line x = 0.5."""
        return DiscGeometry((1.0 - self.center[0], self.center[1]), self.radius)


def interface_frame(geom, x):
    """Returns the (tangent, normal) pair at a point of ∂O.

    The normal points from S into the disc, i.e. it is the outward normal of
    S, and the tangent is its clockwise quarter turn.

    Raises:
        ContractViolation: if x is not on the circle within 1e-9.
    """
    tangents, normals = interface_frames(geom, np.atleast_2d(np.asarray(x, dtype=float)))
    return tangents[0], normals[0]


def interface_frames(geom, points):
    """Vectorized interface_frame over an (n, 2) array of circle points."""
    points = np.asarray(points, dtype=float)
    d = points - geom.c
    dist = np.hypot(d[:, 0], d[:, 1])
    off = np.abs(dist - geom.radius)
    if np.any(off > ON_CIRCLE_TOL):
        raise ContractViolation(
            f"point not on the circle: distance error {off.max():.3g}")
    r = geom.radius
    tangents = np.column_stack([d[:, 1], -d[:, 0]]) / r
    normals = -d / r
    return tangents, normals


def project_to_circle(geom, points):
    """Radially projects points onto ∂O."""
    d = np.asarray(points, dtype=float) - geom.c
    dist = np.hypot(d[:, 0], d[:, 1])
    return geom.c + geom.radius * d / dist[:, None]


def project_center(c, radius, margin):
    """Clamps a candidate center so that the disc stays `margin` inside Ω.

    Raises:
        InfeasibleGeometryError: if radius + margin >= 0.5.
    """
    lo = radius + margin
    if lo >= 0.5:
        raise InfeasibleGeometryError(
            f"no feasible center for radius {radius} with margin {margin}")
    return np.clip(np.asarray(c, dtype=float), lo, 1.0 - lo)
