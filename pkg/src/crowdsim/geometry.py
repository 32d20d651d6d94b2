"""Pinhole camera model and ground-plane geometry.

World frame: right-handed, z-up, ground plane z = 0, scene center at the
origin. The camera sits on the -y side of the scene at a fixed distance
from the origin and looks at the origin with zero roll. Image coordinates
(u, v) are continuous with the origin at the top-left corner, u rightward
and v downward; the integer raster index of a hit is floor(u), floor(v).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CrowdSimError, ParameterError

# Projection treats anything closer than this (along the optical axis) as
# behind the camera.
DEPTH_EPS = 1e-6

# Ground region is clipped to this radius around the origin so low-pitch
# frustum wedges stay bounded and sampling areas stay comparable.
GROUND_CLIP_RADIUS_M = 60.0

# Number of sides of the polygon that stands in for the clip circle.
_CLIP_CIRCLE_SIDES = 64

# Defaults chosen so ~1000 pedestrians fit the 30-degree view.
DEFAULT_FOV_V_DEG = 55.0
DEFAULT_DISTANCE_M = 18.0


@dataclass(frozen=True)
class Vec3:
    """A point or direction in world coordinates (meters)."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(math.isfinite(c) for c in (self.x, self.y, self.z)):
            raise ParameterError(f"Vec3 components must be finite, got {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)


@dataclass(frozen=True)
class PixelHit:
    """Continuous image coordinates of a projected point plus its depth
    along the optical axis. May lie outside the image bounds; callers clip."""

    u: float
    v: float
    depth_m: float


@dataclass(frozen=True)
class GroundPolygon:
    """Convex, counterclockwise polygon on the ground plane (meters)."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.vertices) < 3:
            raise CrowdSimError("ground polygon is degenerate (< 3 vertices)")
        if self.area() <= 0:
            raise CrowdSimError("ground polygon must be CCW with positive area")

    def area(self) -> float:
        pts = np.asarray(self.vertices, dtype=np.float64)
        x, y = pts[:, 0], pts[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def contains(self, x: float, y: float, tol: float = 1e-9) -> bool:
        pts = self.vertices
        n = len(pts)
        for i in range(n):
            ax, ay = pts[i]
            bx, by = pts[(i + 1) % n]
            # CCW polygon: interior is to the left of every edge.
            if (bx - ax) * (y - ay) - (by - ay) * (x - ax) < -tol:
                return False
        return True


@dataclass(frozen=True)
class CameraConfig:
    """Pinhole camera looking at the scene center with zero roll.

    ``rotation`` maps world to camera coordinates; its rows are the camera's
    right, down and forward axes expressed in world coordinates. Depth is
    measured along the forward axis. Vertical and horizontal focal lengths
    are equal (square pixels); the horizontal field of view follows from
    the aspect ratio.
    """

    pitch_deg: float
    distance_m: float
    fov_v_deg: float
    width_px: int
    height_px: int
    roll_deg: float = 0.0
    position: Vec3 = field(init=False)
    rotation: tuple = field(init=False)  # 3x3 row-major

    def __post_init__(self):
        if not 10.0 <= self.pitch_deg <= 90.0:
            raise ParameterError(f"pitch_deg must be in [10, 90], got {self.pitch_deg}")
        if self.roll_deg != 0.0:
            raise ParameterError(f"roll_deg is fixed to 0, got {self.roll_deg}")
        if not self.distance_m > 0:
            raise ParameterError(f"distance_m must be > 0, got {self.distance_m}")
        if not 10.0 < self.fov_v_deg < 120.0:
            raise ParameterError(f"fov_v_deg must be in (10, 120), got {self.fov_v_deg}")
        if self.width_px < 32 or self.height_px < 32:
            raise ParameterError(
                f"width_px/height_px must be >= 32, got {self.width_px}x{self.height_px}"
            )
        theta = math.radians(self.pitch_deg)
        pos = Vec3(
            0.0,
            -self.distance_m * math.cos(theta),
            self.distance_m * math.sin(theta),
        )
        # Forward axis points from the camera to the origin. With the camera
        # on the -y side and zero roll, the right axis is +x and the down
        # axis completes the right-handed frame (forward x right).
        fwd = np.array([0.0, math.cos(theta), -math.sin(theta)])
        right = np.array([1.0, 0.0, 0.0])
        down = np.cross(fwd, right)
        rot = np.stack([right, down, fwd])
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "rotation", tuple(map(tuple, rot.tolist())))

    @property
    def focal_px(self) -> float:
        return (self.height_px / 2.0) / math.tan(math.radians(self.fov_v_deg) / 2.0)

    @property
    def principal_point(self) -> tuple[float, float]:
        return (self.width_px / 2.0, self.height_px / 2.0)

    def rotation_array(self) -> np.ndarray:
        return np.asarray(self.rotation, dtype=np.float64)

    def to_json_dict(self) -> dict:
        """Serialization used inside per-sample annotation files."""
        return {
            "pitch_deg": self.pitch_deg,
            "roll_deg": self.roll_deg,
            "distance_m": self.distance_m,
            "fov_v_deg": self.fov_v_deg,
            "width_px": self.width_px,
            "height_px": self.height_px,
            "position": [self.position.x, self.position.y, self.position.z],
            "rotation": [list(row) for row in self.rotation],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "CameraConfig":
        return camera_from_pitch(
            d["pitch_deg"], d["distance_m"], d["fov_v_deg"], d["width_px"], d["height_px"]
        )


def camera_from_pitch(
    pitch_deg: float,
    distance_m: float = DEFAULT_DISTANCE_M,
    fov_v_deg: float = DEFAULT_FOV_V_DEG,
    width_px: int = 512,
    height_px: int = 384,
) -> CameraConfig:
    """Build the camera used throughout generation: placed at the given
    pitch below horizontal on the -y side, at ``distance_m`` from the scene
    center, looking at the origin with zero roll."""
    return CameraConfig(
        pitch_deg=float(pitch_deg),
        distance_m=float(distance_m),
        fov_v_deg=float(fov_v_deg),
        width_px=int(width_px),
        height_px=int(height_px),
    )


def project(cam: CameraConfig, p: Vec3) -> PixelHit | None:
    """Perspective-project a world point; None when at or behind the camera."""
    rel = p.as_array() - cam.position.as_array()
    pc = cam.rotation_array() @ rel
    depth = pc[2]
    if depth <= DEPTH_EPS:
        return None
    f = cam.focal_px
    cx, cy = cam.principal_point
    return PixelHit(
        u=cx + f * pc[0] / depth,
        v=cy + f * pc[1] / depth,
        depth_m=float(depth),
    )


def project_points(cam: CameraConfig, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized projection of an (N, 3) array.

    Returns (uvd, valid) where uvd is (N, 3) of [u, v, depth] and valid marks
    rows with depth > DEPTH_EPS (invalid rows contain NaN coordinates).
    """
    rel = pts.astype(np.float64) - cam.position.as_array()
    pc = rel @ cam.rotation_array().T
    depth = pc[:, 2]
    valid = depth > DEPTH_EPS
    f = cam.focal_px
    cx, cy = cam.principal_point
    with np.errstate(divide="ignore", invalid="ignore"):
        u = cx + f * pc[:, 0] / depth
        v = cy + f * pc[:, 1] / depth
    uvd = np.stack([u, v, depth], axis=1)
    uvd[~valid, 0:2] = np.nan
    return uvd, valid


def pixel_ray(cam: CameraConfig, u, v) -> tuple[np.ndarray, np.ndarray]:
    """World-space ray(s) through continuous image coordinates.

    The returned direction has unit length along the optical axis, so the
    ray parameter t equals camera depth. Accepts scalars or arrays.
    """
    f = cam.focal_px
    cx, cy = cam.principal_point
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    d_cam = np.stack(
        [(u - cx) / f, (v - cy) / f, np.ones_like(u)], axis=-1
    )
    d_world = d_cam @ cam.rotation_array()  # == R.T applied to each row
    origin = cam.position.as_array()
    return origin, d_world


def ground_point_for_pixel(cam: CameraConfig, u: float, v: float) -> tuple[float, float] | None:
    """Back-project a pixel to the ground plane; None if the ray never
    reaches z = 0 in front of the camera."""
    origin, d = pixel_ray(cam, u, v)
    dz = float(d[2])
    if abs(dz) < 1e-15:
        return None
    t = -origin[2] / dz
    if t <= DEPTH_EPS:
        return None
    hit = origin + t * d
    return float(hit[0]), float(hit[1])


def _clip_halfplane(pts: list[tuple[float, float]], a: float, b: float, c: float):
    """Sutherland-Hodgman clip of a polygon against a*x + b*y + c >= 0."""
    out: list[tuple[float, float]] = []
    n = len(pts)
    for i in range(n):
        px, py = pts[i]
        qx, qy = pts[(i + 1) % n]
        fp = a * px + b * py + c
        fq = a * qx + b * qy + c
        if fp >= 0:
            out.append((px, py))
        if (fp >= 0) != (fq >= 0):
            t = fp / (fp - fq)
            out.append((px + t * (qx - px), py + t * (qy - py)))
    return out


def visible_ground_region(cam: CameraConfig, clip_radius_m: float = GROUND_CLIP_RADIUS_M) -> GroundPolygon:
    """Convex polygon where the view frustum meets the ground plane.

    The frustum's four side planes become half-planes on z = 0; the result
    is additionally clipped to a regular polygon approximating the circle
    of radius ``clip_radius_m`` around the origin.
    """
    # Start from the clip circle stand-in (CCW).
    ang = np.linspace(0.0, 2.0 * math.pi, _CLIP_CIRCLE_SIDES, endpoint=False)
    pts = [(clip_radius_m * math.cos(a), clip_radius_m * math.sin(a)) for a in ang]

    # A ground point g lies inside the frustum iff its camera coordinates
    # satisfy depth > 0, |x_c| <= (W/2f) z_c and |y_c| <= (H/2f) z_c. Each
    # camera coordinate is affine in (gx, gy) on the ground plane, so every
    # condition is a half-plane there.
    R = cam.rotation_array()
    o = cam.position.as_array()
    # row_i(g) = R[i] . (g - o) with g = (gx, gy, 0)
    def affine(i):
        return R[i, 0], R[i, 1], -(R[i] @ o)

    ax_x, ay_x, c_x = affine(0)
    ax_y, ay_y, c_y = affine(1)
    ax_z, ay_z, c_z = affine(2)
    f = cam.focal_px
    hu = cam.width_px / 2.0
    hv = cam.height_px / 2.0

    halfplanes = [
        (ax_z, ay_z, c_z - DEPTH_EPS),  # in front of the camera
        (hu / f * ax_z - ax_x, hu / f * ay_z - ay_x, hu / f * c_z - c_x),   # u <= W
        (hu / f * ax_z + ax_x, hu / f * ay_z + ay_x, hu / f * c_z + c_x),   # u >= 0
        (hv / f * ax_z - ax_y, hv / f * ay_z - ay_y, hv / f * c_z - c_y),   # v <= H
        (hv / f * ax_z + ax_y, hv / f * ay_z + ay_y, hv / f * c_z + c_y),   # v >= 0
    ]
    for a, b, c in halfplanes:
        pts = _clip_halfplane(pts, a, b, c)
        if len(pts) < 3:
            raise CrowdSimError("camera sees no ground")

    poly = GroundPolygon(tuple((float(x), float(y)) for x, y in pts))
    if poly.area() < 1e-9:
        raise CrowdSimError("camera sees no ground")
    return poly
