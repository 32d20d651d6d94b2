"""Deterministic software rasterizer with z-buffer occlusion.

Primitives (building boxes, body cylinders, head spheres) are drawn by
per-pixel ray intersection in world space over a conservative screen-space
bounding box: exact silhouettes, exact analytic depth, no anti-aliasing.
Rays go through pixel centers with directions scaled to unit length along
the optical axis, so the ray parameter equals camera depth. Identical
scenes rasterize to byte-identical buffers.
"""

from __future__ import annotations

import colorsys
import math
from dataclasses import dataclass

import numpy as np

from .geometry import DEPTH_EPS, CameraConfig, project_points
from .scene import KIND_CITY, KIND_SOLID, Pedestrian, SceneSample

# Owner buffer codes: pedestrian i's body is 2i, its head 2i+1.
OWNER_NONE = -1
OWNER_BUILDING = -2

# City block grid: centers every 16 m in [-48, 48], open plaza around the
# origin so the top-down view is never roofed over.
_CITY_GRID_STEP = 16.0
_CITY_GRID_HALF = 48.0
_CITY_PLAZA_RADIUS = 24.0
_CITY_HEIGHT_RANGE = (8.0, 30.0)
_CITY_FOOTPRINT_HALF = (4.0, 6.5)
_CITY_SKIP_PROB = 0.15

_SKIN_TONES = (
    (244, 208, 177),
    (224, 177, 132),
    (198, 134, 94),
    (141, 85, 54),
    (97, 62, 40),
)


@dataclass
class Framebuffer:
    width_px: int
    height_px: int
    color: np.ndarray  # (H, W, 3) uint8
    depth: np.ndarray  # (H, W) float64, +inf where empty


@dataclass
class VisibilityReport:
    """Per-pedestrian head-pixel visibility under full-scene occlusion.

    ``head_pixels_total`` counts the head's pixels with no occluders at all;
    ``head_pixels_visible`` counts those still showing the same pedestrian
    (head, or its own body over the small head/shoulder overlap) in the full
    scene, so only occlusion by *other* scene elements lowers the fraction.
    A pedestrian whose head projects entirely off-screen has total 0, is
    flagged out of frame, and gets fraction 0.
    """

    head_pixels_total: np.ndarray    # (n,) int64
    head_pixels_visible: np.ndarray  # (n,) int64
    fraction_visible: np.ndarray     # (n,) float64
    out_of_frame: np.ndarray         # (n,) bool
    mean_fraction: float             # over pedestrians with total > 0


@dataclass(frozen=True)
class _Box:
    x0: float
    x1: float
    y0: float
    y1: float
    z1: float  # base at z = 0
    side_rgb: tuple[int, int, int]
    roof_rgb: tuple[int, int, int]


def _shade(rgb, factor):
    return tuple(int(min(255.0, max(0.0, round(c * factor)))) for c in rgb)


def city_layout(city_seed: int) -> tuple[tuple[int, int, int], list[_Box]]:
    """Deterministic block layout for a procedural city background."""
    rng = np.random.default_rng(city_seed)
    ground = (
        96 + int(rng.integers(0, 32)),
        96 + int(rng.integers(0, 32)),
        96 + int(rng.integers(0, 24)),
    )
    boxes: list[_Box] = []
    centers = np.arange(-_CITY_GRID_HALF, _CITY_GRID_HALF + 1e-9, _CITY_GRID_STEP)
    for cx in centers:
        for cy in centers:
            if math.hypot(cx, cy) < _CITY_PLAZA_RADIUS:
                continue
            if rng.random() < _CITY_SKIP_PROB:
                continue
            hx = float(rng.uniform(*_CITY_FOOTPRINT_HALF))
            hy = float(rng.uniform(*_CITY_FOOTPRINT_HALF))
            h = float(rng.uniform(*_CITY_HEIGHT_RANGE))
            tone = 0.55 + 0.4 * float(rng.random())
            base = (
                int(tone * (140 + rng.integers(0, 60))),
                int(tone * (130 + rng.integers(0, 50))),
                int(tone * (120 + rng.integers(0, 50))),
            )
            side = _shade(base, 1.0)
            roof = _shade(base, 1.25)
            boxes.append(_Box(cx - hx, cx + hx, cy - hy, cy + hy, h, side, roof))
    return ground, boxes


def pedestrian_colors(ped: Pedestrian, cam: CameraConfig) -> tuple[tuple, tuple]:
    """(body_rgb, head_rgb) from the appearance seed, with a brightness
    tint that depends on how much the pedestrian faces the camera."""
    rng = np.random.default_rng(ped.appearance_seed)
    hue = float(rng.random())
    sat = 0.35 + 0.5 * float(rng.random())
    val = 0.35 + 0.55 * float(rng.random())
    skin = _SKIN_TONES[int(rng.integers(0, len(_SKIN_TONES)))]

    px, py = ped.ground_pos
    to_cam = math.atan2(cam.position.y - py, cam.position.x - px)
    facing = math.radians(ped.heading_deg)
    tint = 0.78 + 0.22 * 0.5 * (1.0 + math.cos(facing - to_cam))

    body = _shade(tuple(255.0 * c for c in colorsys.hsv_to_rgb(hue, sat, val)), tint)
    head = _shade(skin, tint)
    return body, head


class _Raster:
    """Mutable draw state for one image: color, depth and owner buffers."""

    def __init__(self, cam: CameraConfig, fill_rgb):
        self.cam = cam
        H, W = cam.height_px, cam.width_px
        self.color = np.empty((H, W, 3), dtype=np.uint8)
        self.color[:] = np.asarray(fill_rgb, dtype=np.uint8)
        self.depth = np.full((H, W), np.inf, dtype=np.float64)
        self.owner = np.full((H, W), OWNER_NONE, dtype=np.int32)
        self.origin = cam.position.as_array()
        f = cam.focal_px
        cx, cy = cam.principal_point
        us = (np.arange(W, dtype=np.float64) + 0.5 - cx) / f
        vs = (np.arange(H, dtype=np.float64) + 0.5 - cy) / f
        R = cam.rotation_array()
        # d_world = u*right + v*down + forward, unit along the optical axis
        self.dx = us[None, :] * R[0, 0] + vs[:, None] * R[1, 0] + R[2, 0]
        self.dy = us[None, :] * R[0, 1] + vs[:, None] * R[1, 1] + R[2, 1]
        self.dz = us[None, :] * R[0, 2] + vs[:, None] * R[1, 2] + R[2, 2]

    def _bbox(self, corners: np.ndarray):
        """Pixel-rect covering the projected corners of a world AABB.
        Returns (y0, y1, x0, x1), None when fully off-screen/behind, or the
        full image when any corner is behind the camera (conservative)."""
        H, W = self.depth.shape
        uvd, valid = project_points(self.cam, corners)
        if not valid.all():
            if not valid.any():
                return None
            return (0, H, 0, W)
        u, v = uvd[:, 0], uvd[:, 1]
        x0 = max(0, int(math.floor(u.min())) - 1)
        x1 = min(W, int(math.ceil(u.max())) + 1)
        y0 = max(0, int(math.floor(v.min())) - 1)
        y1 = min(H, int(math.ceil(v.max())) + 1)
        if x0 >= x1 or y0 >= y1:
            return None
        return (y0, y1, x0, x1)

    def _commit(self, rect, t, hit, owner_id, rgb_map):
        """Depth-test ``t`` over the rect and write color/owner where nearer.
        ``rgb_map`` is either an rgb triple or (face_index_array, palette)."""
        y0, y1, x0, x1 = rect
        dep = self.depth[y0:y1, x0:x1]
        win = hit & (t < dep)
        if not win.any():
            return
        dep[win] = t[win]
        self.owner[y0:y1, x0:x1][win] = owner_id
        blk = self.color[y0:y1, x0:x1]
        if isinstance(rgb_map, tuple) and len(rgb_map) == 2 and isinstance(rgb_map[1], np.ndarray):
            faces, palette = rgb_map
            blk[win] = palette[faces[win]]
        else:
            blk[win] = np.asarray(rgb_map, dtype=np.uint8)

    def draw_box(self, box: _Box, owner_id: int = OWNER_BUILDING):
        corners = np.array(
            [
                (x, y, z)
                for x in (box.x0, box.x1)
                for y in (box.y0, box.y1)
                for z in (0.0, box.z1)
            ]
        )
        rect = self._bbox(corners)
        if rect is None:
            return
        y0, y1, x0, x1 = rect
        ox, oy, oz = self.origin
        dx = self.dx[y0:y1, x0:x1]
        dy = self.dy[y0:y1, x0:x1]
        dz = self.dz[y0:y1, x0:x1]
        with np.errstate(divide="ignore", invalid="ignore"):
            tx1 = (box.x0 - ox) / dx
            tx2 = (box.x1 - ox) / dx
            ty1 = (box.y0 - oy) / dy
            ty2 = (box.y1 - oy) / dy
            tz1 = (0.0 - oz) / dz
            tz2 = (box.z1 - oz) / dz
        txn = np.minimum(tx1, tx2)
        txf = np.maximum(tx1, tx2)
        tyn = np.minimum(ty1, ty2)
        tyf = np.maximum(ty1, ty2)
        tzn = np.minimum(tz1, tz2)
        tzf = np.maximum(tz1, tz2)
        t_enter = np.maximum(np.maximum(txn, tyn), tzn)
        t_exit = np.minimum(np.minimum(txf, tyf), tzf)
        hit = (t_enter <= t_exit) & (t_enter > DEPTH_EPS) & np.isfinite(t_enter)
        # Face for shading: roof when the z-slab is the last one entered.
        faces = np.where(t_enter == tzn, 1, 0).astype(np.int8)
        palette = np.array([box.side_rgb, box.roof_rgb], dtype=np.uint8)
        self._commit(rect, t_enter, hit, owner_id, (faces, palette))

    def draw_cylinder(self, cx, cy, z1, r, owner_id, side_rgb, cap_rgb):
        corners = np.array(
            [
                (x, y, z)
                for x in (cx - r, cx + r)
                for y in (cy - r, cy + r)
                for z in (0.0, z1)
            ]
        )
        rect = self._bbox(corners)
        if rect is None:
            return
        y0, y1, x0, x1 = rect
        ox, oy, oz = self.origin
        dx = self.dx[y0:y1, x0:x1]
        dy = self.dy[y0:y1, x0:x1]
        dz = self.dz[y0:y1, x0:x1]
        rx, ry = ox - cx, oy - cy
        a = dx * dx + dy * dy
        b = 2.0 * (rx * dx + ry * dy)
        c = rx * rx + ry * ry - r * r
        disc = b * b - 4.0 * a * c
        ok = (disc >= 0.0) & (a > 1e-18)
        sq = np.sqrt(np.where(ok, disc, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            t_side = np.where(ok, (-b - sq) / (2.0 * a), np.inf)
        z_at = oz + t_side * dz
        side_hit = ok & (t_side > DEPTH_EPS) & (z_at >= 0.0) & (z_at <= z1)
        t_side = np.where(side_hit, t_side, np.inf)
        # Top cap (bottom cap sits on the ground and is never the nearest
        # surface for a camera above z = 0).
        with np.errstate(divide="ignore", invalid="ignore"):
            t_cap = np.where(dz != 0.0, (z1 - oz) / dz, np.inf)
        capx = ox + t_cap * dx - cx
        capy = oy + t_cap * dy - cy
        cap_hit = (t_cap > DEPTH_EPS) & (capx * capx + capy * capy <= r * r)
        t_cap = np.where(cap_hit, t_cap, np.inf)
        t = np.minimum(t_side, t_cap)
        hit = np.isfinite(t)
        faces = np.where(t_cap < t_side, 1, 0).astype(np.int8)
        palette = np.array([side_rgb, cap_rgb], dtype=np.uint8)
        self._commit(rect, t, hit, owner_id, (faces, palette))

    def _sphere_t(self, rect, center, r):
        y0, y1, x0, x1 = rect
        ox, oy, oz = self.origin
        dx = self.dx[y0:y1, x0:x1]
        dy = self.dy[y0:y1, x0:x1]
        dz = self.dz[y0:y1, x0:x1]
        ocx, ocy, ocz = ox - center[0], oy - center[1], oz - center[2]
        a = dx * dx + dy * dy + dz * dz
        b = 2.0 * (ocx * dx + ocy * dy + ocz * dz)
        c = ocx * ocx + ocy * ocy + ocz * ocz - r * r
        disc = b * b - 4.0 * a * c
        ok = disc >= 0.0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        t = np.where(ok, (-b - sq) / (2.0 * a), np.inf)
        hit = ok & (t > DEPTH_EPS)
        return np.where(hit, t, np.inf), hit

    def sphere_bbox(self, center, r):
        corners = np.array(
            [
                (center[0] + sx * r, center[1] + sy * r, center[2] + sz * r)
                for sx in (-1, 1)
                for sy in (-1, 1)
                for sz in (-1, 1)
            ]
        )
        return self._bbox(corners)

    def draw_sphere(self, center, r, owner_id, rgb):
        rect = self.sphere_bbox(center, r)
        if rect is None:
            return
        t, hit = self._sphere_t(rect, center, r)
        self._commit(rect, t, hit, owner_id, rgb)

    def sphere_pixel_count(self, center, r) -> int:
        """Pixels the sphere would own with no other geometry present."""
        rect = self.sphere_bbox(center, r)
        if rect is None:
            return 0
        _, hit = self._sphere_t(rect, center, r)
        return int(hit.sum())


def _background_fill(scene: SceneSample):
    bg = scene.background
    if bg.kind == KIND_SOLID:
        return bg.rgb, []
    ground, boxes = city_layout(bg.city_seed)
    return ground, boxes


def _rasterize(scene: SceneSample) -> _Raster:
    fill, boxes = _background_fill(scene)
    ras = _Raster(scene.camera, fill)
    for box in boxes:
        ras.draw_box(box)
    for ped in scene.pedestrians:
        body_rgb, head_rgb = pedestrian_colors(ped, scene.camera)
        x, y = ped.ground_pos
        ras.draw_cylinder(
            x, y, ped.body_top_m, ped.body_radius_m,
            owner_id=2 * ped.id, side_rgb=body_rgb, cap_rgb=_shade(body_rgb, 1.12),
        )
        ras.draw_sphere(ped.head_center, ped.head_radius_m, 2 * ped.id + 1, head_rgb)
    return ras


def rasterize(scene: SceneSample) -> Framebuffer:
    """Render the scene to an RGB framebuffer with analytic depth."""
    ras = _rasterize(scene)
    return Framebuffer(
        width_px=scene.camera.width_px,
        height_px=scene.camera.height_px,
        color=ras.color,
        depth=ras.depth,
    )


def head_visibility(scene: SceneSample, _prerendered: _Raster | None = None) -> VisibilityReport:
    """Measure how much of each head survives full-scene occlusion."""
    ras = _prerendered if _prerendered is not None else _rasterize(scene)
    n = len(scene.pedestrians)
    total = np.zeros(n, dtype=np.int64)
    visible = np.zeros(n, dtype=np.int64)
    # Per-pixel pedestrian id (body and head codes both map back to the id).
    owner_ped = np.where(ras.owner >= 0, ras.owner >> 1, -1)
    for ped in scene.pedestrians:
        rect = ras.sphere_bbox(ped.head_center, ped.head_radius_m)
        if rect is None:
            continue
        _, hit = ras._sphere_t(rect, ped.head_center, ped.head_radius_m)
        total[ped.id] = int(hit.sum())
        if total[ped.id] == 0:
            continue
        y0, y1, x0, x1 = rect
        own = owner_ped[y0:y1, x0:x1] == ped.id
        visible[ped.id] = int((hit & own).sum())

    out_of_frame = total == 0
    frac = np.zeros(n, dtype=np.float64)
    in_frame = ~out_of_frame
    frac[in_frame] = visible[in_frame] / total[in_frame]
    mean = float(frac[in_frame].mean()) if in_frame.any() else 0.0
    return VisibilityReport(
        head_pixels_total=total,
        head_pixels_visible=visible,
        fraction_visible=frac,
        out_of_frame=out_of_frame,
        mean_fraction=mean,
    )


def render_with_visibility(scene: SceneSample) -> tuple[Framebuffer, VisibilityReport]:
    """One-pass convenience: framebuffer plus the visibility report."""
    ras = _rasterize(scene)
    fb = Framebuffer(
        width_px=scene.camera.width_px,
        height_px=scene.camera.height_px,
        color=ras.color,
        depth=ras.depth,
    )
    return fb, head_visibility(scene, _prerendered=ras)


def overlay_dots(color: np.ndarray, points_uv, rgb=(255, 32, 32), radius: int = 2) -> np.ndarray:
    """Stamp small dots onto an RGB array (used by the CLI preview)."""
    out = color.copy()
    H, W = out.shape[:2]
    for u, v in points_uv:
        x, y = int(math.floor(u)), int(math.floor(v))
        x0, x1 = max(0, x - radius), min(W, x + radius + 1)
        y0, y1 = max(0, y - radius), min(H, y + radius + 1)
        if x0 < x1 and y0 < y1:
            out[y0:y1, x0:x1] = rgb
    return out
