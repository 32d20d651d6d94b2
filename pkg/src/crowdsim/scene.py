"""Crowd scene sampling: backgrounds, counts, positions, headings, bodies.

All sampling is driven by explicit integer seeds through numpy Generators,
so a SceneSample is a pure function of its arguments and scenes can be
produced on parallel workers without coordination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, RegionTooDenseError
from .geometry import CameraConfig, GroundPolygon, visible_ground_region

# The five fixed solid background colors: mid-gray, dark green, sand,
# light blue, brick red.
SOLID_PALETTE = (
    (128, 128, 128),
    (52, 94, 52),
    (198, 178, 128),
    (150, 200, 235),
    (152, 68, 56),
)

KIND_SOLID = "solid"
KIND_CITY = "city"

# Pedestrian count ladder: uniform over {100, 200, ..., 1000}.
COUNT_LADDER = tuple(range(100, 1001, 100))

MIN_SEPARATION_M = 0.40          # between pedestrian centers
ATTEMPTS_PER_PEDESTRIAN = 200    # rejection-sampling budget multiplier
HEIGHT_MEAN_M = 1.70
HEIGHT_STD_M = 0.07
HEIGHT_RANGE_M = (1.45, 1.95)
# Radii capped at half the separation so accepted bodies can never overlap.
BODY_RADIUS_RANGE_M = (0.15, 0.20)
DEFAULT_HEADING_SIGMA_DEG = 25.0


@dataclass(frozen=True)
class BackgroundSpec:
    """Either one of the five solid colors or a seeded procedural city."""

    kind: str
    palette_index: int | None = None
    city_seed: int | None = None

    def __post_init__(self):
        if self.kind == KIND_SOLID:
            if self.palette_index is None or not 0 <= self.palette_index < 5:
                raise ParameterError(
                    f"palette_index must be in 0..4, got {self.palette_index}"
                )
        elif self.kind == KIND_CITY:
            if self.city_seed is None or self.city_seed < 0:
                raise ParameterError(f"city_seed must be a non-negative int, got {self.city_seed}")
        else:
            raise ParameterError(f"unknown background kind {self.kind!r}")

    @property
    def rgb(self) -> tuple[int, int, int] | None:
        if self.kind == KIND_SOLID:
            return SOLID_PALETTE[self.palette_index]
        return None

    def label(self) -> str:
        if self.kind == KIND_SOLID:
            return f"solid:{self.palette_index}"
        return f"city:{self.city_seed}"

    def to_json_dict(self) -> dict:
        if self.kind == KIND_SOLID:
            return {"kind": KIND_SOLID, "palette_index": self.palette_index}
        return {"kind": KIND_CITY, "city_seed": self.city_seed}

    @classmethod
    def from_json_dict(cls, d: dict) -> "BackgroundSpec":
        return cls(
            kind=d["kind"],
            palette_index=d.get("palette_index"),
            city_seed=d.get("city_seed"),
        )


def make_background(kind: str, index_or_seed: int) -> BackgroundSpec:
    """Build a background spec; solid indices 0..4, any seed for a city."""
    if kind == KIND_SOLID:
        return BackgroundSpec(kind=KIND_SOLID, palette_index=int(index_or_seed))
    if kind == KIND_CITY:
        return BackgroundSpec(kind=KIND_CITY, city_seed=int(index_or_seed))
    raise ParameterError(f"unknown background kind {kind!r}")


def parse_background(label: str) -> BackgroundSpec:
    """Inverse of BackgroundSpec.label(), e.g. 'solid:2' or 'city:7'."""
    try:
        kind, value = label.split(":", 1)
        return make_background(kind, int(value))
    except (ValueError, TypeError) as exc:
        raise ParameterError(f"bad background label {label!r}") from exc


@dataclass(frozen=True)
class Pedestrian:
    id: int
    ground_pos: tuple[float, float]
    height_m: float
    heading_deg: float
    body_radius_m: float
    appearance_seed: int

    @property
    def head_center(self) -> tuple[float, float, float]:
        x, y = self.ground_pos
        return (x, y, 0.94 * self.height_m)

    @property
    def head_radius_m(self) -> float:
        return 0.10 * self.height_m

    @property
    def body_top_m(self) -> float:
        return 0.88 * self.height_m


@dataclass(frozen=True)
class SceneSample:
    scene_id: str
    background: BackgroundSpec
    camera: CameraConfig
    pedestrians: tuple[Pedestrian, ...]
    heading_mean_deg: float
    seed: int

    @property
    def count(self) -> int:
        return len(self.pedestrians)


def sample_count(rng: np.random.Generator) -> int:
    """Draw a pedestrian count uniformly from the 100..1000 ladder."""
    return int(COUNT_LADDER[rng.integers(0, len(COUNT_LADDER))])


def _sample_point_in_polygon(poly_pts: np.ndarray, tri_cum: np.ndarray, rng: np.random.Generator):
    """Uniform point in a convex polygon via its fan triangulation."""
    r = rng.random()
    k = int(np.searchsorted(tri_cum, r * tri_cum[-1], side="right"))
    k = min(k, len(tri_cum) - 1)
    a = poly_pts[0]
    b = poly_pts[k + 1]
    c = poly_pts[k + 2]
    u, v = rng.random(), rng.random()
    if u + v > 1.0:
        u, v = 1.0 - u, 1.0 - v
    return a + u * (b - a) + v * (c - a)


def _fan_triangle_areas(poly_pts: np.ndarray) -> np.ndarray:
    a = poly_pts[0]
    b = poly_pts[1:-1]
    c = poly_pts[2:]
    cross = (b[:, 0] - a[0]) * (c[:, 1] - a[1]) - (b[:, 1] - a[1]) * (c[:, 0] - a[0])
    return 0.5 * np.abs(cross)


class _SeparationGrid:
    """Uniform hash grid for min-distance rejection tests."""

    def __init__(self, min_sep: float):
        self.min_sep = min_sep
        self.cell = min_sep
        self.cells: dict[tuple[int, int], list[tuple[float, float]]] = {}

    def ok(self, x: float, y: float) -> bool:
        ci, cj = int(math.floor(x / self.cell)), int(math.floor(y / self.cell))
        ms2 = self.min_sep * self.min_sep
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                for px, py in self.cells.get((ci + di, cj + dj), ()):
                    if (px - x) ** 2 + (py - y) ** 2 < ms2:
                        return False
        return True

    def add(self, x: float, y: float):
        key = (int(math.floor(x / self.cell)), int(math.floor(y / self.cell)))
        self.cells.setdefault(key, []).append((x, y))


def sample_scene(
    background: BackgroundSpec,
    camera: CameraConfig,
    count: int,
    heading_sigma_deg: float = DEFAULT_HEADING_SIGMA_DEG,
    seed: int = 0,
    scene_id: str = "",
    region: GroundPolygon | None = None,
) -> SceneSample:
    """Sample a full crowd scene, deterministically in all arguments.

    Positions are uniform over the camera's visible ground region subject
    to a minimum center separation; headings are normal around a mean
    itself drawn uniformly from [0, 360); heights are normal, clipped to
    the human range.
    """
    if count < 1:
        raise ParameterError(f"count must be >= 1, got {count}")
    if heading_sigma_deg < 0:
        raise ParameterError(f"heading_sigma_deg must be >= 0, got {heading_sigma_deg}")
    if region is None:
        region = visible_ground_region(camera)

    rng = np.random.default_rng(seed)
    heading_mean = float(rng.uniform(0.0, 360.0))

    poly_pts = np.asarray(region.vertices, dtype=np.float64)
    tri_cum = np.cumsum(_fan_triangle_areas(poly_pts))

    grid = _SeparationGrid(MIN_SEPARATION_M)
    positions: list[tuple[float, float]] = []
    budget = ATTEMPTS_PER_PEDESTRIAN * count
    attempts = 0
    while len(positions) < count:
        if attempts >= budget:
            raise RegionTooDenseError(requested=count, achieved=len(positions))
        attempts += 1
        p = _sample_point_in_polygon(poly_pts, tri_cum, rng)
        x, y = float(p[0]), float(p[1])
        if not grid.ok(x, y):
            continue
        grid.add(x, y)
        positions.append((x, y))

    headings = np.mod(rng.normal(heading_mean, heading_sigma_deg, size=count), 360.0)
    heights = np.clip(
        rng.normal(HEIGHT_MEAN_M, HEIGHT_STD_M, size=count), *HEIGHT_RANGE_M
    )
    radii = rng.uniform(*BODY_RADIUS_RANGE_M, size=count)
    looks = rng.integers(0, 2**63, size=count, dtype=np.int64)

    peds = tuple(
        Pedestrian(
            id=i,
            ground_pos=positions[i],
            height_m=float(heights[i]),
            heading_deg=float(headings[i]),
            body_radius_m=float(radii[i]),
            appearance_seed=int(looks[i]),
        )
        for i in range(count)
    )
    return SceneSample(
        scene_id=scene_id,
        background=background,
        camera=camera,
        pedestrians=peds,
        heading_mean_deg=heading_mean,
        seed=int(seed),
    )
