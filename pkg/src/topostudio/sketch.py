"""Turn a color-coded raster sketch into a solvable problem definition.

Palette semantics: black strokes are the part silhouette, red arrows are
loads (the arrow points along the force), yellow/blue/green dots are
supports fixing x / y / both, cyan regions are preserved material, white is
empty canvas.  Classification tolerates anti-aliasing: a pixel joins the
nearest palette color if no channel is off by more than 60, otherwise it
counts as background.

The canvas maps onto the element grid by uniform scaling of the full image
(non-square images are letterboxed).  Elements take the majority class of
the pixels landing in them; when the raster is coarser than the grid, each
element samples the pixel under its center instead.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import ndimage

from .model import (
    GridDims,
    Load,
    MaterialParams,
    ProblemSpec,
    Support,
    validate_problem,
)

SHAPE, LOAD, FIX_X, FIX_Y, FIX_XY, MASK, BACKGROUND = range(7)

PALETTE = np.array(
    [
        [0, 0, 0],  # SHAPE
        [255, 0, 0],  # LOAD
        [255, 255, 0],  # FIX_X
        [0, 0, 255],  # FIX_Y
        [0, 255, 0],  # FIX_XY
        [0, 255, 255],  # MASK
        [255, 255, 255],  # BACKGROUND
    ],
    dtype=np.int16,
)

COLOR_TOLERANCE = 60
MIN_ARROW_PIXELS = 8
MIN_AXIS_RATIO = 1.5
TIP_MASS_RADIUS = 3.0


class EmptyShape(ValueError):
    """The sketch contains no part silhouette."""


class DegenerateArrow(ValueError):
    """A red component cannot be read as an arrow."""


@dataclass(frozen=True, eq=False)
class Component:
    """One 4-connected blob of a single color class."""

    color_class: int
    pixels: np.ndarray  # (n, 2) as (x, y)
    centroid: tuple[float, float]
    principal_axis: tuple[float, float]
    axis_ratio: float

    @property
    def count(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True, eq=False)
class ConstraintSketch:
    width: int
    height: int
    classes: np.ndarray  # (height, width) uint8 class codes
    components: dict  # class code -> list[Component]


def _component_geometry(pixels: np.ndarray):
    centroid = pixels.mean(axis=0)
    if pixels.shape[0] < 2:
        return (float(centroid[0]), float(centroid[1])), (1.0, 0.0), 1.0
    centered = pixels - centroid
    cov = centered.T @ centered / pixels.shape[0]
    w, v = np.linalg.eigh(cov)
    small, big = float(w[0]), float(w[1])
    if big <= 1e-12:
        ratio = 1.0
    elif small <= 1e-12:
        ratio = np.inf
    else:
        ratio = big / small
    axis = v[:, 1]
    return (float(centroid[0]), float(centroid[1])), (float(axis[0]), float(axis[1])), ratio


def classify_pixels(image: np.ndarray) -> ConstraintSketch:
    """Assign every pixel a palette class and label 4-connected components."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] not in (3, 4) or image.size == 0:
        raise ValueError("expected a nonempty (height, width, 3|4) RGB(A) raster")
    rgb = image[:, :, :3].astype(np.int16)
    if image.shape[2] == 4:
        alpha = image[:, :, 3:4].astype(np.float64) / 255.0
        rgb = np.round(rgb * alpha + 255.0 * (1.0 - alpha)).astype(np.int16)
    deviation = np.abs(rgb[:, :, None, :] - PALETTE[None, None, :, :]).max(axis=3)
    best = deviation.argmin(axis=2)
    classes = np.where(
        np.take_along_axis(deviation, best[:, :, None], axis=2)[:, :, 0]
        <= COLOR_TOLERANCE,
        best,
        BACKGROUND,
    ).astype(np.uint8)

    components: dict[int, list[Component]] = {}
    for code in (SHAPE, LOAD, FIX_X, FIX_Y, FIX_XY, MASK):
        found = []
        labeled, n = ndimage.label(classes == code)
        for i in range(1, n + 1):
            ys, xs = np.nonzero(labeled == i)
            pixels = np.stack([xs, ys], axis=1).astype(np.float64)
            centroid, axis, ratio = _component_geometry(pixels)
            found.append(Component(code, pixels, centroid, axis, ratio))
        components[code] = found
    return ConstraintSketch(image.shape[1], image.shape[0], classes, components)


@dataclass(frozen=True)
class CanvasMap:
    """Uniform pixel-to-grid transform with letterbox centering."""

    scale: float  # grid units per pixel
    offset_x: float
    offset_y: float

    @classmethod
    def fit(cls, dims: GridDims, width: int, height: int) -> "CanvasMap":
        scale = min(dims.nelx / width, dims.nely / height)
        return cls(
            scale,
            (dims.nelx - width * scale) / 2.0,
            (dims.nely - height * scale) / 2.0,
        )

    def to_grid(self, px: float, py: float) -> tuple[float, float]:
        return (
            self.offset_x + (px + 0.5) * self.scale,
            self.offset_y + (py + 0.5) * self.scale,
        )

    def nearest_node(self, dims: GridDims, px: float, py: float) -> int:
        gx, gy = self.to_grid(px, py)
        ix = int(np.clip(round(gx), 0, dims.nelx))
        iy = int(np.clip(round(gy), 0, dims.nely))
        return dims.node_at(ix, iy)


def arrow_to_load(
    component: Component,
    dims: GridDims,
    canvas: CanvasMap,
    arrow_point: str = "tail",
) -> Load:
    """Read a red component as an arrow: the denser end is the head.

    The load applies at the tail end by default (the arrow emanates from
    the loaded boundary); arrow_point="tip" applies it at the head instead.
    Direction is always tail towards tip.
    """
    if arrow_point not in ("tail", "tip"):
        raise ValueError(f"arrow_point must be 'tail' or 'tip', got {arrow_point!r}")
    if component.count < MIN_ARROW_PIXELS:
        raise DegenerateArrow(
            f"arrow needs at least {MIN_ARROW_PIXELS} pixels, got {component.count}"
        )
    if component.axis_ratio < MIN_AXIS_RATIO:
        raise DegenerateArrow("component is too round to define a direction")
    pixels = component.pixels
    axis = np.array(component.principal_axis)
    t = pixels @ axis
    lo = pixels[int(np.argmin(t))]
    hi = pixels[int(np.argmax(t))]
    mass_lo = int(np.count_nonzero(np.linalg.norm(pixels - lo, axis=1) <= TIP_MASS_RADIUS))
    mass_hi = int(np.count_nonzero(np.linalg.norm(pixels - hi, axis=1) <= TIP_MASS_RADIUS))
    if abs(mass_hi - mass_lo) <= 1:
        raise DegenerateArrow("arrowhead is ambiguous: both ends equally dense")
    tip, tail = (hi, lo) if mass_hi > mass_lo else (lo, hi)
    direction = tip - tail
    anchor = tail if arrow_point == "tail" else tip
    node = canvas.nearest_node(dims, anchor[0], anchor[1])
    return Load(node, float(direction[0]), float(direction[1]))


_SUPPORT_FLAGS = {FIX_X: (True, False), FIX_Y: (False, True), FIX_XY: (True, True)}


def _element_classes(sketch: ConstraintSketch, dims: GridDims, canvas: CanvasMap):
    """Per-element (shape, mask) votes from the pixel classification."""
    h, w = sketch.classes.shape
    if canvas.scale > 1.0:
        # raster coarser than the grid: sample the pixel under each element center
        ex = np.tile(np.arange(dims.nelx), dims.nely)
        ey = np.repeat(np.arange(dims.nely), dims.nelx)
        px = (ex + 0.5 - canvas.offset_x) / canvas.scale - 0.5
        py = (ey + 0.5 - canvas.offset_y) / canvas.scale - 0.5
        ipx = np.clip(np.round(px).astype(int), 0, w - 1)
        ipy = np.clip(np.round(py).astype(int), 0, h - 1)
        cls = sketch.classes[ipy, ipx]
        inside = (px >= -0.5) & (px <= w - 0.5) & (py >= -0.5) & (py <= h - 0.5)
        cls = np.where(inside, cls, BACKGROUND)
        shape = (cls != BACKGROUND)
        mask = cls == MASK
        return shape, mask
    ys, xs = np.mgrid[0:h, 0:w]
    gx = canvas.offset_x + (xs.ravel() + 0.5) * canvas.scale
    gy = canvas.offset_y + (ys.ravel() + 0.5) * canvas.scale
    ex = np.clip(gx.astype(int), 0, dims.nelx - 1)
    ey = np.clip(gy.astype(int), 0, dims.nely - 1)
    element = ey * dims.nelx + ex
    codes = sketch.classes.ravel().astype(np.int64)
    counts = np.bincount(
        element * 7 + codes, minlength=dims.num_elements * 7
    ).reshape(dims.num_elements, 7)
    total = counts.sum(axis=1)
    non_background = total - counts[:, BACKGROUND]
    shape = non_background * 2 > total
    mask = counts[:, MASK] * 2 > total
    return shape, mask


def sketch_to_problem(
    sketch: ConstraintSketch,
    dims: GridDims,
    volfrac: float,
    strength: float = 0.8,
    seed: int = 0,
    arrow_point: str = "tail",
    material: Optional[MaterialParams] = None,
) -> tuple[ProblemSpec, list[str]]:
    """Assemble the parsed sketch into a ProblemSpec.

    Returns the spec together with its validation issues (empty when
    solvable), so callers can surface problems without losing the parse.
    """
    if not sketch.components[SHAPE]:
        raise EmptyShape("sketch has no part silhouette pixels")
    canvas = CanvasMap.fit(dims, sketch.width, sketch.height)
    shape, mask = _element_classes(sketch, dims, canvas)
    loads = tuple(
        arrow_to_load(c, dims, canvas, arrow_point) for c in sketch.components[LOAD]
    )
    supports = []
    for code, (fx, fy) in _SUPPORT_FLAGS.items():
        for c in sketch.components[code]:
            node = canvas.nearest_node(dims, c.centroid[0], c.centroid[1])
            supports.append(Support(node, fx, fy))
    supports.sort(key=lambda s: (s.node, s.fix_x, s.fix_y))
    spec = ProblemSpec(
        dims=dims,
        shape=shape,
        mask=mask,
        loads=loads,
        supports=tuple(supports),
        volfrac=volfrac,
        strength=strength,
        seed=seed,
        material=material or MaterialParams(),
    )
    return spec, validate_problem(spec)


def load_sketch(source: Union[str, bytes, io.BytesIO]) -> np.ndarray:
    """Decode a PNG (or any Pillow-readable raster) to an RGB array."""
    from PIL import Image

    if isinstance(source, bytes):
        source = io.BytesIO(source)
    with Image.open(source) as img:
        return np.asarray(img.convert("RGBA"))


def parse_sketch_file(
    source: Union[str, bytes, io.BytesIO],
    dims: GridDims,
    volfrac: float,
    **kwargs,
) -> tuple[ProblemSpec, list[str]]:
    return sketch_to_problem(classify_pixels(load_sketch(source)), dims, volfrac, **kwargs)
