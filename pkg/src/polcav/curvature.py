"""Local radius of curvature of a mirror height map, and the polarization
splitting an astigmatic mirror produces.

Raster convention: ``heights[row, col]``; x runs along columns, y along rows,
both in units of ``pixel_pitch`` from the analysis origin. Angles are
measured from +x towards +y. Heights increasing away from the origin
(a concave mirror seen from the cavity side) give a positive ROC.
"""
from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import map_coordinates

from .core import CONSTANTS
from .errors import FlatSurface, FormatError, OutOfBounds, UnitError, UnstableCavity

FLAT_CURVATURE = 1e-12  # 1/m, quadratic coefficient below which a cut counts as flat


@dataclass(frozen=True, eq=False)
class HeightMap:
    heights: np.ndarray
    pixel_pitch: float
    origin: tuple = None

    def __post_init__(self):
        h = np.asarray(self.heights, dtype=float)
        if h.ndim != 2 or h.size == 0:
            raise FormatError("height map must be a non-empty 2-D raster")
        if not self.pixel_pitch > 0:
            raise UnitError("pixel pitch must be > 0")
        origin = self.origin
        if origin is None:
            origin = ((h.shape[0] - 1) / 2.0, (h.shape[1] - 1) / 2.0)
        object.__setattr__(self, "heights", h)
        object.__setattr__(self, "origin", (float(origin[0]), float(origin[1])))

    @property
    def shape(self):
        return self.heights.shape


@dataclass(frozen=True)
class RocProfile:
    angles: tuple
    rocs: tuple
    r_max: float
    errors: tuple = field(default=())

    def as_rows(self):
        return list(zip(self.angles, self.rocs))


@dataclass(frozen=True)
class CavityGeometry:
    """Cavity with one astigmatic mirror.

    ``roc_second`` is the radius of curvature of the other mirror; when it
    is given, stability of both principal planes is checked.
    """

    length: float
    wavelength: float
    roc_major: float
    roc_minor: float
    roc_second: float | None = None

    def __post_init__(self):
        if not self.length > 0 or not self.wavelength > 0:
            raise ValueError("length and wavelength must be > 0")
        if not 0 < self.roc_minor <= self.roc_major:
            raise ValueError("need 0 < roc_minor <= roc_major")


# -- file format ------------------------------------------------------------

def load_height_map(source) -> HeightMap:
    """Parse a height-map file given as a path, an open file or the text itself.

    Format::

        # pitch_m=<pitch in meters>
        # origin=<row>,<col>          (optional)
        h00,h01,h02,...               (heights in meters, one raster row per line)
    """
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, os.PathLike) or (
        isinstance(source, str) and "\n" not in source and not source.lstrip().startswith("#")
    ):
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = source

    pitch = None
    origin = None
    rows = []
    for lineno, line in enumerate(io.StringIO(text), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            key, sep, value = body.partition("=")
            key = key.strip()
            if not sep:
                continue
            if key == "pitch_m":
                try:
                    pitch = float(value)
                except ValueError:
                    raise FormatError(f"line {lineno}: bad pitch {value!r}") from None
            elif key == "origin":
                try:
                    r, c = (float(v) for v in value.split(","))
                except ValueError:
                    raise FormatError(f"line {lineno}: bad origin {value!r}") from None
                origin = (r, c)
            continue
        try:
            rows.append([float(v) for v in line.split(",")])
        except ValueError:
            raise FormatError(f"line {lineno}: non-numeric height") from None

    if pitch is None:
        raise UnitError("missing '# pitch_m=' header")
    if not rows:
        raise FormatError("no height data")
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise FormatError(f"ragged raster: row {i} has {len(row)} values, expected {width}")
    return HeightMap(np.array(rows), pitch, origin)


def format_height_map(hmap: HeightMap) -> str:
    lines = [f"# pitch_m={hmap.pixel_pitch!r}", f"# origin={hmap.origin[0]!r},{hmap.origin[1]!r}"]
    lines += [",".join(repr(float(v)) for v in row) for row in hmap.heights]
    return "\n".join(lines) + "\n"


# -- line cuts and fits -----------------------------------------------------

def _biquadratic(z, rows, cols):
    # 3x3 Lagrange stencil around the nearest node; exact for quadratic surfaces
    n_rows, n_cols = z.shape
    i0 = np.clip(np.rint(rows).astype(int), 1, n_rows - 2)
    j0 = np.clip(np.rint(cols).astype(int), 1, n_cols - 2)
    u = rows - i0
    v = cols - j0
    wu = (0.5 * u * (u - 1.0), (1.0 - u) * (1.0 + u), 0.5 * u * (u + 1.0))
    wv = (0.5 * v * (v - 1.0), (1.0 - v) * (1.0 + v), 0.5 * v * (v + 1.0))
    # weights sum to one, so interpolate differences from the centre node;
    # a constant surface then comes back exactly
    zc = z[i0, j0]
    out = np.zeros_like(rows)
    for a in range(3):
        for b in range(3):
            out += wu[a] * wv[b] * (z[i0 + a - 1, j0 + b - 1] - zc)
    return zc + out


def radial_linecut(hmap: HeightMap, angle: float, r_max: float, n_samples: int = 61,
                   method: str = "biquadratic"):
    """Interpolated ``(r, z)`` samples along a ray from the origin.

    ``method`` is ``"bilinear"`` or ``"biquadratic"``. Bilinear interpolation
    overestimates a curved surface between nodes, which biases the fitted
    curvature by up to a few percent when ``r_max`` spans only ~10 pixels;
    the biquadratic stencil reproduces quadratic surfaces exactly.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    if method not in ("bilinear", "biquadratic"):
        raise ValueError(f"unknown interpolation method {method!r}")
    r = np.linspace(0.0, r_max, n_samples)
    rows = hmap.origin[0] + r * math.sin(angle) / hmap.pixel_pitch
    cols = hmap.origin[1] + r * math.cos(angle) / hmap.pixel_pitch
    n_rows, n_cols = hmap.shape
    eps = 1e-9
    if (rows.min() < -eps or cols.min() < -eps
            or rows.max() > n_rows - 1 + eps or cols.max() > n_cols - 1 + eps):
        raise OutOfBounds(f"ray at {math.degrees(angle):.3f} deg leaves the raster before r_max")
    rows = np.clip(rows, 0, n_rows - 1)
    cols = np.clip(cols, 0, n_cols - 1)
    if method == "biquadratic" and min(n_rows, n_cols) >= 3:
        z = _biquadratic(hmap.heights, rows, cols)
    else:
        z = map_coordinates(hmap.heights, [rows, cols], order=1, mode="nearest")
    return np.column_stack([r, z])


def local_roc(linecut) -> float:
    """Radius of curvature from a parabola ``z = a r^2 + b r + c``: ``1 / (2a)``."""
    cut = np.asarray(linecut, dtype=float)
    if cut.ndim != 2 or cut.shape[0] < 5:
        raise ValueError("need at least 5 (r, z) samples")
    a, _, _ = np.polyfit(cut[:, 0], cut[:, 1], 2)
    if abs(a) < FLAT_CURVATURE:
        raise FlatSurface(f"quadratic coefficient {a:.3g} 1/m is below {FLAT_CURVATURE}")
    return 1.0 / (2.0 * a)


def roc_vs_angle(hmap: HeightMap, angles, r_max: float = 15e-6, n_samples: int = 61,
                 method: str = "biquadratic") -> RocProfile:
    """Local ROC along rays at each angle.

    Rays that leave the raster or see no curvature are recorded with a NaN
    radius and the error message at the same index of ``errors``.
    """
    angles = [float(a) % (2.0 * math.pi) for a in angles]
    rocs, errors = [], []
    for angle in angles:
        try:
            rocs.append(local_roc(radial_linecut(hmap, angle, r_max, n_samples, method)))
            errors.append(None)
        except (OutOfBounds, FlatSurface) as exc:
            rocs.append(math.nan)
            errors.append(f"{type(exc).__name__}: {exc}")
    return RocProfile(tuple(angles), tuple(rocs), r_max, tuple(errors))


def default_angles(step_deg: float = 5.0):
    n = int(round(360.0 / step_deg))
    return [math.radians(i * step_deg) for i in range(n)]


def astigmatic_surface(shape, pixel_pitch, roc_x, roc_y, *, origin=None, rotation=0.0):
    """Height map ``x'^2 / 2R_x + y'^2 / 2R_y`` with principal axes rotated by ``rotation``."""
    n_rows, n_cols = shape
    if origin is None:
        origin = ((n_rows - 1) / 2.0, (n_cols - 1) / 2.0)
    rr, cc = np.mgrid[0:n_rows, 0:n_cols]
    y = (rr - origin[0]) * pixel_pitch
    x = (cc - origin[1]) * pixel_pitch
    c, s = math.cos(rotation), math.sin(rotation)
    xp = c * x + s * y
    yp = -s * x + c * y
    return HeightMap(xp**2 / (2 * roc_x) + yp**2 / (2 * roc_y), pixel_pitch, origin)


def sectional_roc(angle, roc_a, roc_b):
    """ROC along ``angle`` for a quadratic surface with principal radii ``roc_a`` (x) and ``roc_b`` (y)."""
    return 1.0 / (math.cos(angle) ** 2 / roc_a + math.sin(angle) ** 2 / roc_b)


# -- splitting --------------------------------------------------------------

def predict_polarization_splitting(geom: CavityGeometry) -> float:
    """Polarization splitting of the fundamental mode in Hz.

    ``lambda c (1/R_minor - 1/R_major) / (8 pi^2 L)``.

    Raises
    ------
    UnstableCavity
        If ``roc_second`` is given and either principal plane fails
        ``0 < g1 g2 < 1``.
    """
    if geom.roc_second is not None:
        g2 = 1.0 - geom.length / geom.roc_second
        for roc in (geom.roc_minor, geom.roc_major):
            g1 = 1.0 - geom.length / roc
            if not 0.0 < g1 * g2 < 1.0:
                raise UnstableCavity(f"g1*g2 = {g1 * g2:.4g} for mirror ROC {roc} m")
    return (geom.wavelength * CONSTANTS.c / (8.0 * math.pi**2 * geom.length)
            * (1.0 / geom.roc_minor - 1.0 / geom.roc_major))
