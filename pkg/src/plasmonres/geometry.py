"""
Boundary geometries and their quadrature discretizations.

2D boundaries are closed analytic curves with a global 2pi-periodic
parameterization x(t). They are discretized with equispaced-in-parameter
trapezoid nodes, which integrate analytic periodic integrands with
spectral accuracy. The sphere is a descriptor only: all 3D work is done
spectrally in a spherical-harmonic basis and needs no surface mesh.

Interior point sets are regular grids clipped to the domain with a
buffer distance from the boundary; they serve as independent quadrature
for volume-integral cross checks.
"""

import numpy as np
from dataclasses import dataclass

__all__ = [
    "BoundaryCurve",
    "NodeSet",
    "InteriorPointSet",
    "make_curve",
    "quadrature_nodes",
    "interior_points",
]

_2D_KINDS = ("circle", "ellipse", "kite")

# coefficients of the standard smooth kite curve
_KITE_A = 0.65
_KITE_B = 1.5


@dataclass(frozen=True)
class BoundaryCurve:
    """
    Closed C^2 boundary curve (2D) or sphere descriptor (3D).

    Curves are oriented counter-clockwise; the outward unit normal is
    nu(t) = (x2'(t), -x1'(t)) / |x'(t)|.

    Attributes
    ----------
    kind : str
        One of 'circle', 'ellipse', 'kite', 'sphere'.
    params : dict
        Geometry parameters (circle/sphere: radius; ellipse: a, b).
    """

    kind: str
    params: dict

    @property
    def dim(self):
        return 3 if self.kind == "sphere" else 2

    def point(self, t):
        """Parameterization x(t), shape (len(t), 2)."""
        return self._eval(t, 0)

    def derivative(self, t):
        """First derivative x'(t)."""
        return self._eval(t, 1)

    def second_derivative(self, t):
        """Second derivative x''(t)."""
        return self._eval(t, 2)

    def _eval(self, t, order):
        if self.kind == "sphere":
            raise ValueError("sphere has no curve parameterization; 3D work is spectral")
        t = np.asarray(t, dtype=float)
        if self.kind == "circle":
            r = self.params["radius"]
            c, s = np.cos(t), np.sin(t)
            comps = [(r * c, r * s), (-r * s, r * c), (-r * c, -r * s)]
        elif self.kind == "ellipse":
            a, b = self.params["a"], self.params["b"]
            c, s = np.cos(t), np.sin(t)
            comps = [(a * c, b * s), (-a * s, b * c), (-a * c, -b * s)]
        else:  # kite
            c, s = np.cos(t), np.sin(t)
            c2, s2 = np.cos(2 * t), np.sin(2 * t)
            comps = [
                (c + _KITE_A * (c2 - 1.0), _KITE_B * s),
                (-s - 2.0 * _KITE_A * s2, _KITE_B * c),
                (-c - 4.0 * _KITE_A * c2, -_KITE_B * s),
            ]
        return np.stack(comps[order], axis=-1)


@dataclass(frozen=True)
class NodeSet:
    """
    Trapezoid quadrature nodes on a 2D boundary curve.

    weights carry the arclength measure: w_j = (2 pi / N) |x'(t_j)|, so
    sum(w) approximates the perimeter to spectral accuracy.
    """

    curve: BoundaryCurve
    t: np.ndarray           # parameter values, shape (N,)
    points: np.ndarray      # x(t_j), shape (N, 2)
    jacobians: np.ndarray   # |x'(t_j)|, shape (N,)
    weights: np.ndarray     # arclength weights, shape (N,)
    normals: np.ndarray     # outward unit normals, shape (N, 2)
    curvatures: np.ndarray  # signed curvature kappa(t_j), shape (N,)

    @property
    def n(self):
        return self.t.size

    @property
    def perimeter(self):
        return float(np.sum(self.weights))

    @property
    def spacing(self):
        """Maximum arclength spacing between adjacent nodes."""
        return float(np.max(self.jacobians)) * 2.0 * np.pi / self.n


@dataclass(frozen=True)
class InteriorPointSet:
    """Regular-grid quadrature points inside the domain, buffered from the boundary."""

    points: np.ndarray   # shape (M, 2)
    weights: np.ndarray  # cell areas, shape (M,)
    buffer: float


def make_curve(kind, **params):
    """
    Construct a boundary geometry.

    Parameters
    ----------
    kind : str
        'circle' (radius), 'ellipse' (a, b with a >= b), 'kite' (no
        parameters; standard coefficients), or 'sphere' (radius).
    """
    if kind in ("circle", "sphere"):
        radius = float(params.pop("radius", 1.0))
        if params:
            raise ValueError(f"unexpected parameters for {kind}: {sorted(params)}")
        if radius <= 0:
            raise ValueError(f"{kind} radius must be positive, got {radius}")
        return BoundaryCurve(kind, {"radius": radius})
    if kind == "ellipse":
        a = float(params.pop("a"))
        b = float(params.pop("b"))
        if params:
            raise ValueError(f"unexpected parameters for ellipse: {sorted(params)}")
        if b <= 0 or a < b:
            raise ValueError(f"ellipse requires a >= b > 0, got a={a}, b={b}")
        return BoundaryCurve(kind, {"a": a, "b": b})
    if kind == "kite":
        if params:
            raise ValueError(f"kite takes no parameters, got {sorted(params)}")
        return BoundaryCurve(kind, {})
    raise ValueError(f"unknown geometry kind {kind!r}")


def quadrature_nodes(curve, n):
    """
    Equispaced-in-parameter trapezoid nodes with arclength weights.

    Parameters
    ----------
    curve : BoundaryCurve
        2D curve kind.
    n : int
        Node count, even and >= 16.
    """
    if curve.dim != 2:
        raise ValueError("quadrature_nodes requires a 2D curve")
    if n % 2 != 0 or n < 16:
        raise ValueError(f"node count must be even and >= 16, got {n}")
    t = 2.0 * np.pi * np.arange(n) / n
    x = curve.point(t)
    dx = curve.derivative(t)
    ddx = curve.second_derivative(t)
    jac = np.hypot(dx[:, 0], dx[:, 1])
    normals = np.stack([dx[:, 1], -dx[:, 0]], axis=-1) / jac[:, None]
    curv = (dx[:, 0] * ddx[:, 1] - dx[:, 1] * ddx[:, 0]) / jac**3
    weights = (2.0 * np.pi / n) * jac
    return NodeSet(curve, t, x, jac, weights, normals, curv)


def _inside_polygon(points, poly):
    """Even-odd ray casting against a closed polygon, vectorized over points."""
    x, y = points[:, 0], points[:, 1]
    x0, y0 = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    # edge straddles the horizontal line through y; crossing strictly left of x
    straddle = (y0[None, :] > y[:, None]) != (y1[None, :] > y[:, None])
    with np.errstate(divide="ignore", invalid="ignore"):
        xcross = x0[None, :] + (y[:, None] - y0[None, :]) * (x1 - x0)[None, :] / (y1 - y0)[None, :]
    hits = straddle & (xcross > x[:, None])
    return (np.sum(hits, axis=1) % 2) == 1


def interior_points(curve, h, buffer, n_boundary=512):
    """
    Regular grid of interior quadrature points with weight h^2 each,
    keeping only points at distance >= buffer from the boundary.

    Raises ValueError if no point survives (buffer exceeds the inradius).
    """
    if h <= 0 or buffer <= 0:
        raise ValueError("h and buffer must be positive")
    if curve.dim != 2:
        raise ValueError("interior_points requires a 2D curve")
    tb = 2.0 * np.pi * np.arange(n_boundary) / n_boundary
    poly = curve.point(tb)
    lo = poly.min(axis=0)
    hi = poly.max(axis=0)
    gx = np.arange(lo[0] + h / 2, hi[0], h)
    gy = np.arange(lo[1] + h / 2, hi[1], h)
    xx, yy = np.meshgrid(gx, gy, indexing="ij")
    pts = np.stack([xx.ravel(), yy.ravel()], axis=-1)
    inside = _inside_polygon(pts, poly)
    pts = pts[inside]
    if pts.size:
        from scipy.spatial import cKDTree

        dist, _ = cKDTree(poly).query(pts)
        pts = pts[dist >= buffer]
    if pts.shape[0] == 0:
        raise ValueError(f"no interior points at distance >= {buffer}; buffer exceeds inradius")
    return InteriorPointSet(pts, np.full(pts.shape[0], h * h), float(buffer))
