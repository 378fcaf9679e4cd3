"""Collocation point clouds for the two benchmark geometries.

The solver works on a uniform Cartesian lattice covering the union of the
physical domain and its surrounding interaction layer.  Each lattice point
carries a region label:

* ``INTERIOR`` -- inside the open physical domain, where the nonlocal
  equation is collocated;
* ``OMEGA_LOC`` -- the part of the interaction layer where only local
  (surface) boundary data are available and converted constraints are
  imposed;
* ``OMEGA_NLOC`` -- the rest of the layer, where nonlocal Dirichlet data
  are prescribed directly.

Two domain shapes are supported: the unit square with a layer of one
horizon (scalar diffusion) and an annulus with a layer of two horizons
(peridynamics, whose operator composes two horizon-radius integrals).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigurationError, DomainError

INTERIOR = 0
OMEGA_LOC = 1
OMEGA_NLOC = 2

REGION_NAMES = {INTERIOR: "interior", OMEGA_LOC: "omega_loc", OMEGA_NLOC: "omega_nloc"}

# Lattice points this close to the outer boundary (relative to h) are kept;
# points this close to the physical boundary are assigned to the layer.
BOUNDARY_REL_TOL = 1e-12


@dataclass(frozen=True)
class SquareWithLayer:
    """Unit square ``(0, side)^2`` with an interaction layer of one horizon.

    ``loc_mode`` selects where converted constraints live: the whole layer
    (``"full_layer"``) or only the strip ``[side, side+horizon] x [0, side]``
    on the right edge (``"right_strip"``).
    """

    horizon: float
    loc_mode: str = "full_layer"
    side: float = 1.0

    def __post_init__(self):
        if self.horizon <= 0:
            raise ConfigurationError("horizon must be positive")
        if self.loc_mode not in ("full_layer", "right_strip"):
            raise ConfigurationError(f"unknown loc_mode {self.loc_mode!r}")

    @property
    def layer_thickness(self) -> float:
        return self.horizon

    def bounding_box(self):
        t = self.layer_thickness
        return (-t, -t), (self.side + t, self.side + t)

    def _dist_to_core(self, pts: NDArray) -> NDArray:
        """Euclidean distance to the closed square (0 inside)."""
        dx = np.maximum(np.maximum(-pts[:, 0], pts[:, 0] - self.side), 0.0)
        dy = np.maximum(np.maximum(-pts[:, 1], pts[:, 1] - self.side), 0.0)
        return np.hypot(dx, dy)

    def contains(self, pts: NDArray, tol: float) -> NDArray:
        return self._dist_to_core(pts) <= self.layer_thickness + tol

    def classify(self, pts: NDArray, tol: float) -> NDArray:
        labels = np.full(len(pts), OMEGA_NLOC, dtype=np.int8)
        x, y = pts[:, 0], pts[:, 1]
        interior = (x > tol) & (x < self.side - tol) & (y > tol) & (y < self.side - tol)
        labels[interior] = INTERIOR
        if self.loc_mode == "full_layer":
            labels[~interior] = OMEGA_LOC
        else:
            strip = (
                ~interior
                & (x >= self.side - tol)
                & (x <= self.side + self.horizon + tol)
                & (y >= -tol)
                & (y <= self.side + tol)
            )
            labels[strip] = OMEGA_LOC
        return labels

    def ball_inside(self, centers: NDArray, radius: float) -> NDArray:
        """True where the open ball of ``radius`` stays inside the extended domain."""
        return self._dist_to_core(centers) + radius <= self.layer_thickness

    def ray_intervals(self, center: NDArray, angles: NDArray, radius: float) -> NDArray:
        """Radial intervals of the extended domain along rays from ``center``.

        Returns an array of shape ``(len(angles), 2, 2)``: up to two
        ``[lo, hi]`` intervals per ray of ``{r in [0, radius]: center + r*n
        inside the extended domain}``.  The extended square is convex, so a
        single interval ``[0, R]`` suffices; the exit radius ``R`` is the
        smallest positive ray intersection with the offset sides or the
        rounded corner arcs.
        """
        t = self.layer_thickness
        nx, ny = np.cos(angles), np.sin(angles)
        cx, cy = float(center[0]), float(center[1])
        r_exit = np.full(len(angles), np.inf)

        # Offset side lines; a hit is valid only on the flat part of the side
        # and only when the ray moves outward through it (handles centers
        # sitting exactly on the boundary).
        for axis, bound, sign_out in (
            (0, -t, -1.0),
            (0, self.side + t, 1.0),
            (1, -t, -1.0),
            (1, self.side + t, 1.0),
        ):
            n = nx if axis == 0 else ny
            c = cx if axis == 0 else cy
            with np.errstate(divide="ignore", invalid="ignore"):
                r = (bound - c) / n
            other = (cy + r * ny) if axis == 0 else (cx + r * nx)
            ok = (
                (r >= 0)
                & np.isfinite(r)
                & (sign_out * n > 0)
                & (other >= 0.0)
                & (other <= self.side)
            )
            r_exit = np.where(ok & (r < r_exit), r, r_exit)

        # Rounded corner arcs: circles of radius t around the four corners.
        for corner in ((0.0, 0.0), (self.side, 0.0), (0.0, self.side), (self.side, self.side)):
            px, py = cx - corner[0], cy - corner[1]
            b = px * nx + py * ny
            c0 = px * px + py * py - t * t
            disc = b * b - c0
            sq = np.sqrt(np.maximum(disc, 0.0))
            for r in (-b - sq, -b + sq):
                hx = cx + r * nx - corner[0]
                hy = cy + r * ny - corner[1]
                # valid only in the corner's exterior quadrant, moving outward
                sx = 1.0 if corner[0] > 0 else -1.0
                sy = 1.0 if corner[1] > 0 else -1.0
                ok = (
                    (disc >= 0)
                    & (r >= 0)
                    & (sx * hx >= 0)
                    & (sy * hy >= 0)
                    & (nx * hx + ny * hy > 0)
                )
                r_exit = np.where(ok & (r < r_exit), r, r_exit)

        out = np.zeros((len(angles), 2, 2))
        out[:, 0, 1] = np.minimum(r_exit, radius)
        return out


@dataclass(frozen=True)
class AnnulusWithLayer:
    """Annulus ``r_inner < |x| < r_outer`` with a layer of two horizons.

    ``loc_mode`` is ``"full_layer"`` (both rings) or ``"inner_ring"`` (the
    ring ``r_inner - 2*horizon <= |x| <= r_inner`` only).
    """

    horizon: float
    loc_mode: str = "full_layer"
    r_inner: float = 1.0
    r_outer: float = 1.5

    def __post_init__(self):
        if self.horizon <= 0:
            raise ConfigurationError("horizon must be positive")
        if not self.r_inner < self.r_outer:
            raise ConfigurationError("r_inner must be smaller than r_outer")
        if self.r_inner - self.layer_thickness <= 0:
            raise ConfigurationError("interaction layer swallows the hole")
        if self.loc_mode not in ("full_layer", "inner_ring"):
            raise ConfigurationError(f"unknown loc_mode {self.loc_mode!r}")

    @property
    def layer_thickness(self) -> float:
        return 2.0 * self.horizon

    @property
    def rad_lo(self) -> float:
        return self.r_inner - self.layer_thickness

    @property
    def rad_hi(self) -> float:
        return self.r_outer + self.layer_thickness

    def bounding_box(self):
        return (-self.rad_hi, -self.rad_hi), (self.rad_hi, self.rad_hi)

    def contains(self, pts: NDArray, tol: float) -> NDArray:
        r = np.hypot(pts[:, 0], pts[:, 1])
        return (r >= self.rad_lo - tol) & (r <= self.rad_hi + tol)

    def classify(self, pts: NDArray, tol: float) -> NDArray:
        r = np.hypot(pts[:, 0], pts[:, 1])
        labels = np.full(len(pts), OMEGA_NLOC, dtype=np.int8)
        interior = (r > self.r_inner + tol) & (r < self.r_outer - tol)
        labels[interior] = INTERIOR
        if self.loc_mode == "full_layer":
            labels[~interior] = OMEGA_LOC
        else:
            labels[~interior & (r <= self.r_inner + tol)] = OMEGA_LOC
        return labels

    def ball_inside(self, centers: NDArray, radius: float) -> NDArray:
        r = np.hypot(centers[:, 0], centers[:, 1])
        return (r - radius >= self.rad_lo) & (r + radius <= self.rad_hi)

    def ray_intervals(self, center: NDArray, angles: NDArray, radius: float) -> NDArray:
        """Radial intervals of the extended annulus along rays from ``center``.

        ``|center + r n|^2`` is quadratic in ``r``; the admissible set is
        ``{f(r) <= rad_hi^2}`` minus the open hole ``{f(r) < rad_lo^2}``,
        i.e. at most two intervals per ray.
        """
        nx, ny = np.cos(angles), np.sin(angles)
        cx, cy = float(center[0]), float(center[1])
        b = cx * nx + cy * ny
        c2 = cx * cx + cy * cy

        def roots(rad):
            disc = b * b - (c2 - rad * rad)
            sq = np.sqrt(np.maximum(disc, 0.0))
            return disc, -b - sq, -b + sq

        disc_hi, _, hi_exit = roots(self.rad_hi)
        # center is inside the outer disc, so exit radius is the + root
        r_out = np.where(disc_hi >= 0, np.maximum(hi_exit, 0.0), 0.0)
        r_out = np.minimum(r_out, radius)

        disc_lo, lo_in, lo_out = roots(self.rad_lo)
        hole = disc_lo > 0  # the ray actually crosses the hole

        out = np.zeros((len(angles), 2, 2))
        # interval 1: [0, min(r_out, entry-into-hole)]
        a1 = np.zeros_like(r_out)
        b1 = np.where(hole, np.clip(lo_in, 0.0, r_out), r_out)
        # interval 2: [exit-from-hole, r_out] when the hole is crossed inside range
        a2 = np.where(hole, np.clip(lo_out, 0.0, r_out), 0.0)
        b2 = np.where(hole & (lo_out < r_out), r_out, a2)
        out[:, 0, 0], out[:, 0, 1] = a1, np.maximum(b1, 0.0)
        out[:, 1, 0], out[:, 1, 1] = a2, np.maximum(b2, a2)
        return out


DomainShape = Union[SquareWithLayer, AnnulusWithLayer]


@dataclass(frozen=True)
class PointCloud:
    """Immutable uniform-lattice point cloud over the extended domain.

    ``lattice_ids`` is the uniform-bin spatial index: a dense map from
    integer lattice coordinates (offset by ``lattice_min``) to point ids,
    -1 for lattice cells outside the cloud.  Radius queries gather the
    square of bins covering the search disc.
    """

    domain: DomainShape
    h: float
    points: NDArray = field(repr=False)
    labels: NDArray = field(repr=False)
    lattice_min: NDArray = field(repr=False)
    lattice_ids: NDArray = field(repr=False)

    def __post_init__(self):
        for arr in (self.points, self.labels, self.lattice_min, self.lattice_ids):
            arr.setflags(write=False)

    @property
    def n_points(self) -> int:
        return len(self.points)

    def counts(self) -> dict:
        return {
            name: int(np.count_nonzero(self.labels == code))
            for code, name in REGION_NAMES.items()
        }

    def ids_of_region(self, label: int) -> NDArray:
        return np.flatnonzero(self.labels == label)

    def lattice_lookup(self, coords: NDArray) -> NDArray:
        """Point ids for integer lattice coordinates, -1 when absent."""
        shifted = coords - self.lattice_min
        ok = np.all((shifted >= 0) & (shifted < self.lattice_ids.shape), axis=-1)
        ids = np.full(coords.shape[:-1], -1, dtype=np.int64)
        sx = shifted[ok]
        ids[ok] = self.lattice_ids[sx[:, 0], sx[:, 1]]
        return ids


def lattice_offsets(radius: float, h: float) -> NDArray:
    """Integer offsets ``k`` with ``0 < |k*h| < radius`` (strict), sorted."""
    n = int(np.ceil(radius / h))
    k1, k2 = np.meshgrid(np.arange(-n, n + 1), np.arange(-n, n + 1), indexing="ij")
    k = np.stack([k1.ravel(), k2.ravel()], axis=1)
    d2 = (k[:, 0].astype(float) ** 2 + k[:, 1].astype(float) ** 2) * h * h
    keep = (d2 > 0) & (d2 < radius * radius)
    return k[keep]


def build_point_cloud(domain: DomainShape, h: float) -> PointCloud:
    """Enumerate the lattice ``{(k1 h, k2 h)}`` inside the extended domain.

    Points within ``1e-12 * h`` of the outer boundary are kept; points
    within the same tolerance of the physical boundary belong to the layer.
    """
    if h <= 0:
        raise ConfigurationError("spacing h must be positive")
    if domain.horizon / h < 1.0:
        raise ConfigurationError("horizon must be at least one lattice spacing")
    tol = BOUNDARY_REL_TOL * h
    (lo_x, lo_y), (hi_x, hi_y) = domain.bounding_box()
    k1 = np.arange(int(np.ceil((lo_x - tol) / h)), int(np.floor((hi_x + tol) / h)) + 1)
    k2 = np.arange(int(np.ceil((lo_y - tol) / h)), int(np.floor((hi_y + tol) / h)) + 1)
    kk1, kk2 = np.meshgrid(k1, k2, indexing="ij")
    coords = np.stack([kk1.ravel(), kk2.ravel()], axis=1)
    pts = coords * h
    inside = domain.contains(pts, tol)
    if not np.any(inside):
        raise ConfigurationError("no lattice points fall inside the domain; h too large")
    coords, pts = coords[inside], pts[inside]
    labels = domain.classify(pts, tol)

    kmin = coords.min(axis=0)
    shape = coords.max(axis=0) - kmin + 1
    ids = np.full(shape, -1, dtype=np.int64)
    shifted = coords - kmin
    ids[shifted[:, 0], shifted[:, 1]] = np.arange(len(pts))
    return PointCloud(
        domain=domain,
        h=h,
        points=pts,
        labels=labels,
        lattice_min=kmin,
        lattice_ids=ids,
    )


def classify_point(domain: DomainShape, x) -> int:
    """Region label of a single point; raises ``DomainError`` outside."""
    pt = np.asarray(x, dtype=float).reshape(1, 2)
    tol = BOUNDARY_REL_TOL
    if not domain.contains(pt, tol)[0]:
        raise DomainError(f"point {tuple(pt[0])} lies outside the extended domain")
    return int(domain.classify(pt, tol)[0])


def neighbors_within(cloud: PointCloud, i: int, radius: float) -> NDArray:
    """Indices ``j`` with ``0 < |x_j - x_i| < radius``, ascending."""
    offs = lattice_offsets(radius, cloud.h)
    base = np.round(cloud.points[i] / cloud.h).astype(np.int64)
    ids = cloud.lattice_lookup(base + offs)
    ids = ids[ids >= 0]
    d = np.linalg.norm(cloud.points[ids] - cloud.points[i], axis=1)
    ids = ids[(d > 0) & (d < radius)]
    return np.sort(ids)


def neighbor_table(cloud: PointCloud, point_ids: NDArray, radius: float):
    """CSR neighbor lists for many points at once.

    Returns ``(indptr, cols)`` where ``cols[indptr[k]:indptr[k+1]]`` are the
    ascending neighbor ids of ``point_ids[k]`` within the strict radius.
    """
    offs = lattice_offsets(radius, cloud.h)
    base = np.round(cloud.points[point_ids] / cloud.h).astype(np.int64)
    cand = base[:, None, :] + offs[None, :, :]
    ids = cloud.lattice_lookup(cand.reshape(-1, 2)).reshape(len(point_ids), -1)
    centers = cloud.points[point_ids]
    ok = ids >= 0
    safe = np.where(ok, ids, 0)
    d = np.linalg.norm(cloud.points[safe] - centers[:, None, :], axis=2)
    ok &= (d > 0) & (d < radius)
    counts = ok.sum(axis=1)
    indptr = np.concatenate([[0], np.cumsum(counts)])
    masked = np.where(ok, ids, np.iinfo(np.int64).max)
    masked.sort(axis=1)
    keep = np.arange(masked.shape[1])[None, :] < counts[:, None]
    cols = masked[keep]
    return indptr, cols
