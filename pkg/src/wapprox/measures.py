"""Discrete measures, logarithmic potentials/energies, and the closed-form
conformal-map machinery for the segment weight W(z) = z.

Discrete self-energy uses the Riemann-sum correction for the log kernel: a
cell of size h carrying unit mass contributes 3/2 - log h (the exact double
integral of log(1/|s-t|) over a unit cell, scaled).  Cross-checked against
the closed-form circle and segment equilibria.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree


def self_energy_term(h):
    """Regularized self-interaction of unit mass spread over a cell of size h."""
    return 1.5 - np.log(h)


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely supported positive measure: points + nonnegative masses.

    Duplicate points are merged on construction (masses summed).
    """

    points: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex).ravel()
        ms = np.asarray(self.masses, dtype=float).ravel()
        if pts.shape != ms.shape:
            raise ValueError("points and masses must have equal length")
        if np.any(ms < 0):
            raise ValueError("masses must be nonnegative")
        uniq, inv = np.unique(pts, return_inverse=True)
        if len(uniq) != len(pts):
            merged = np.zeros(len(uniq))
            np.add.at(merged, inv, ms)
            pts, ms = uniq, merged
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "masses", ms)

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def is_probability(self, tol: float = 1e-12) -> bool:
        return abs(self.total_mass - 1.0) <= tol

    def mean(self) -> complex:
        return complex((self.points * self.masses).sum() / self.total_mass)

    # ---- serialization: CSV columns re,im,mass and a JSON mirror ----

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["re", "im", "mass"])
        for p, m in zip(self.points, self.masses):
            w.writerow([repr(p.real), repr(p.imag), repr(m)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DiscreteMeasure":
        rows = list(csv.reader(io.StringIO(text)))
        pts = [complex(float(r[0]), float(r[1])) for r in rows[1:]]
        ms = [float(r[2]) for r in rows[1:]]
        return cls(np.array(pts), np.array(ms))

    def to_json(self) -> str:
        return json.dumps({
            "re": [p.real for p in self.points],
            "im": [p.imag for p in self.points],
            "mass": list(map(float, self.masses)),
        })

    @classmethod
    def from_json(cls, text: str) -> "DiscreteMeasure":
        d = json.loads(text)
        pts = np.array(d["re"], dtype=float) + 1j * np.array(d["im"], dtype=float)
        return cls(pts, np.array(d["mass"], dtype=float))


def log_potential(nu: DiscreteMeasure, z: complex) -> float:
    """U^nu(z) = sum m_i log 1/|z - p_i|; +inf when z hits a positive atom."""
    d = np.abs(complex(z) - nu.points)
    hit = d == 0
    if np.any(hit & (nu.masses > 0)):
        return math.inf
    keep = ~hit
    return float(-(nu.masses[keep] * np.log(d[keep])).sum())


def potential_grid(nu: DiscreteMeasure, Z: np.ndarray) -> np.ndarray:
    """Vectorized U^nu over an array of evaluation points (+inf on atoms)."""
    Z = np.asarray(Z, dtype=complex)
    flat = Z.ravel()
    out = np.zeros(flat.shape, dtype=float)
    # chunked to bound the (points x eval) distance matrix
    step = max(1, int(2e6 / max(1, len(nu.points))))
    for k in range(0, len(flat), step):
        d = np.abs(flat[k:k + step, None] - nu.points[None, :])
        with np.errstate(divide="ignore"):
            ld = np.log(d)
        block = -(ld * nu.masses[None, :])
        hit = np.isinf(block) & (nu.masses[None, :] == 0)
        block = np.where(hit, 0.0, block)
        out[k:k + step] = block.sum(axis=1)
    return out.reshape(Z.shape)


def nearest_neighbor_spacing(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=complex)
    xy = np.column_stack([pts.real, pts.imag])
    if len(pts) == 1:
        return np.array([1.0])
    tree = cKDTree(xy)
    d, _ = tree.query(xy, k=2)
    return d[:, 1]


def weighted_energy(tau: DiscreteMeasure, Q_at: Callable) -> float:
    """Discrete weighted energy I^w(tau) = I(tau) + 2 * integral of Q d(tau).

    The interaction sum runs over distinct pairs; the diagonal uses the
    nearest-neighbor cell regularization.  Q_at is evaluated on the support.
    """
    pts, ms = tau.points, tau.masses
    q = np.array([float(Q_at(p)) for p in pts])
    if not np.all(np.isfinite(q)):
        raise ValueError("Q must be finite on the support")
    D = np.abs(pts[:, None] - pts[None, :])
    np.fill_diagonal(D, 1.0)
    if np.any(D == 0):
        raise ValueError("duplicate support points")
    A = -np.log(D)
    np.fill_diagonal(A, self_energy_term(nearest_neighbor_spacing(pts)))
    return float(ms @ A @ ms + 2.0 * q @ ms)


# ---------------------------------------------------------------------------
# Segment K = [c, 1] with weight w(z) = |z|: exterior conformal map, Green
# functions with pole at 0 / infinity, and the incomplete-polynomial level
# function whose sublevel lobes reproduce the two-curves-then-merge picture.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SegmentGeometry:
    """K = [c, 1] on the real axis, 0 < c < 1."""

    c: float

    def __post_init__(self):
        if not 0.0 < self.c < 1.0:
            raise ValueError("need 0 < c < 1")


def phi_segment(z, geom: SegmentGeometry):
    """Exterior conformal map C \\ [c,1] -> C \\ closed unit disk.

    phi(z) = (2/(1-c)) [z - (1+c)/2 + sqrt((z-c)(z-1))], branch fixed by
    sqrt((z-c)(z-1)) ~ z at infinity.  Boundary values are limits from above.
    """
    c = geom.c
    z = np.asarray(z, dtype=complex)
    s = np.sqrt((z - c) * (z - 1))
    mid = 0.5 * (1 + c)
    # wrong branch iff s has negative projection on (z - mid)
    flip = (s.real * (z.real - mid) + s.imag * z.imag) < 0
    s = np.where(flip, -s, s)
    out = (2.0 / (1 - c)) * (z - mid + s)
    return out if out.shape else complex(out)


def green_segment(z, pole, geom: SegmentGeometry):
    """Green function of C \\ [c,1] with pole at 0 or infinity.

    pole=inf: log|phi(z)|.  pole=0: log|(1 - conj(phi(0)) phi(z)) /
    (phi(z) - phi(0))|.  Nonnegative off the segment, 0 on it, +inf at the pole.
    """
    p = phi_segment(z, geom)
    scalar = np.ndim(p) == 0
    p = np.atleast_1d(np.asarray(p, dtype=complex))
    if pole == math.inf or (isinstance(pole, float) and math.isinf(pole)):
        out = np.log(np.abs(p))
    elif pole == 0:
        p0 = phi_segment(0.0, geom)
        num = np.abs(1 - np.conj(p0) * p)
        den = np.abs(p - p0)
        with np.errstate(divide="ignore"):
            out = np.where(den == 0, np.inf, np.log(np.where(den == 0, 1.0, num / den)))
    else:
        raise ValueError("only poles 0 and infinity are supported")
    return out if not scalar else float(out[0])


def incomplete_level_value(z, geom: SegmentGeometry):
    """g(z,0) - 2 g(z,infinity): level function of the weighted equilibrium
    problem for W(z)=z on [c,1], up to an additive constant."""
    return green_segment(z, 0, geom) - 2.0 * green_segment(z, math.inf, geom)


def segment_weighted_equilibrium(c: float, M: int) -> DiscreteMeasure:
    """Closed-form weighted equilibrium 2*mu_K - bal(delta_0) sampled at M
    Chebyshev nodes of [c, 1].

    Density against the arcsine measure is 2 - sqrt(c)/x, which is >= 0 on
    [c,1] exactly when c >= 1/4; this routine requires c > 1/4.
    """
    if not 0.25 < c < 1.0:
        raise ValueError("closed form needs 1/4 < c < 1")
    j = np.arange(M)
    x = (c + 1) / 2 + (1 - c) / 2 * np.cos(np.pi * (j + 0.5) / M)
    m = 2.0 - math.sqrt(c) / x
    m = m / m.sum()
    return DiscreteMeasure(np.sort(x).astype(complex), m[np.argsort(x)])


def balayage_identity_residual(geom: SegmentGeometry, eq_sol, test_points) -> float:
    """Max deviation of U^{mu_eq} from 2 U^{mu_K} - U^{delta_0} + g(.,0) + C.

    C is fitted at the first test point (the identity holds up to an additive
    constant, the balayage constant g(inf,0)).  eq_sol carries the computed
    weighted equilibrium measure of [c,1] with Q = -log|z|.
    """
    pts = np.asarray(test_points, dtype=complex)
    if len(pts) < 2:
        raise ValueError("need at least 2 test points")
    c = geom.c
    u = np.array([log_potential(eq_sol.measure, z) for z in pts])
    cap_term = math.log(4.0 / (1 - c))  # U^{mu_K} = -log|phi| + log(4/(1-c))
    bracket = (2.0 * (-green_segment(pts, math.inf, geom) + cap_term)
               + np.log(np.abs(pts))          # - U^{delta_0}
               + green_segment(pts, 0, geom))
    const = u[0] - bracket[0]
    return float(np.max(np.abs(u[1:] - bracket[1:] - const)))
