"""Numerical weighted equilibrium measures on discretized compacts.

The minimizer of the discrete weighted energy over the probability simplex is
found by Frank-Wolfe with away steps and exact line search; the FW duality
gap certifies the lower Frostman inequality and the away gap on the active
support certifies the upper one.  Weighted Leja sequences (the greedy Fekete
surrogate) provide an independent cross-check through the norm asymptotics
||w^n F_n||^(1/n) -> e^(-F).
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .measures import (DiscreteMeasure, log_potential, nearest_neighbor_spacing,
                       self_energy_term)

MASS_FLOOR_FACTOR = 10  # support threshold: total_mass / (10 M)


@dataclass(frozen=True)
class WeightedCompact:
    """Discretization of a compact K with weight values per node.

    Q_values[i] = -log(w_values[i]); local_spacing feeds the kernel diagonal
    regularization.  The set {w > 0} must be nonempty.
    """

    nodes: np.ndarray
    w_values: np.ndarray
    Q_values: np.ndarray
    local_spacing: np.ndarray
    label: str = ""

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=complex).ravel()
        w = np.asarray(self.w_values, dtype=float).ravel()
        q = np.asarray(self.Q_values, dtype=float).ravel()
        h = np.asarray(self.local_spacing, dtype=float).ravel()
        if not (len(nodes) == len(w) == len(q) == len(h)):
            raise ValueError("field lengths disagree")
        if np.any(h <= 0):
            raise ValueError("local_spacing must be positive")
        if not np.any(w > 0):
            raise ValueError("need at least one node with w > 0")
        pos = w > 0
        if np.max(np.abs(q[pos] + np.log(w[pos]))) > 1e-12:
            raise ValueError("Q_values must equal -log(w_values)")
        for name, val in (("nodes", nodes), ("w_values", w),
                          ("Q_values", q), ("local_spacing", h)):
            object.__setattr__(self, name, val)

    @property
    def size(self) -> int:
        return len(self.nodes)

    @classmethod
    def from_points(cls, points, weight: Callable, label: str = "",
                    spacing=None) -> "WeightedCompact":
        pts = np.asarray(points, dtype=complex).ravel()
        w = np.abs(np.asarray([weight(p) for p in pts], dtype=complex))
        with np.errstate(divide="ignore"):
            q = -np.log(w)
        h = nearest_neighbor_spacing(pts) if spacing is None else np.asarray(spacing, float)
        return cls(pts, w, q, h, label)

    def to_json(self) -> str:
        return json.dumps({
            "label": self.label,
            "re": self.nodes.real.tolist(), "im": self.nodes.imag.tolist(),
            "w": self.w_values.tolist(), "Q": self.Q_values.tolist(),
            "h": self.local_spacing.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "WeightedCompact":
        d = json.loads(text)
        nodes = np.array(d["re"]) + 1j * np.array(d["im"])
        return cls(nodes, np.array(d["w"]), np.array(d["Q"]), np.array(d["h"]),
                   d.get("label", ""))


def circle_compact(M: int, center: complex = 0.0, radius: float = 1.0,
                   weight: Callable | None = None, label: str = "circle") -> WeightedCompact:
    th = 2 * np.pi * (np.arange(M) + 0.5) / M
    pts = center + radius * np.exp(1j * th)
    h = np.full(M, 2 * radius * math.sin(math.pi / M))
    if weight is None:
        w = np.ones(M)
        q = np.zeros(M)
    else:
        w = np.abs(np.asarray([weight(p) for p in pts], dtype=complex))
        with np.errstate(divide="ignore"):
            q = -np.log(w)
    return WeightedCompact(pts, w, q, h, label)


def segment_compact(c: float, M: int, label: str = "segment") -> WeightedCompact:
    """K = [c,1] with W(z) = z, at Chebyshev (cos-spaced) nodes.

    Chebyshev spacing resolves the inverse-square-root endpoint behavior of
    the equilibrium density.
    """
    j = np.arange(M)
    x = np.sort((c + 1) / 2 + (1 - c) / 2 * np.cos(np.pi * (j + 0.5) / M))
    gaps = np.diff(x)
    h = np.empty(M)
    h[1:-1] = 0.5 * (gaps[:-1] + gaps[1:])
    h[0] = gaps[0]
    h[-1] = gaps[-1]
    return WeightedCompact(x.astype(complex), np.abs(x), -np.log(np.abs(x)), h, label)


@dataclass(frozen=True)
class EquilibriumSolution:
    """Minimizing measure with its Robin-type constant and diagnostics.

    F_const = V_w - integral of Q d(mu); node_potentials holds the kernel-
    regularized potential (A m) at every node of the input compact.
    """

    measure: DiscreteMeasure
    F_const: float
    V_w: float
    duality_gap: float
    iterations: int
    converged: bool
    node_potentials: np.ndarray = field(repr=False, default=None)
    node_Q: np.ndarray = field(repr=False, default=None)
    masses_on_nodes: np.ndarray = field(repr=False, default=None)

    def to_json(self) -> str:
        return json.dumps({
            "F_const": self.F_const, "V_w": self.V_w,
            "duality_gap": self.duality_gap, "iterations": self.iterations,
            "converged": self.converged,
            "measure": json.loads(self.measure.to_json()),
        })


def _kernel_matrix(K: WeightedCompact) -> np.ndarray:
    D = np.abs(K.nodes[:, None] - K.nodes[None, :])
    np.fill_diagonal(D, 1.0)
    if np.any(D == 0):
        raise ValueError("duplicate nodes give non-finite energy")
    A = -np.log(D)
    np.fill_diagonal(A, self_energy_term(K.local_spacing))
    return A


def solve_equilibrium(K: WeightedCompact, gap_tol: float = 1e-6,
                      max_iters: int = 200_000) -> EquilibriumSolution:
    """Minimize I^w over the probability simplex on K's nodes.

    Frank-Wolfe with away steps and exact line search on the quadratic
    m A m + 2 q m.  Stops when the FW duality gap and the upper Frostman
    excess on the active support both fall below gap_tol; hitting max_iters
    returns a solution flagged non-converged.
    """
    if gap_tol <= 0:
        raise ValueError("gap_tol must be positive")
    M = K.size
    A = _kernel_matrix(K)
    q = K.Q_values.copy()
    finite = np.isfinite(q)
    if M == 1:
        m = np.array([1.0])
        u = A @ m
        V_w = float(m @ u + 2 * q @ m)
        F = V_w - float(q @ m)
        meas = DiscreteMeasure(K.nodes, m)
        return EquilibriumSolution(meas, F, V_w, 0.0, 0, True, u, q, m)

    m = np.where(finite, K.local_spacing, 0.0)
    m = m / m.sum()
    u = A @ m
    floor = 1.0 / (MASS_FLOOR_FACTOR * M)
    qe = np.where(finite, q, np.inf)

    it = 0
    converged = False
    gap = math.inf
    for it in range(1, max_iters + 1):
        g = 2.0 * (u + qe)
        gm = float(g @ m)
        s = int(np.argmin(g))
        gap = gm - g[s]
        supp = m > floor
        F_now = float(m @ u + q @ m)
        pot = u + q
        upper = float(np.max(pot[supp]) - F_now) if supp.any() else 0.0
        if gap <= gap_tol and upper <= 0.5 * gap_tol:
            converged = True
            break
        idx = np.nonzero(m > 0)[0]
        a = idx[int(np.argmax(g[idx]))]
        away_gap = g[a] - gm
        if gap >= away_gap:
            # toward step: d = e_s - m
            dAd = A[s, s] - 2 * u[s] + m @ u
            gd = g[s] - gm
            gamma = 1.0 if dAd <= 0 else min(1.0, -gd / (2 * dAd))
            gamma = max(gamma, 0.0)
            m *= (1 - gamma)
            m[s] += gamma
            u = (1 - gamma) * u + gamma * A[:, s]
        else:
            # away step: d = m - e_a, max step keeps m[a] >= 0
            dAd = m @ u - 2 * u[a] + A[a, a]
            gd = gm - g[a]
            gmax = m[a] / (1 - m[a]) if m[a] < 1 else 0.0
            gamma = gmax if dAd <= 0 else min(gmax, -gd / (2 * dAd))
            gamma = max(gamma, 0.0)
            m *= (1 + gamma)
            m[a] -= gamma
            m[a] = max(m[a], 0.0)
            u = (1 + gamma) * u - gamma * A[:, a]
        if it % 4096 == 0:
            u = A @ m  # refresh accumulated drift
            m = m / m.sum()

    u = A @ m
    V_w = float(m @ u + 2 * q @ m)
    F = V_w - float(q @ m)
    keep = m > 0
    meas = DiscreteMeasure(K.nodes[keep], m[keep])
    return EquilibriumSolution(meas, F, V_w, float(gap), it, converged, u, q, m)


def frostman_residuals(sol: EquilibriumSolution, K: WeightedCompact) -> tuple[float, float]:
    """(lower, upper) Frostman violations of the computed solution.

    lower: max over nodes of (F - U - Q)_+ ; upper: max over support nodes
    (mass above the floor) of (U + Q - F)_+ , with U the kernel-regularized
    node potential.
    """
    pot = sol.node_potentials + sol.node_Q
    F = sol.F_const
    lower = float(max(0.0, np.max(F - pot)))
    floor = sol.measure.total_mass / (MASS_FLOOR_FACTOR * K.size)
    supp = sol.masses_on_nodes > floor
    upper = float(max(0.0, np.max(pot[supp] - F))) if supp.any() else 0.0
    return lower, upper


@dataclass(frozen=True)
class FeketeSequence:
    """Greedy weighted Leja points with the norm sequence ||w^m F_m||_K.

    log_norms[m-1] = log max over nodes of w(z)^m prod_{j<=m} |z - t_j|.
    """

    points: np.ndarray
    weighted_norms: np.ndarray
    log_norms: np.ndarray

    def norm_root(self, n: int) -> float:
        """||w^n F_n||^(1/n) over the node set."""
        return math.exp(self.log_norms[n - 1] / n)


def weighted_leja(K: WeightedCompact, n: int) -> FeketeSequence:
    """Greedy surrogate of weighted Fekete points.

    t_m maximizes w(z)^m prod_{j<m} |z - t_j| over the nodes (weight power
    equals the index of the point being selected); all bookkeeping is done in
    logs, so norms never under/overflow.
    """
    if n > K.size:
        raise ValueError("n exceeds node count")
    with np.errstate(divide="ignore"):
        logw = np.log(K.w_values)
    logprod = np.zeros(K.size)
    used = np.zeros(K.size, dtype=bool)
    picked = np.empty(n, dtype=complex)
    lognorms = np.empty(n)
    for m in range(1, n + 1):
        obj = m * logw + logprod
        obj[used] = -np.inf
        i = int(np.argmax(obj))
        if not np.isfinite(obj[i]):
            raise ValueError("no admissible node left (w = 0 everywhere unused)")
        picked[m - 1] = K.nodes[i]
        used[i] = True
        with np.errstate(divide="ignore"):
            logprod += np.log(np.abs(K.nodes - K.nodes[i]))
        logprod[i] = -np.inf
        lognorms[m - 1] = float(np.max(m * logw + logprod))
    return FeketeSequence(picked, np.exp(lognorms), lognorms)


def _leja_cache_key(K: WeightedCompact, n: int) -> str:
    hsh = hashlib.sha256()
    hsh.update(K.nodes.tobytes())
    hsh.update(K.Q_values.tobytes())
    hsh.update(str(n).encode())
    hsh.update(b"leja-v1")
    return hsh.hexdigest()[:24]


def weighted_leja_cached(K: WeightedCompact, n: int,
                         cache_dir: str | None = None) -> FeketeSequence:
    """weighted_leja with a content-addressed disk cache.

    Cache directory: explicit argument, else $WAPPROX_CACHE, else no caching.
    """
    cache_dir = cache_dir or os.environ.get("WAPPROX_CACHE")
    if not cache_dir:
        return weighted_leja(K, n)
    os.makedirs(cache_dir, exist_ok=True)
    path = os.path.join(cache_dir, _leja_cache_key(K, n) + ".npz")
    if os.path.exists(path):
        d = np.load(path)
        return FeketeSequence(d["points"], d["weighted_norms"], d["log_norms"])
    seq = weighted_leja(K, n)
    np.savez(path, points=seq.points, weighted_norms=seq.weighted_norms,
             log_norms=seq.log_norms)
    return seq


def extremal_function(sol: EquilibriumSolution, z: complex) -> float:
    """V*_{K,Q}(z) = -U^{mu}(z) + F_{K,Q}."""
    return -log_potential(sol.measure, z) + sol.F_const


def bernstein_walsh_bound(sol: EquilibriumSolution, sup_norm_on_Sw: float,
                          n: int, z: complex) -> float:
    """Right side of the weighted Bernstein-Walsh inequality:
    sup_norm * exp(n (-U^{mu}(z) + F))."""
    if sup_norm_on_Sw < 0:
        raise ValueError("sup norm must be nonnegative")
    return sup_norm_on_Sw * math.exp(n * (-log_potential(sol.measure, z) + sol.F_const))
