"""Quadrature reference for the two-body Coulomb integral.

This module works only from the oscillator wavefunctions and the Gaussian
representation ``1/r = (2/sqrt(pi)) int_0^inf exp(-t^2 r^2) dt``; it never
touches the Laguerre expansion used by :mod:`hocoulomb.closed_form`.

For fixed ``t`` the six-dimensional integral factorises into three two-dimensional
axis integrals.  Rotating to ``u = (x1 + x2)/sqrt2``, ``v = (x1 - x2)/sqrt2``
turns each into a Gauss-Hermite integral over ``(u, w)`` with ``v = w sqrt(y)``
and ``y = 1/(1 + 2 t^2)``.  In the variable ``y`` the remaining integrand is a
polynomial times ``(1 - y)^(-1/2)`` on ``[0, 1]``, which Gauss-Jacobi
integrates exactly once enough nodes are used.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import special

from .closed_form import ScaleLike, as_scale
from .core import KeyLike, as_flat


class QuadratureNonConvergence(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadratureSpec:
    nodes_per_axis: int = 16
    t_nodes: int = 24
    target_rel_error: float = 1e-10

    def __post_init__(self):
        if self.nodes_per_axis < 8:
            raise ValueError("nodes_per_axis must be >= 8")
        if self.t_nodes < 16:
            raise ValueError("t_nodes must be >= 16")
        if not self.target_rel_error > 0:
            raise ValueError("target_rel_error must be positive")

    @classmethod
    def for_max_index(cls, n_max: int, target_rel_error: float = 1e-10) -> "QuadratureSpec":
        # Gauss-Hermite is exact per axis for 2*n_max+1 nodes and the t-rule for
        # 3*n_max+1; the margins leave room for the refinement check.
        return cls(2 * n_max + 8, max(16, 3 * n_max + 8), target_rel_error)

    def refined(self) -> "QuadratureSpec":
        return QuadratureSpec(2 * self.nodes_per_axis, 2 * self.t_nodes, self.target_rel_error)


def _hermite_recurrence(n_max: int, xi: np.ndarray, start: np.ndarray) -> np.ndarray:
    out = np.empty((n_max + 1,) + xi.shape)
    out[0] = start
    if n_max >= 1:
        out[1] = math.sqrt(2.0) * xi * start
    for n in range(1, n_max):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * xi * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


def hermite_functions(n_max: int, xi) -> np.ndarray:
    """Normalised Hermite polynomials ``H_n(xi) / sqrt(sqrt(pi) 2^n n!)`` for ``n <= n_max``.

    These are the oscillator states with the Gaussian stripped off, i.e. the
    integrand factor for Gauss-Hermite quadrature.
    """
    xi = np.asarray(xi, dtype=float)
    return _hermite_recurrence(n_max, xi, np.full(xi.shape, math.pi ** -0.25))


def hermite_wavefunction(n: int, x, a: float = 1.0):
    """Normalised 1D oscillator eigenfunction ``psi_n(x)`` with length ``a``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if a <= 0:
        raise ValueError("a must be positive")
    xi = np.asarray(x, dtype=float) / a
    start = math.pi ** -0.25 * np.exp(-0.5 * xi * xi) / math.sqrt(a)
    values = _hermite_recurrence(n, xi, start)[n]
    return float(values) if values.ndim == 0 else values


@lru_cache(maxsize=32)
def _axis_table(max_index: int, nodes_per_axis: int, t_nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    """Per-axis factors ``J[n1, n4, n2, n3, t]`` and the t-rule weights.

    ``J`` is the axis integral divided by ``sqrt(y_t)``; the full element is
    ``sum_t w_t Jx Jy Jz / (2 sqrt(pi) a)``.
    """
    u, wu = special.roots_hermite(nodes_per_axis)
    xj, wj = special.roots_jacobi(t_nodes, -0.5, 0.0)
    y = 0.5 * (1.0 + xj)
    weights2 = np.outer(wu, wu)
    m = max_index + 1
    table = np.empty((m, m, m, m, t_nodes))
    for t, yt in enumerate(y):
        root = math.sqrt(yt)
        x1 = (u[:, None] + root * u[None, :]) / math.sqrt(2.0)
        x2 = (u[:, None] - root * u[None, :]) / math.sqrt(2.0)
        h1 = hermite_functions(max_index, x1)
        h2 = hermite_functions(max_index, x2)
        rho = np.einsum("aij,bij,ij->abij", h1, h1, weights2)
        table[..., t] = np.einsum("abij,cij,dij->abcd", rho, h2, h2)
    table.setflags(write=False)
    wj = wj.copy()
    wj.setflags(write=False)
    return table, wj


def _evaluate(flat_keys: np.ndarray, spec: QuadratureSpec, a: float) -> np.ndarray:
    max_index = int(flat_keys.max()) if flat_keys.size else 0
    table, w = _axis_table(max_index, spec.nodes_per_axis, spec.t_nodes)
    prod = np.ones((flat_keys.shape[0], spec.t_nodes))
    for axis in range(3):
        n1, n2, n3, n4 = (flat_keys[:, 3 * j + axis] for j in range(4))
        prod *= table[n1, n4, n2, n3]
    return prod @ w / (2.0 * math.sqrt(math.pi) * a)


def _check(values: np.ndarray, refined: np.ndarray, spec: QuadratureSpec, keys: np.ndarray):
    err = np.abs(refined - values)
    bad = err > np.maximum(spec.target_rel_error * np.abs(refined), 1e-14)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise QuadratureNonConvergence(
            f"quadrature refinement disagrees by {err[i]:.3e} for key {tuple(keys[i])}"
        )
    return err


def element_quadrature(
    key: KeyLike, scale: ScaleLike = 1.0, spec: Optional[QuadratureSpec] = None
) -> Tuple[float, float]:
    """Numerically integrate one element; returns ``(value, error_estimate)``.

    The error estimate is the change on doubling both node counts.
    """
    values, errs = element_quadrature_batch([key], scale, spec)
    return float(values[0]), float(errs[0])


def element_quadrature_batch(
    keys: Sequence[KeyLike],
    scale: ScaleLike = 1.0,
    spec: Optional[QuadratureSpec] = None,
    refine: bool = True,
) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`element_quadrature` sharing the per-axis tables.

    ``keys`` may also be an integer array of shape ``(K, 12)``.
    """
    a = as_scale(scale).a
    if isinstance(keys, np.ndarray):
        flat = keys.astype(np.int64, copy=False).reshape(-1, 12)
        if flat.size and flat.min() < 0:
            raise ValueError("quantum numbers must be non-negative")
    else:
        flat = np.array([as_flat(k) for k in keys], dtype=np.int64).reshape(-1, 12)
    if spec is None:
        spec = QuadratureSpec.for_max_index(int(flat.max()) if flat.size else 0)
    values = _evaluate(flat, spec, a)
    if not refine:
        return values, np.full_like(values, np.nan)
    refined = _evaluate(flat, spec.refined(), a)
    return refined, _check(values, refined, spec, flat)


# ---------------------------------------------------------------------------
# one-axis Fourier overlaps


def convolution_c(n1: int, n4: int, q: float, a: float = 1.0) -> complex:
    """``int psi_n1(x) psi_n4(x) exp(-i q x) dx`` from its Laguerre closed form."""
    if n1 < 0 or n4 < 0:
        raise ValueError("quantum numbers must be non-negative")
    if a <= 0:
        raise ValueError("a must be positive")
    lo, hi = min(n1, n4), max(n1, n4)
    d = hi - lo
    norm = math.sqrt(2.0 ** (hi - lo) * math.factorial(lo) / math.factorial(hi))
    phase = 1j ** ((n1 + n4) % 4) * (-1) ** hi
    x = a * a * q * q / 2.0
    radial = math.exp(-x / 2.0) * (a * q / 2.0) ** d * special.eval_genlaguerre(lo, d, x)
    return complex(phase * norm * radial)


def convolution_d(n1: int, n4: int, q: float, a: float = 1.0) -> complex:
    return convolution_c(n1, n4, -q, a)


def convolution_c_numeric(n1: int, n4: int, q: float, a: float = 1.0, nodes: int = 160) -> complex:
    """Same overlap by brute-force Gauss-Hermite integration, for cross-checks."""
    xi, w = special.roots_hermite(nodes)
    h = hermite_functions(max(n1, n4), xi)
    density = h[n1] * h[n4] * w
    return complex(np.sum(density * np.cos(q * a * xi)), -np.sum(density * np.sin(q * a * xi)))
