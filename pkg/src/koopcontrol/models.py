"""Dynamics models: Duffing oscillator and circular-orbit relative motion.

The relative-motion model is built from its Lagrangian.  In a frame rotating
with mean motion n about a circular reference orbit of radius a, with x
radial, y along-track and z cross-track, the kinetic energy of the deputy is

    T = 1/2 (xd^2 + yd^2 + zd^2) + n (x yd - y xd) + n a yd
        + 1/2 n^2 (x^2 + y^2) + n^2 a x + 1/2 n^2 a^2

(xd denoting the x velocity and so on) and the gravitational potential
expands in Legendre polynomials of -x/rho with rho = |r|:

    Q_k = n^2 a^2 P_k(-x / rho) (rho / a)^k,     k = 0, 1, 2, ...

Each Q_k is an exact polynomial of total degree k because odd powers of rho
always cancel.  Truncating the sum at k_max = 2 reproduces the classical
linearized equations

    xdd = 2 n yd + 3 n^2 x,   ydd = -2 n xd,   zdd = -n^2 z.

Normalized form: lengths divided by a and time scaled by n (equivalently
a = n = 1), then states divided once more by a dimensionless factor s so
that the region of interest fills an O(1) box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .basis import legendre_coefficients
from .polynomial import MultiPoly, PolyMap


@dataclass(frozen=True)
class DuffingParams:
    """Unit-mass-style oscillator with a weak cubic stiffness term."""

    amplitude: float = 1.0
    mass: float = 1.0
    stiffness: float = 1.0
    epsilon: float = 0.001


def duffing_dynamics(params: DuffingParams) -> PolyMap:
    """First-order form over (q, p): qd = p / M, pd = -k q - k a^2 eps q^3."""
    a, M, k, eps = (params.amplitude, params.mass,
                    params.stiffness, params.epsilon)
    qd = MultiPoly(2, {(0, 1): 1.0 / M})
    pd = MultiPoly(2, {(1, 0): -k, (3, 0): -k * a * a * eps})
    return PolyMap([qd, pd])


def duffing_acceleration(params: DuffingParams) -> PolyMap:
    """Acceleration over (q, v) with v = p / M, ready for costate augmentation."""
    a, M, k, eps = (params.amplitude, params.mass,
                    params.stiffness, params.epsilon)
    vd = MultiPoly(2, {(1, 0): -k / M, (3, 0): -k * a * a * eps / M})
    return PolyMap([vd])


@dataclass(frozen=True)
class CwConfig:
    """Circular-orbit relative motion configuration.

    semi_major_axis and mu are SI (meters, m^3/s^2); scale is the extra
    dimensionless state scaling s applied after normalization.  k_max picks
    how many potential terms Q_0..Q_k_max enter the Lagrangian; k_max = 2
    is the linearized model.
    """

    semi_major_axis: float = 6678.0e3
    mu: float = 3.986004418e14
    scale: float = 0.05
    k_max: int = 2
    planar: bool = False
    normalize: bool = True

    def __post_init__(self):
        if self.semi_major_axis <= 0 or self.mu <= 0:
            raise ValueError("semi_major_axis and mu must be positive")
        if not 0 < self.scale <= 1:
            raise ValueError("scale must be in (0, 1]")
        if self.k_max < 2:
            raise ValueError("k_max < 2 drops the linear dynamics; use k_max >= 2")

    @property
    def mean_motion(self) -> float:
        return math.sqrt(self.mu / self.semi_major_axis ** 3)

    @property
    def n_pos(self) -> int:
        return 2 if self.planar else 3


@lru_cache(maxsize=None)
def potential_term_rational(k: int) -> dict[tuple[int, int, int], Fraction]:
    """Exact coefficients of Q_k over (x, y, z) with n = a = 1.

    Built from Q_k = P_k(-x/rho) rho^k: each Legendre term contributes
    p_j (-x)^j rho^(k-j) with k - j even, so rho^(k-j) expands through the
    multinomial theorem on (x^2 + y^2 + z^2).
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    out: dict[tuple[int, int, int], Fraction] = {}
    for j, pj in enumerate(legendre_coefficients(k)):
        if pj == 0:
            continue
        assert (k - j) % 2 == 0, "odd power of rho survived the expansion"
        half = (k - j) // 2
        sign = Fraction(-1) ** j
        for i1 in range(half + 1):
            for i2 in range(half - i1 + 1):
                i3 = half - i1 - i2
                mult = Fraction(math.factorial(half),
                                math.factorial(i1) * math.factorial(i2)
                                * math.factorial(i3))
                key = (j + 2 * i1, 2 * i2, 2 * i3)
                out[key] = out.get(key, Fraction(0)) + sign * pj * mult
    return {e: c for e, c in out.items() if c != 0}


def potential_polynomial(k: int, config: CwConfig) -> MultiPoly:
    """Q_k over (x, y, z); normalized units if the config says so."""
    rational = potential_term_rational(k)
    if config.normalize:
        return MultiPoly(3, {e: float(c) for e, c in rational.items()},
                         prune_tol=0.0)
    n = config.mean_motion
    a = config.semi_major_axis
    factor = n * n * a ** (2 - k)
    return MultiPoly(3, {e: factor * float(c) for e, c in rational.items()},
                     prune_tol=0.0)


@dataclass(frozen=True)
class Lagrangian:
    """Polynomial Lagrangian over (q_1..q_n, qd_1..qd_n)."""

    n_pos: int
    poly: MultiPoly

    def __post_init__(self):
        if self.poly.num_vars != 2 * self.n_pos:
            raise ValueError("Lagrangian must live in 2 * n_pos variables")

    def restrict_last_axis(self) -> "Lagrangian":
        """Freeze the last position and its velocity at zero."""
        if self.n_pos < 2:
            raise ValueError("nothing left after restriction")
        n = self.n_pos
        keep = list(range(n - 1)) + list(range(n, 2 * n - 1))
        drop = (n - 1, 2 * n - 1)
        terms: dict[tuple[int, ...], float] = {}
        for exps, coef in self.poly.terms.items():
            if any(exps[d] for d in drop):
                continue
            terms[tuple(exps[i] for i in keep)] = coef
        return Lagrangian(n - 1, MultiPoly(2 * (n - 1), terms, prune_tol=0.0))


def _embed_positions(p: MultiPoly, n_pos: int) -> MultiPoly:
    """Lift a polynomial in (x, y, z) into (q_1..q_n, qd_1..qd_n)."""
    terms = {}
    for exps, coef in p.terms.items():
        assert len(exps) == n_pos
        terms[tuple(exps) + (0,) * n_pos] = coef
    return MultiPoly(2 * n_pos, terms, prune_tol=0.0)


def cw_lagrangian(config: CwConfig) -> Lagrangian:
    """Kinetic energy plus potential terms Q_0..Q_k_max, three dimensional.

    Variables are (x, y, z, xd, yd, zd).  The planar flag is honored by
    cw_dynamics, not here.
    """
    if config.normalize:
        n = 1.0
        a = 1.0
    else:
        n = config.mean_motion
        a = config.semi_major_axis
    v = {name: MultiPoly.variable(6, i)
         for i, name in enumerate(("x", "y", "z", "xd", "yd", "zd"))}
    T = (0.5 * (v["xd"] ** 2 + v["yd"] ** 2 + v["zd"] ** 2)
         + n * (v["x"] * v["yd"] - v["y"] * v["xd"])
         + n * a * v["yd"]
         + 0.5 * n * n * (v["x"] ** 2 + v["y"] ** 2)
         + n * n * a * v["x"]
         + MultiPoly.constant(6, 0.5 * n * n * a * a))
    total = T
    for k in range(config.k_max + 1):
        total = total + _embed_positions(potential_polynomial(k, config), 3)
    return Lagrangian(3, total)


def euler_lagrange(lagrangian: Lagrangian) -> PolyMap:
    """Reduce a Lagrangian to acceleration polynomials over (q, qd).

    Requires the velocity Hessian to be exactly the identity, which makes

        qdd_i = dL/dq_i - sum_j (d^2 L / dqd_i dq_j) qd_j.
    """
    n = lagrangian.n_pos
    L = lagrangian.poly
    for i in range(n):
        dvi = L.derivative(n + i)
        for j in range(i, n):
            h = dvi.derivative(n + j)
            expected = MultiPoly.constant(2 * n, 1.0) if i == j \
                else MultiPoly.zero(2 * n)
            if h != expected:
                raise ValueError(
                    "velocity Hessian is not the identity; this reduction "
                    "only applies to unit-mass Lagrangians")
    accels = []
    for i in range(n):
        dvi = L.derivative(n + i)
        acc = L.derivative(i)
        for j in range(n):
            mixed = dvi.derivative(j)
            if not mixed.is_zero():
                acc = acc - mixed * MultiPoly.variable(2 * n, n + j)
        accels.append(acc)
    return PolyMap(accels)


def _scale_uniform(accels: PolyMap, s: float) -> PolyMap:
    """Rescale accelerations to states u = x / s: term coef -> coef * s^(d-1)."""
    out = []
    for p in accels.components:
        terms = {e: c * s ** (sum(e) - 1) for e, c in p.terms.items()}
        out.append(MultiPoly(p.num_vars, terms, prune_tol=0.0))
    return PolyMap(out)


def cw_dynamics(config: CwConfig) -> PolyMap:
    """Acceleration polynomials over (r, v) in the configured units.

    Normalized configs return the s-scaled system (states are x / (a s) and
    velocities v / (a n s), time is n t).  Planar configs freeze z and zd
    at zero before the Euler-Lagrange reduction, which is consistent because
    every potential term is even in z.
    """
    lag = cw_lagrangian(config)
    if config.planar:
        lag = lag.restrict_last_axis()
    accels = euler_lagrange(lag)
    if config.normalize and config.scale != 1.0:
        accels = _scale_uniform(accels, config.scale)
    return accels


# -- unit conversions ------------------------------------------------------

def scale_state(config: CwConfig, state: np.ndarray) -> np.ndarray:
    """SI (r in m, v in m/s) to the normalized, s-scaled model units."""
    state = np.asarray(state, dtype=float)
    n_pos = config.n_pos
    if state.shape[-1] != 2 * n_pos:
        raise ValueError(f"state must have {2 * n_pos} components")
    if not config.normalize:
        return state.copy()
    a = config.semi_major_axis
    n = config.mean_motion
    s = config.scale
    out = state.astype(float).copy()
    out[..., :n_pos] /= a * s
    out[..., n_pos:] /= a * n * s
    return out


def unscale_state(config: CwConfig, state: np.ndarray) -> np.ndarray:
    """Inverse of scale_state."""
    state = np.asarray(state, dtype=float)
    n_pos = config.n_pos
    if not config.normalize:
        return state.copy()
    a = config.semi_major_axis
    n = config.mean_motion
    s = config.scale
    out = state.astype(float).copy()
    out[..., :n_pos] *= a * s
    out[..., n_pos:] *= a * n * s
    return out


def scale_costates(config: CwConfig, costates: np.ndarray) -> np.ndarray:
    """SI costates (lam_r, lam_v) to model units.

    The model velocity costate multiplies the model acceleration the same
    way lam_v multiplies the SI acceleration, which fixes the factors:
    lam_v scales by a s n^2 and lam_r by a s n^3.
    """
    costates = np.asarray(costates, dtype=float)
    n_pos = config.n_pos
    if costates.shape[-1] != 2 * n_pos:
        raise ValueError(f"costates must have {2 * n_pos} components")
    if not config.normalize:
        return costates.copy()
    a = config.semi_major_axis
    n = config.mean_motion
    s = config.scale
    out = costates.astype(float).copy()
    out[..., :n_pos] /= a * s * n ** 3
    out[..., n_pos:] /= a * s * n ** 2
    return out


def unscale_costates(config: CwConfig, costates: np.ndarray) -> np.ndarray:
    """Model-unit costates back to SI."""
    costates = np.asarray(costates, dtype=float)
    n_pos = config.n_pos
    if not config.normalize:
        return costates.copy()
    a = config.semi_major_axis
    n = config.mean_motion
    s = config.scale
    out = costates.astype(float).copy()
    out[..., :n_pos] *= a * s * n ** 3
    out[..., n_pos:] *= a * s * n ** 2
    return out


def scale_time(config: CwConfig, t: float) -> float:
    """Seconds to normalized time (radians of reference orbit)."""
    return t * config.mean_motion if config.normalize else t


def unscale_time(config: CwConfig, tau: float) -> float:
    return tau / config.mean_motion if config.normalize else tau
