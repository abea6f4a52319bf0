"""Energy-optimal control augmentation.

For dynamics rdd = f(r, v) + u with cost J = integral of |u|^2 / 2, the
minimum principle gives the optimal control u* = -lam_v (thrust magnitude
|lam_v| along direction -lam_v / |lam_v|) and the closed augmented system

    rd     = v
    vd     = f(r, v) - lam_v
    lam_rd = -(df/dr)^T lam_v
    lam_vd = -lam_r - (df/dv)^T lam_v

which is polynomial whenever f is.  Variables are ordered
(r, v, lam_r, lam_v), each block of length n_pos.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .polynomial import MultiPoly, PolyMap

LAYOUT_ORDER = ("r", "v", "lr", "lv")


def _embed(p: MultiPoly, total_vars: int) -> MultiPoly:
    """Pad a polynomial over (r, v) with trailing costate variables."""
    pad = total_vars - p.num_vars
    if pad < 0:
        raise ValueError("polynomial has more variables than the target space")
    terms = {exps + (0,) * pad: coef for exps, coef in p.terms.items()}
    return MultiPoly(total_vars, terms, prune_tol=0.0)


@dataclass(frozen=True)
class AugmentedSystem:
    """Closed-loop state-costate dynamics under the energy-optimal control."""

    n_pos: int
    dynamics: PolyMap
    accelerations: PolyMap

    def __post_init__(self):
        if self.dynamics.num_outputs != 4 * self.n_pos:
            raise ValueError("augmented dynamics must have 4 * n_pos rows")
        if self.dynamics.num_vars_in != 4 * self.n_pos:
            raise ValueError("augmented dynamics must use 4 * n_pos variables")

    @property
    def n_states(self) -> int:
        return 2 * self.n_pos

    @property
    def dim(self) -> int:
        return 4 * self.n_pos

    def block(self, name: str) -> slice:
        i = LAYOUT_ORDER.index(name)
        return slice(i * self.n_pos, (i + 1) * self.n_pos)

    def hamiltonian(self, z: Sequence[float]) -> float:
        """Optimal-control Hamiltonian value; constant along solutions."""
        z = np.asarray(z, dtype=float)
        n = self.n_pos
        v = z[n:2 * n]
        lam_r = z[2 * n:3 * n]
        lam_v = z[3 * n:]
        f = self.accelerations.evaluate(z[:2 * n])
        return float(lam_r @ v + lam_v @ f - 0.5 * lam_v @ lam_v)

    def linear_matrix(self) -> np.ndarray:
        """Coefficient matrix of the degree-1 part of the dynamics."""
        b, A = self.dynamics.linear_part()
        if np.any(b != 0.0):
            raise ValueError("augmented dynamics has a constant part")
        return A

    def to_dict(self) -> dict:
        d = self.dynamics.to_dict()
        d["layout"] = {"n_pos": self.n_pos, "order": list(LAYOUT_ORDER)}
        d["accelerations"] = self.accelerations.to_dict()
        return d

    @classmethod
    def from_dict(cls, data: Mapping) -> "AugmentedSystem":
        layout = data["layout"]
        return cls(int(layout["n_pos"]),
                   PolyMap.from_dict(data),
                   PolyMap.from_dict(data["accelerations"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "AugmentedSystem":
        return cls.from_dict(json.loads(text))


def augment_energy_optimal(f_v: PolyMap) -> AugmentedSystem:
    """Close the loop on acceleration polynomials f over (r, v).

    f_v must have n_pos rows in 2 * n_pos variables.  Returns the
    4 * n_pos dimensional polynomial system over (r, v, lam_r, lam_v).
    """
    if f_v.num_vars_in != 2 * f_v.num_outputs:
        raise ValueError(
            "accelerations must have n_pos rows over (r, v), got "
            f"{f_v.num_outputs} rows in {f_v.num_vars_in} variables")
    n = f_v.num_outputs
    total = 4 * n
    lam_r = [MultiPoly.variable(total, 2 * n + i) for i in range(n)]
    lam_v = [MultiPoly.variable(total, 3 * n + i) for i in range(n)]
    rows: list[MultiPoly] = []
    for i in range(n):
        rows.append(MultiPoly.variable(total, n + i))
    for i in range(n):
        rows.append(_embed(f_v.components[i], total) - lam_v[i])
    jac = f_v.jacobian()
    for i in range(n):
        acc = MultiPoly.zero(total)
        for k in range(n):
            dfk = jac[k][i]
            if not dfk.is_zero():
                acc = acc - _embed(dfk, total) * lam_v[k]
        rows.append(acc)
    for i in range(n):
        acc = -lam_r[i]
        for k in range(n):
            dfk = jac[k][n + i]
            if not dfk.is_zero():
                acc = acc - _embed(dfk, total) * lam_v[k]
        rows.append(acc)
    return AugmentedSystem(n, PolyMap(rows), f_v)


def control_history(states: np.ndarray, n_pos: int) -> dict[str, np.ndarray]:
    """Optimal control along augmented trajectory samples.

    states has one augmented state per row.  Returns the thrust vectors
    -lam_v, their magnitudes |lam_v|, and the unit directions (rows of NaN
    where the thrust vanishes).
    """
    states = np.asarray(states, dtype=float)
    if states.ndim != 2 or states.shape[1] != 4 * n_pos:
        raise ValueError(f"states must be (T, {4 * n_pos})")
    lam_v = states[:, 3 * n_pos:]
    magnitude = np.linalg.norm(lam_v, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        direction = -lam_v / magnitude[:, None]
    direction[magnitude == 0.0] = np.nan
    return {"thrust": -lam_v, "magnitude": magnitude, "direction": direction}
