"""Estimator-style front end for the boundary-value pipeline.

``KoopmanBvpSolver`` follows the scikit-learn protocol: hyperparameters
in ``__init__``, expensive work in ``fit`` (building and inverting the
transition map for the configured horizon), cheap vectorized queries in
``predict``.  The fitted map is reused across any number of initial
states, which is the whole point of solving the boundary-value problem
in map form.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .mapinv import solve_costates
from .scenario import (DEFAULT_ORDER, Pipeline, Scenario, build_problem)


class KoopmanBvpSolver(BaseEstimator):
    """Initial costates of a fixed-horizon boundary-value problem.

    Parameters
    ----------
    model : "cw" or "duffing"
        Dynamics family.
    model_params : dict or None
        Keyword arguments of the family's configuration dataclass.
    xf : array-like or None
        Target state; defaults to the origin.
    tf : float
        Time of flight (seconds for "cw", model units for "duffing").
    max_order : int or None
        Basis truncation order; None picks the family default.
    solver : "koopman", "stm-oracle" or "shooting"
        "koopman" fits the inverted map once and answers queries by
        polynomial evaluation; the oracle choices bypass the map and
        solve each query directly (slower, used for cross-checks).
    map_steps : int or None
        Number of composed short-horizon maps; None picks automatically.
    half_widths : dict or None
        Domain-box overrides, keys "state", "velocity", "costate_r",
        "costate_v".

    Examples
    --------
    >>> est = KoopmanBvpSolver(model="duffing", tf=5.0)
    >>> est.fit([[1.0, 0.0]])
    KoopmanBvpSolver(model='duffing', tf=5.0)
    >>> lam0 = est.predict([[1.0, 0.0], [0.8, 0.1]])
    >>> lam0.shape
    (2, 2)
    """

    def __init__(self, model: str = "cw", model_params: dict | None = None,
                 xf=None, tf: float = 1.0, max_order: int | None = None,
                 solver: str = "koopman", map_steps: int | None = None,
                 half_widths: dict | None = None):
        self.model = model
        self.model_params = model_params
        self.xf = xf
        self.tf = tf
        self.max_order = max_order
        self.solver = solver
        self.map_steps = map_steps
        self.half_widths = half_widths

    def _scenario(self) -> Scenario:
        return Scenario.from_dict({
            "model": self.model,
            "model_params": dict(self.model_params or {}),
            "x0": None,
            "xf": None if self.xf is None else list(self.xf),
            "tf": float(self.tf),
            "max_order": self.max_order,
            "solver": self.solver,
            "map_steps": self.map_steps,
            "half_widths": dict(self.half_widths or {}),
            "grid": {"points": []},
        })

    def _check_states(self, X) -> np.ndarray:
        X = check_array(X, ensure_2d=True, dtype=float)
        m = self.problem_.n_states
        if X.shape[1] != m:
            raise ValueError(
                f"X must have {m} columns for model {self.model!r}, "
                f"got {X.shape[1]}")
        return X

    def fit(self, X, y=None):
        """Build and invert the transition map for the configured horizon.

        X holds initial states, one per row, in physical units; they seed
        the domain-box probe so later queries in their neighborhood stay
        inside the fitted region.  y is ignored (present for protocol
        compatibility).
        """
        scenario = self._scenario()
        self.problem_ = build_problem(scenario.model, scenario.model_params)
        X = check_array(X, ensure_2d=True, dtype=float)
        if X.shape[1] != self.problem_.n_states:
            raise ValueError(
                f"X must have {self.problem_.n_states} columns for model "
                f"{self.model!r}, got {X.shape[1]}")
        if X.shape[0] == 0:
            raise ValueError("fit needs at least one initial state")
        self.pipeline_ = Pipeline()
        self.xf_ = scenario.xf
        self.scenario_ = scenario
        if self.solver == "koopman":
            prob = self.problem_
            starts = [prob.to_model_state(x) for x in X]
            xfm = prob.to_model_state(scenario.xf)
            tfm = prob.to_model_time(scenario.tf)
            order = scenario.max_order or DEFAULT_ORDER[prob.family]
            timings: dict = {}
            model, tpbvp, steps, _ = self.pipeline_.prepare(
                prob, starts, xfm, tfm, order, scenario.half_widths,
                scenario.map_steps, timings)
            self.koopman_ = model
            self.tpbvp_ = tpbvp
            self.steps_ = steps
            self.fit_timings_ = timings
        return self

    def predict(self, X) -> np.ndarray:
        """Initial costates for each initial state, one row per query."""
        check_is_fitted(self, "problem_")
        X = self._check_states(X)
        prob = self.problem_
        out = np.empty_like(X)
        if self.solver == "koopman":
            xfm = prob.to_model_state(self.xf_)
            for i, x0 in enumerate(X):
                lam_m, _ = solve_costates(
                    self.tpbvp_, prob.to_model_state(x0), xfm)
                out[i] = prob.to_si_costates(lam_m)
        else:
            import copy
            sc = copy.copy(self.scenario_)
            sc.verify = False
            for i, x0 in enumerate(X):
                report, _ = self.pipeline_.solve(sc, x0=x0)
                out[i] = report.lam0
        return out

    def solve(self, x0, verify: bool = True):
        """Full report for one initial state (terminal check included)."""
        check_is_fitted(self, "problem_")
        x0 = np.asarray(x0, dtype=float)
        scenario = self.scenario_
        scenario.verify = verify
        return self.pipeline_.solve(scenario, x0=x0)
