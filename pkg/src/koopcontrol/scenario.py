"""Scenario files and the end-to-end boundary-value pipeline.

A scenario is a small JSON document naming a model, boundary states, a
time of flight and solver options.  The runner turns it into initial
costates plus verification metrics:

    model -> augment -> generator matrix -> transition map at tf
          -> stacked boundary map -> inverse -> costates -> truth check

Inverted maps are cached in process, keyed by (model, order, tf), so a
batch of boundary-condition changes pays the expensive stages once.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .basis import BasisSpec, DomainBox
from .koopman import KoopmanModel
from .mapinv import TpbvpMap, build_tpbvp_map, invert_tpbvp, solve_costates
from .models import (CwConfig, DuffingParams, cw_dynamics, duffing_acceleration,
                     scale_costates, scale_state, scale_time, unscale_costates,
                     unscale_state, unscale_time)
from .ocp import AugmentedSystem, augment_energy_optimal
from .oracles import (OracleError, Trajectory, control_effort, integrate,
                      shooting_oracle, stm_costate_oracle, terminal_error)
from .polynomial import PolyMap

SCHEMA_VERSION = 1
SOLVERS = ("koopman", "stm-oracle", "shooting")
DEFAULT_ORDER = {"duffing": 4, "cw": 3}

# Transition maps over a defective linear part are built at a short
# horizon and composed; this is the target horizon per composition step
# (see KoopmanModel.transition_map).  Composition kicks in once the
# fastest spurious growth rate of the generator, times the horizon,
# exceeds GROWTH_LIMIT e-foldings.
STEP_TARGET = 1.5
GROWTH_LIMIT = 0.5

# Domain box defaults: state half-widths cover the probe trajectory with
# this margin; costate half-widths are the linear-oracle estimate times
# this factor.
STATE_BOX_MARGIN = 1.4
COSTATE_BOX_FACTOR = 10.0


class ScenarioError(ValueError):
    """Scenario file failed validation."""


@dataclass
class Scenario:
    """Validated scenario: model, boundary conditions, solver options.

    CW inputs are SI (meters, meters/second, seconds); Duffing inputs are
    the model's own dimensionless units.  Optional blocks turn one solve
    into a batch: ``grid`` (initial-condition list or circle), ``tf_list``
    (time-of-flight sweep) or ``compare`` (second model spec).
    """

    model: str
    model_params: dict = field(default_factory=dict)
    x0: np.ndarray | None = None
    xf: np.ndarray | None = None
    tf: float | None = None
    max_order: int | None = None
    solver: str = "koopman"
    half_widths: dict = field(default_factory=dict)
    map_steps: int | None = None
    verify: bool = True
    grid: dict | None = None
    tf_list: list | None = None
    compare: dict | None = None
    out: str | None = None
    seed: int | None = None
    version: int = SCHEMA_VERSION

    @classmethod
    def from_dict(cls, data: Mapping) -> "Scenario":
        data = dict(data)
        version = int(data.pop("version", SCHEMA_VERSION))
        if version != SCHEMA_VERSION:
            raise ScenarioError(
                f"unsupported scenario version {version} (expected {SCHEMA_VERSION})")
        model = data.pop("model", None)
        if model not in ("duffing", "cw"):
            raise ScenarioError(f"unknown model {model!r}; use 'duffing' or 'cw'")
        known = {f for f in cls.__dataclass_fields__} - {"version"}
        unknown = set(data) - known
        if unknown:
            raise ScenarioError(f"unknown scenario fields: {sorted(unknown)}")
        sc = cls(model=model, version=version, **data)
        sc._validate()
        return sc

    @classmethod
    def from_file(cls, path) -> "Scenario":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ScenarioError(f"scenario is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def _validate(self) -> None:
        if self.solver not in SOLVERS:
            raise ScenarioError(
                f"unknown solver {self.solver!r}; pick one of {SOLVERS}")
        if self.tf is None and not self.tf_list:
            raise ScenarioError("scenario needs tf or tf_list")
        if self.tf is not None and self.tf <= 0:
            raise ScenarioError("tf must be positive")
        if self.tf_list is not None:
            tfs = [float(t) for t in self.tf_list]
            if any(t <= 0 for t in tfs):
                raise ScenarioError("every tf in tf_list must be positive")
            if any(b <= a for a, b in zip(tfs, tfs[1:])):
                raise ScenarioError("tf_list must be strictly increasing")
        if self.max_order is not None and self.max_order < 2:
            raise ScenarioError("max_order must be at least 2 for a controlled solve")
        if self.map_steps is not None and self.map_steps < 1:
            raise ScenarioError("map_steps must be a positive integer")
        prob = build_problem(self.model, self.model_params)
        m = prob.n_states
        if self.x0 is not None:
            self.x0 = _boundary_vector(self.x0, prob, "x0")
        if self.xf is not None:
            self.xf = _boundary_vector(self.xf, prob, "xf")
        else:
            self.xf = np.zeros(m)
        if self.x0 is None and self.grid is None:
            raise ScenarioError("scenario needs x0 or a grid block")
        for key in self.half_widths:
            if key not in ("state", "velocity", "costate_r", "costate_v"):
                raise ScenarioError(f"unknown half_widths key {key!r}")


def _boundary_vector(value, prob: "Problem", name: str) -> np.ndarray:
    x = np.asarray(value, dtype=float)
    m = prob.n_states
    if prob.family == "cw" and prob.config.planar and x.shape == (6,):
        # full 3-D state given for a planar model: accept if out of plane
        # components vanish, keep (x, y, vx, vy)
        if x[2] != 0.0 or x[5] != 0.0:
            raise ScenarioError(
                f"{name} has out-of-plane components but the model is planar")
        x = x[[0, 1, 3, 4]]
    if x.shape != (m,):
        raise ScenarioError(f"{name} must have {m} components, got {x.shape}")
    return x


@dataclass
class Problem:
    """A model family bound to concrete parameters, with its scalings."""

    family: str
    config: object
    system: AugmentedSystem
    n_pos: int

    @property
    def n_states(self) -> int:
        return self.system.n_states

    def linear_matrix(self) -> np.ndarray:
        b, A = self.system.dynamics.linear_part()
        return A

    # CW scenarios are stated in SI and solved in normalized scaled
    # units; Duffing is already in its own units on both sides.

    def to_model_state(self, x_si: np.ndarray) -> np.ndarray:
        if self.family == "cw":
            return scale_state(self.config, x_si)
        return np.asarray(x_si, dtype=float)

    def to_si_state(self, x_model: np.ndarray) -> np.ndarray:
        if self.family == "cw":
            return unscale_state(self.config, x_model)
        return np.asarray(x_model, dtype=float)

    def to_model_time(self, t_si: float) -> float:
        if self.family == "cw":
            return scale_time(self.config, t_si)
        return float(t_si)

    def to_si_time(self, t_model: float) -> float:
        if self.family == "cw":
            return unscale_time(self.config, t_model)
        return float(t_model)

    def to_si_costates(self, lam_model: np.ndarray) -> np.ndarray:
        if self.family == "cw":
            return unscale_costates(self.config, lam_model)
        return np.asarray(lam_model, dtype=float)

    def position_scale_m(self) -> float:
        """Meters per model position unit (1.0 for unitless models)."""
        if self.family == "cw":
            c = self.config
            return c.semi_major_axis * c.scale if c.normalize else 1.0
        return 1.0

    def state_names(self) -> tuple[str, ...]:
        if self.family == "duffing":
            return ("q", "p", "lam_q", "lam_p")
        pos = ("x", "y") if self.config.planar else ("x", "y", "z")
        vel = tuple("v" + p for p in pos)
        return pos + vel + tuple("lam_" + s for s in pos + vel)


def build_problem(model: str, params: Mapping | None) -> Problem:
    params = dict(params or {})
    try:
        if model == "duffing":
            cfg = DuffingParams(**params)
            acc = duffing_acceleration(cfg)
            return Problem("duffing", cfg, augment_energy_optimal(acc), 1)
        if model == "cw":
            cfg = CwConfig(**params)
            acc = cw_dynamics(cfg)
            return Problem("cw", cfg, augment_energy_optimal(acc), cfg.n_pos)
    except TypeError as exc:
        raise ScenarioError(f"bad parameters for model {model!r}: {exc}") from exc
    except ValueError as exc:
        raise ScenarioError(f"bad parameters for model {model!r}: {exc}") from exc
    raise ScenarioError(f"unknown model {model!r}")


def _problem_key(prob: Problem) -> tuple:
    cfg = prob.config
    if prob.family == "duffing":
        return ("duffing", cfg.mass, cfg.stiffness, cfg.amplitude, cfg.epsilon)
    return ("cw", cfg.semi_major_axis, cfg.mu, cfg.scale, cfg.k_max,
            cfg.planar, cfg.normalize)


@dataclass
class SolveReport:
    """Everything one boundary-value solve produced, JSON-ready."""

    solver: str
    lam0: np.ndarray
    lam0_scaled: np.ndarray
    terminal: dict | None
    position_error_m: float | None
    efforts: np.ndarray | None
    inversion_residual: float | None
    diagnostics: dict
    timings: dict
    cached_map: bool

    def to_dict(self) -> dict:
        return {
            "solver": self.solver,
            "lam0": list(map(float, self.lam0)),
            "lam0_scaled": list(map(float, self.lam0_scaled)),
            "terminal_error": self.terminal,
            "position_error_m": self.position_error_m,
            "control_effort": None if self.efforts is None
                              else list(map(float, self.efforts)),
            "inversion_residual": self.inversion_residual,
            "diagnostics": self.diagnostics,
            "timings": self.timings,
            "cached_map": self.cached_map,
        }


class Pipeline:
    """Scenario runner with an in-process cache of inverted maps.

    One Pipeline instance per batch; the cache maps (model, order, tf,
    steps) to the built Koopman model and inverted boundary map, so grid
    and reuse runs only pay map evaluation plus optional verification.
    """

    def __init__(self):
        self._cache: dict[tuple, tuple[KoopmanModel, TpbvpMap, int]] = {}

    # -- box sizing --------------------------------------------------------

    def _probe_box(self, prob: Problem, starts: Sequence[np.ndarray],
                   xfm: np.ndarray, tfm: float,
                   overrides: Mapping) -> DomainBox:
        """Domain box from a cheap forward probe of every start.

        Each start is integrated with the linear-oracle costate estimate;
        the box covers the worst excursion with a margin.  Costate
        half-widths default to the linear estimate times a safety factor,
        which keeps evaluated costates well inside the basis domain.
        """
        A = prob.linear_matrix()
        m = prob.n_states
        umax = 0.0
        lam_r = 0.0
        lam_v = 0.0
        for x0m in starts:
            lam_est, _ = stm_costate_oracle(A, x0m, xfm, tfm)
            z0 = np.concatenate([x0m, lam_est])
            try:
                traj = integrate(prob.system.dynamics, z0, tfm,
                                 rtol=1e-8, atol=1e-10)
                umax = max(umax, float(np.abs(traj.states[:, :m]).max()))
            except OracleError:
                # a wildly wrong linear seed can blow up; fall back to the
                # boundary states themselves
                umax = max(umax, float(np.abs(z0[:m]).max()))
            lam_r = max(lam_r, float(np.abs(lam_est[:prob.n_pos]).max()))
            lam_v = max(lam_v, float(np.abs(lam_est[prob.n_pos:]).max()))
        umax = max(umax, float(np.abs(xfm).max()), 1e-12)
        hw_state = overrides.get("state", STATE_BOX_MARGIN * umax)
        hw_vel = overrides.get("velocity", hw_state)
        hw_lr = overrides.get("costate_r",
                              COSTATE_BOX_FACTOR * max(lam_r, 1e-12))
        hw_lv = overrides.get("costate_v",
                              COSTATE_BOX_FACTOR * max(lam_v, 1e-12))
        n = prob.n_pos
        hw = np.array([hw_state] * n + [hw_vel] * n
                      + [hw_lr] * n + [hw_lv] * n, dtype=float)
        return DomainBox.centered(hw)

    # -- map construction --------------------------------------------------

    def prepare(self, prob: Problem, starts: Sequence[np.ndarray],
                xfm: np.ndarray, tfm: float, order: int,
                overrides: Mapping, map_steps: int | None,
                timings: dict) -> tuple[KoopmanModel, TpbvpMap, int, bool]:
        key = (_problem_key(prob), order, float(tfm), map_steps)
        if key in self._cache:
            model, tpbvp, steps = self._cache[key]
            return model, tpbvp, steps, True
        t0 = time.perf_counter()
        box = self._probe_box(prob, starts, xfm, tfm, overrides)
        timings["probe_s"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        model = KoopmanModel.build(prob.system.dynamics,
                                   BasisSpec(prob.system.dim, order), box)
        timings["koopman_build_s"] = time.perf_counter() - t0
        if map_steps is None:
            # Galerkin truncation of a defective linear part splits its
            # Jordan chains into eigenvalue rings with spurious positive
            # real parts; one long exponential then amplifies noise by
            # exp(growth * tf).  When that exposure is non-trivial, build
            # the map at a short horizon and compose, which re-truncates
            # at every step and keeps the runaway directions out.
            growth = float(np.linalg.eigvals(model.K).real.max())
            if growth * tfm <= GROWTH_LIMIT:
                steps = 1
            else:
                steps = max(1, int(np.ceil(tfm / STEP_TARGET)))
        else:
            steps = map_steps
        m = prob.n_states
        t0 = time.perf_counter()
        tmap = model.transition_map(tfm, steps=steps)
        timings["transition_map_s"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        forward = build_tpbvp_map(PolyMap(tmap.components[:m]), m)
        tpbvp = invert_tpbvp(forward, model.box, order,
                             meta={"tf_model": float(tfm), "steps": steps})
        timings["inversion_s"] = time.perf_counter() - t0
        self._cache[key] = (model, tpbvp, steps)
        return model, tpbvp, steps, False

    # -- solvers -----------------------------------------------------------

    def solve(self, scenario: Scenario, x0: np.ndarray | None = None,
              tf: float | None = None,
              starts: Sequence[np.ndarray] | None = None
              ) -> tuple[SolveReport, Trajectory | None]:
        """One boundary-value solve; returns the report and, when the
        scenario asks for verification, the truth trajectory (SI units).
        """
        prob = build_problem(scenario.model, scenario.model_params)
        x0_in = scenario.x0 if x0 is None else np.asarray(x0, dtype=float)
        tf_in = scenario.tf if tf is None else float(tf)
        if x0_in is None or tf_in is None:
            raise ScenarioError("solve needs x0 and tf")
        x0m = prob.to_model_state(x0_in)
        xfm = prob.to_model_state(scenario.xf)
        tfm = prob.to_model_time(tf_in)
        timings: dict = {}
        diagnostics: dict = {}
        cached = False
        inv_res = None
        order = scenario.max_order or DEFAULT_ORDER[prob.family]

        t_total = time.perf_counter()
        if scenario.solver == "koopman":
            probe_starts = (
                [prob.to_model_state(s) for s in starts]
                if starts is not None else [x0m])
            model, tpbvp, steps, cached = self.prepare(
                prob, probe_starts, xfm, tfm, order,
                scenario.half_widths, scenario.map_steps, timings)
            t0 = time.perf_counter()
            lam_model, info = solve_costates(tpbvp, x0m, xfm)
            timings["costate_eval_s"] = time.perf_counter() - t0
            inv_res = tpbvp.residual
            diagnostics = {
                "basis_size": model.spec.size,
                "max_row_residual": model.diagnostics["max_row_residual"],
                "eigenvector_condition":
                    model.diagnostics["eigenvector_condition"],
                "mode": model.mode,
                "map_steps": steps,
                "costate_in_box": info["costate_in_box"],
                "box_half_widths": list(map(float, model.box.half_widths)),
            }
        elif scenario.solver == "stm-oracle":
            t0 = time.perf_counter()
            lam_model, _ = stm_costate_oracle(prob.linear_matrix(), x0m, xfm, tfm)
            timings["oracle_s"] = time.perf_counter() - t0
            diagnostics = {"note": "linear closed form on the model's "
                                   "linear part"}
        else:  # shooting
            t0 = time.perf_counter()
            lam_model, info = shooting_oracle(prob.system, x0m, xfm, tfm)
            timings["oracle_s"] = time.perf_counter() - t0
            diagnostics = {"iterations": info["iterations"],
                           "residual": info["residual"]}

        traj_si = None
        terminal = None
        pos_err_m = None
        efforts = None
        if scenario.verify:
            t0 = time.perf_counter()
            z0 = np.concatenate([x0m, lam_model])
            t_eval = np.linspace(0.0, tfm, 401)
            traj = integrate(prob.system.dynamics, z0, tfm, t_eval=t_eval,
                             names=prob.state_names())
            timings["truth_integration_s"] = time.perf_counter() - t0
            terminal = terminal_error(traj, xfm)
            pos_scale = prob.position_scale_m()
            pos_err_m = float(np.linalg.norm(
                traj.final_state[:prob.n_pos] - xfm[:prob.n_pos]) * pos_scale)
            efforts = control_effort(traj, tfm)
            traj_si = _trajectory_to_si(prob, traj)
        timings["total_s"] = time.perf_counter() - t_total

        report = SolveReport(
            solver=scenario.solver,
            lam0=prob.to_si_costates(lam_model),
            lam0_scaled=np.asarray(lam_model, dtype=float),
            terminal=terminal,
            position_error_m=pos_err_m,
            efforts=efforts,
            inversion_residual=inv_res,
            diagnostics=diagnostics,
            timings=timings,
            cached_map=cached,
        )
        return report, traj_si


def _trajectory_to_si(prob: Problem, traj: Trajectory) -> Trajectory:
    m = prob.n_states
    times = np.array([prob.to_si_time(t) for t in traj.times])
    states = np.empty_like(traj.states)
    for k in range(traj.states.shape[0]):
        states[k, :m] = prob.to_si_state(traj.states[k, :m])
        states[k, m:] = prob.to_si_costates(traj.states[k, m:])
    return Trajectory(times, states, traj.names)


def circle_starts(scenario: Scenario) -> list[np.ndarray]:
    """Initial conditions on a circle of starts around the target.

    Positions sit every 2*pi/count radians at the given radius; the
    along-track velocity compensates the tangential rate difference of
    the displaced circular orbit (ydot = -n x0), matching the grid setup
    used for direction sweeps.
    """
    prob = build_problem(scenario.model, scenario.model_params)
    if prob.family != "cw":
        raise ScenarioError("circle grids are a relative-motion feature")
    spec = scenario.grid["circle"]
    radius = float(spec["radius"])
    count = int(spec.get("count", 8))
    if radius <= 0 or count < 1:
        raise ScenarioError("circle grid needs radius > 0 and count >= 1")
    n = prob.config.mean_motion
    out = []
    for k in range(count):
        th = 2 * np.pi * k / count
        x = radius * np.cos(th)
        y = radius * np.sin(th)
        if prob.config.planar:
            out.append(np.array([x, y, 0.0, -n * x]))
        else:
            out.append(np.array([x, y, 0.0, 0.0, -n * x, 0.0]))
    return out


def grid_starts(scenario: Scenario) -> list[np.ndarray]:
    if not scenario.grid:
        raise ScenarioError("scenario has no grid block")
    if "points" in scenario.grid:
        prob = build_problem(scenario.model, scenario.model_params)
        return [_boundary_vector(p, prob, f"grid point {i}")
                for i, p in enumerate(scenario.grid["points"])]
    if "circle" in scenario.grid:
        return circle_starts(scenario)
    raise ScenarioError("grid block needs 'points' or 'circle'")


def run_grid(scenario: Scenario, pipeline: Pipeline | None = None) -> dict:
    """One solve per grid start, sharing a single inverted map.

    Per-point failures are recorded and the batch continues; the result
    dict carries per-point reports plus a summary table.
    """
    pipeline = pipeline or Pipeline()
    starts = grid_starts(scenario)
    results = []
    for i, x0 in enumerate(starts):
        try:
            report, _ = pipeline.solve(scenario, x0=x0, starts=starts)
            results.append({"index": i, "x0": list(map(float, x0)),
                            "status": "ok", "report": report.to_dict()})
        except Exception as exc:  # record and continue
            results.append({"index": i, "x0": list(map(float, x0)),
                            "status": "failed",
                            "error": f"{type(exc).__name__}: {exc}"})
    ok = [r for r in results if r["status"] == "ok"]
    return {
        "kind": "grid",
        "count": len(results),
        "succeeded": len(ok),
        "points": results,
    }


def run_sweep(scenario: Scenario, pipeline: Pipeline | None = None) -> dict:
    """One solve per time of flight; reports efforts and monotonicity."""
    pipeline = pipeline or Pipeline()
    if not scenario.tf_list:
        raise ScenarioError("scenario has no tf_list")
    results = []
    for tf in scenario.tf_list:
        try:
            report, _ = pipeline.solve(scenario, tf=float(tf))
            results.append({"tf": float(tf), "status": "ok",
                            "report": report.to_dict()})
        except Exception as exc:
            results.append({"tf": float(tf), "status": "failed",
                            "error": f"{type(exc).__name__}: {exc}"})
    ok = [r for r in results if r["status"] == "ok"]
    efforts = [r["report"]["control_effort"] for r in ok
               if r["report"]["control_effort"] is not None]
    monotone = None
    if len(efforts) >= 2:
        arr = np.asarray(efforts)
        monotone = bool(np.all(np.diff(arr, axis=0) <= 1e-9))
    return {
        "kind": "sweep",
        "count": len(results),
        "succeeded": len(ok),
        "efforts_non_increasing": monotone,
        "points": results,
    }


def run_compare(scenario: Scenario, pipeline: Pipeline | None = None) -> dict:
    """Two models, one boundary problem: drift apart, then solve under each.

    Uncontrolled trajectories of both models are propagated from x0 and
    their separation reported.  Each model's costates are then truth
    integrated under the richer model, which is the honest test of what a
    lower-order design misses.
    """
    pipeline = pipeline or Pipeline()
    if not scenario.compare:
        raise ScenarioError("scenario has no compare block")
    spec_b = dict(scenario.compare)
    model_b = spec_b.get("model", scenario.model)
    params_b = spec_b.get("model_params", {})
    prob_a = build_problem(scenario.model, scenario.model_params)
    prob_b = build_problem(model_b, params_b)
    if prob_a.n_states != prob_b.n_states:
        raise ScenarioError("compared models must share the state layout")
    if scenario.x0 is None or scenario.tf is None:
        raise ScenarioError("compare needs x0 and tf")

    # richer model is the truth side
    def depth(prob):
        return getattr(prob.config, "k_max", 0)
    truth_prob, truth_name = ((prob_a, "a") if depth(prob_a) >= depth(prob_b)
                              else (prob_b, "b"))

    x0m_a = prob_a.to_model_state(scenario.x0)
    x0m_b = prob_b.to_model_state(scenario.x0)
    tfm_a = prob_a.to_model_time(scenario.tf)
    tfm_b = prob_b.to_model_time(scenario.tf)
    m = prob_a.n_states
    t_eval_a = np.linspace(0.0, tfm_a, 401)
    t_eval_b = np.linspace(0.0, tfm_b, 401)
    # uncontrolled = zero costates in the augmented system
    za = np.concatenate([x0m_a, np.zeros(m)])
    zb = np.concatenate([x0m_b, np.zeros(m)])
    ta = integrate(prob_a.system.dynamics, za, tfm_a, t_eval=t_eval_a)
    tb = integrate(prob_b.system.dynamics, zb, tfm_b, t_eval=t_eval_b)
    pos_a = np.array([prob_a.to_si_state(s[:m])[:prob_a.n_pos]
                      for s in ta.states])
    pos_b = np.array([prob_b.to_si_state(s[:m])[:prob_b.n_pos]
                      for s in tb.states])
    sep = np.linalg.norm(pos_a - pos_b, axis=1)

    # controlled: each model's own costates, truth under the richer model
    terminal = {}
    for tag, mdl, prm in (("a", scenario.model, scenario.model_params),
                          ("b", model_b, params_b)):
        sub = Scenario(model=mdl, model_params=dict(prm or {}),
                       x0=np.asarray(scenario.x0, dtype=float),
                       xf=np.asarray(scenario.xf, dtype=float),
                       tf=scenario.tf, max_order=scenario.max_order,
                       solver=scenario.solver,
                       half_widths=dict(scenario.half_widths),
                       map_steps=scenario.map_steps, verify=False)
        sub.xf = _boundary_vector(sub.xf, build_problem(mdl, prm), "xf")
        report, _ = pipeline.solve(sub)
        # costates in SI, rescaled into the truth model's units
        lam_si = np.asarray(report.lam0, dtype=float)
        if truth_prob.family == "cw":
            lam_model_truth = scale_costates(truth_prob.config, lam_si)
        else:
            lam_model_truth = lam_si
        x0m_t = truth_prob.to_model_state(scenario.x0)
        xfm_t = truth_prob.to_model_state(scenario.xf)
        tfm_t = truth_prob.to_model_time(scenario.tf)
        z0 = np.concatenate([x0m_t, lam_model_truth])
        traj = integrate(truth_prob.system.dynamics, z0, tfm_t)
        pos_scale = truth_prob.position_scale_m()
        terminal[tag] = {
            "lam0": list(map(float, lam_si)),
            "terminal_position_error_m": float(np.linalg.norm(
                (traj.final_state[:truth_prob.n_pos]
                 - xfm_t[:truth_prob.n_pos])) * pos_scale),
        }

    return {
        "kind": "compare",
        "truth_model": truth_name,
        "uncontrolled_divergence_m": {
            "final": float(sep[-1]),
            "max": float(sep.max()),
            "times_s": [float(prob_a.to_si_time(t)) for t in ta.times],
            "separation_m": list(map(float, sep)),
        },
        "controlled": terminal,
    }
