"""Model primitives: parameters, scenarios, fitness, and right-hand sides.

Two agent types forage for unit-size goods. Automatic agents acquire a good
each step with probability ``p_A = rho*(1 + beta*x)`` and consume it at once
for a payoff ``1/(1+a)``; controlled agents acquire with
``p_C = rho*(1 - beta*(1-x))`` and smooth consumption over the expected
waiting time, for a per-step payoff ``p_C/(a + p_C)``. The fraction ``x`` of
controlled agents follows the replicator equation; feedback scenarios couple
``beta`` and/or ``rho`` back to ``x`` through first-order lags.

Everything in this module is a pure function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence


class DomainError(ValueError):
    """Raised when an input is outside the model's admissible domain."""


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise DomainError(msg)


@dataclass(frozen=True)
class ModelParams:
    """The environment triple (a, rho, beta).

    a > 0 sets the curvature of the consumption payoff z/(a+z) (smaller a =
    more steeply diminishing returns), rho in (0, 1] is the per-step
    probability of finding a good, beta in [0, 1] is the acquisition
    advantage of automatic agents. Values outside these ranges are rejected,
    not clamped: beta > 1 would allow p_C < 0 and a pole in the replicator
    right-hand side.
    """

    a: float
    rho: float
    beta: float

    def __post_init__(self) -> None:
        _require(math.isfinite(self.a) and self.a > 0.0, f"a must be > 0, got {self.a}")
        _require(
            math.isfinite(self.rho) and 0.0 < self.rho <= 1.0,
            f"rho must be in (0, 1], got {self.rho}",
        )
        _require(
            math.isfinite(self.beta) and 0.0 <= self.beta <= 1.0,
            f"beta must be in [0, 1], got {self.beta}",
        )


class ScenarioKind(Enum):
    """Which environment variables are dynamic."""

    CONSTANT = "const"
    BETA_FEEDBACK = "beta"
    RHO_FEEDBACK = "rho"
    DUAL_FEEDBACK = "both"


# Integer codes used by the compiled kernels; order matches state layouts below.
KIND_CODE = {
    ScenarioKind.CONSTANT: 0,
    ScenarioKind.BETA_FEEDBACK: 1,
    ScenarioKind.RHO_FEEDBACK: 2,
    ScenarioKind.DUAL_FEEDBACK: 3,
}

_STATE_FIELDS = {
    ScenarioKind.CONSTANT: ("x",),
    ScenarioKind.BETA_FEEDBACK: ("x", "beta"),
    ScenarioKind.RHO_FEEDBACK: ("x", "rho"),
    ScenarioKind.DUAL_FEEDBACK: ("x", "beta", "rho"),
}


@dataclass(frozen=True)
class Scenario:
    """A dynamical setting: constant environment or one of the feedback systems.

    Lag constants are required exactly for the feedback variables the kind
    declares dynamic and must be strictly positive.
    """

    kind: ScenarioKind
    tau_beta: float | None = None
    tau_rho: float | None = None

    def __post_init__(self) -> None:
        if self.has_beta_feedback:
            _require(
                self.tau_beta is not None and math.isfinite(self.tau_beta) and self.tau_beta > 0.0,
                f"{self.kind.value!r} scenario needs tau_beta > 0, got {self.tau_beta}",
            )
        else:
            _require(self.tau_beta is None, f"{self.kind.value!r} scenario takes no tau_beta")
        if self.has_rho_feedback:
            _require(
                self.tau_rho is not None and math.isfinite(self.tau_rho) and self.tau_rho > 0.0,
                f"{self.kind.value!r} scenario needs tau_rho > 0, got {self.tau_rho}",
            )
        else:
            _require(self.tau_rho is None, f"{self.kind.value!r} scenario takes no tau_rho")

    # -- constructors ------------------------------------------------------
    @staticmethod
    def constant() -> "Scenario":
        return Scenario(ScenarioKind.CONSTANT)

    @staticmethod
    def beta_feedback(tau_beta: float) -> "Scenario":
        return Scenario(ScenarioKind.BETA_FEEDBACK, tau_beta=tau_beta)

    @staticmethod
    def rho_feedback(tau_rho: float) -> "Scenario":
        return Scenario(ScenarioKind.RHO_FEEDBACK, tau_rho=tau_rho)

    @staticmethod
    def dual_feedback(tau_beta: float, tau_rho: float) -> "Scenario":
        return Scenario(ScenarioKind.DUAL_FEEDBACK, tau_beta=tau_beta, tau_rho=tau_rho)

    # -- structure ---------------------------------------------------------
    @property
    def has_beta_feedback(self) -> bool:
        return self.kind in (ScenarioKind.BETA_FEEDBACK, ScenarioKind.DUAL_FEEDBACK)

    @property
    def has_rho_feedback(self) -> bool:
        return self.kind in (ScenarioKind.RHO_FEEDBACK, ScenarioKind.DUAL_FEEDBACK)

    @property
    def dim(self) -> int:
        return len(_STATE_FIELDS[self.kind])

    @property
    def state_fields(self) -> tuple[str, ...]:
        return _STATE_FIELDS[self.kind]

    def max_lag(self) -> float:
        """Largest lag constant present (0.0 for the constant environment)."""
        return max(self.tau_beta or 0.0, self.tau_rho or 0.0)


@dataclass(frozen=True)
class SystemState:
    """Effective state (x, beta, rho).

    All three components are always populated; for non-dynamic components the
    value mirrors the ModelParams entry it was built from. Conversion to a
    vector keeps only the scenario's dynamic layout.
    """

    x: float
    beta: float
    rho: float

    @staticmethod
    def from_vector(scenario: Scenario, params: ModelParams, y: Sequence[float]) -> "SystemState":
        fields = scenario.state_fields
        if len(y) != len(fields):
            raise DomainError(
                f"state dimension {len(y)} does not match scenario "
                f"{scenario.kind.value!r} (expects {len(fields)})"
            )
        vals = {"x": float(y[0]), "beta": params.beta, "rho": params.rho}
        for name, v in zip(fields, y):
            vals[name] = float(v)
        return SystemState(**vals)

    def to_vector(self, scenario: Scenario) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in scenario.state_fields)


@dataclass(frozen=True)
class FitnessPair:
    """Per-step acquisition and fitness quantities for both agent types.

    Identities (tested): p_a - p_c == rho*beta, f_c == p_c/(a + p_c),
    f_a == p_a/(1 + a), tau fields are reciprocals of the p fields.
    ``diagnostics`` carries non-fatal flags, e.g. "p_A>1" when the nominal
    acquisition probability of automatic agents exceeds one (the formulas
    remain well defined; the probabilistic reading is strained).
    """

    p_a: float
    p_c: float
    tau_a: float
    tau_c: float
    f_a: float
    f_c: float
    diagnostics: tuple[str, ...] = field(default=())


def _check_x(x: float) -> float:
    x = float(x)
    _require(math.isfinite(x) and 0.0 <= x <= 1.0, f"x must be in [0, 1], got {x}")
    return x


def _pair(params: ModelParams, x: float) -> FitnessPair:
    a, rho, beta = params.a, params.rho, params.beta
    p_a = rho * (1.0 + beta * x)
    p_c = rho * (1.0 - beta * (1.0 - x))
    tau_a = 1.0 / p_a if p_a > 0.0 else math.inf
    tau_c = 1.0 / p_c if p_c > 0.0 else math.inf
    f_a = p_a / (1.0 + a)
    f_c = p_c / (a + p_c)
    diags = ("p_A>1",) if p_a > 1.0 else ()
    return FitnessPair(p_a=p_a, p_c=p_c, tau_a=tau_a, tau_c=tau_c, f_a=f_a, f_c=f_c, diagnostics=diags)


def acquisition(params: ModelParams, x: float) -> FitnessPair:
    """Acquisition probabilities p_A = rho(1+beta x), p_C = rho(1-beta(1-x))
    and their reciprocal waiting times, at controlled fraction x."""
    return _pair(params, _check_x(x))


def fitness(params: ModelParams, x: float) -> FitnessPair:
    """Per-step fitnesses f_A = p_A/(1+a) (immediate consumption) and
    f_C = p_C/(a+p_C) (consumption smoothed over the waiting time)."""
    return _pair(params, _check_x(x))


def replicator_rhs(params: ModelParams, x: float) -> float:
    """dx/dt of the controlled fraction.

    Evaluates the expanded form
    ``(x-1)*x*(a/(a + p_C) + p_A/(1+a) - 1)``, which is algebraically equal
    to ``x*(1-x)*(f_C - f_A)`` (the factored form is kept as an independent
    route in the tests). Endpoints x=0 and x=1 are exact zeros.
    """
    x = _check_x(x)
    a, rho, beta = params.a, params.rho, params.beta
    denom = a - beta * rho + rho + beta * rho * x  # = a + p_C
    return (x - 1.0) * x * (a / denom + (rho + beta * rho * x) / (a + 1.0) - 1.0)


def _raw_rhs(kind_code: int, a: float, rho0: float, beta0: float,
             inv_tau_beta: float, inv_tau_rho: float, y: Sequence[float]) -> tuple[float, ...]:
    """Derivative of the state vector; permissive about tiny excursions of x
    outside [0,1] (Runge-Kutta stages may probe there)."""
    x = y[0]
    beta = beta0
    rho = rho0
    if kind_code == 1:
        beta = y[1]
    elif kind_code == 2:
        rho = y[1]
    elif kind_code == 3:
        beta = y[1]
        rho = y[2]
    denom = a - beta * rho + rho + beta * rho * x
    dx = (x - 1.0) * x * (a / denom + (rho + beta * rho * x) / (a + 1.0) - 1.0)
    if kind_code == 0:
        return (dx,)
    if kind_code == 1:
        return (dx, (x - beta) * inv_tau_beta)
    if kind_code == 2:
        return (dx, (x - rho) * inv_tau_rho)
    return (dx, (x - beta) * inv_tau_beta, (x - rho) * inv_tau_rho)


def system_rhs(scenario: Scenario, params: ModelParams, state: SystemState | Sequence[float]) -> tuple[float, ...]:
    """Derivative vector for the scenario's state layout.

    Dynamic components override the ModelParams values in the replicator
    term; the x-component always equals replicator_rhs evaluated at the
    effective (beta, rho). Accepts a SystemState or a raw vector of matching
    dimension; a dimension mismatch is an error.
    """
    if isinstance(state, SystemState):
        y = state.to_vector(scenario)
    else:
        y = tuple(float(v) for v in state)
        if len(y) != scenario.dim:
            raise DomainError(
                f"state dimension {len(y)} does not match scenario "
                f"{scenario.kind.value!r} (expects {scenario.dim})"
            )
    inv_tb = 1.0 / scenario.tau_beta if scenario.tau_beta else 0.0
    inv_tr = 1.0 / scenario.tau_rho if scenario.tau_rho else 0.0
    return _raw_rhs(KIND_CODE[scenario.kind], params.a, params.rho, params.beta, inv_tb, inv_tr, y)


# ---------------------------------------------------------------------------
# Analytic partial derivatives (used by the Jacobian in `equilibria`).
# ---------------------------------------------------------------------------

def growth_gap(params: ModelParams, x: float, beta: float | None = None, rho: float | None = None) -> float:
    """f_C - f_A at the effective (beta, rho); sign drives the replicator flow."""
    a = params.a
    b = params.beta if beta is None else beta
    r = params.rho if rho is None else rho
    p_c = r * (1.0 - b * (1.0 - x))
    p_a = r * (1.0 + b * x)
    return p_c / (a + p_c) - p_a / (1.0 + a)


def xdot_partials(a: float, rho: float, beta: float, x: float) -> tuple[float, float, float]:
    """(d/dx, d/dbeta, d/drho) of xdot = x(1-x)(f_C - f_A) at (x, beta, rho).

    The beta/rho partials treat those symbols as free state variables, which
    is what the feedback Jacobians need.
    """
    p_c = rho * (1.0 - beta * (1.0 - x))
    p_a = rho * (1.0 + beta * x)
    ap = a + p_c
    g = p_c / ap - p_a / (1.0 + a)
    dg_dx = a * rho * beta / (ap * ap) - rho * beta / (1.0 + a)
    dg_db = -a * rho * (1.0 - x) / (ap * ap) - rho * x / (1.0 + a)
    dg_dr = a * (p_c / rho) / (ap * ap) - (p_a / rho) / (1.0 + a)
    w = x * (1.0 - x)
    return (
        (1.0 - 2.0 * x) * g + w * dg_dx,
        w * dg_db,
        w * dg_dr,
    )
