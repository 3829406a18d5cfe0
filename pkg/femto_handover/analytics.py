"""
Traffic analytics - closed-form two-tier model.

Release rates, handover probabilities, femtocell Erlang-B loss, the
macrocell birth-death chain with degradation channels, and the fixed point
that couples the four handover streams to the blocking and dropping
probabilities.
"""

import logging
import math
from dataclasses import asdict, dataclass, replace
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from femto_handover.errors import DomainError, NumericError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrafficParams:
    """Inputs of the analytical model (rates in 1/s)."""

    n: int = 1000
    r_f: float = 10.0
    r_m: float = 1000.0
    mu: float = 1 / 120
    eta_f: float = 1 / 360
    eta_m: float = 1 / 240
    lambda_f_o: float = 0.0
    lambda_m_o: float = 0.0
    K: int = 4
    n_channels: int = 100
    s_channels: int = 23
    alpha: float = 0.5

    def __post_init__(self):
        problems = []
        for name in ("mu", "eta_f", "eta_m", "lambda_f_o", "lambda_m_o"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                problems.append(f"{name} must be a finite non-negative rate, got {value}")
        if self.mu <= 0:
            problems.append("mu must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            problems.append(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.n < 0 or self.K < 1 or self.n_channels < 1 or self.s_channels < 0:
            problems.append(f"invalid counts n={self.n}, K={self.K}, N_ch={self.n_channels}, S_ch={self.s_channels}")
        if self.area_fraction > 1.0:
            problems.append(f"femto area fraction n(r_f/r_m)^2 = {self.area_fraction:.4g} exceeds 1")
        if problems:
            raise DomainError("; ".join(problems))

    @property
    def area_fraction(self) -> float:
        return self.n * (self.r_f / self.r_m) ** 2

    @classmethod
    def from_config(cls, config, n: Optional[int] = None, alpha: Optional[float] = None) -> "TrafficParams":
        """
        Build parameters from a ScenarioConfig.

        The total originating rate is split between femto-covered and
        macro-only area in proportion density_ratio * n(r_f/r_m)^2 : 1 - n(r_f/r_m)^2.

        Args:
            config: ScenarioConfig
            n: FAP count override (defaults to topology.n_faps)
            alpha: Override of traffic.alpha (e.g. the measured value)
        """
        topo = config.topology
        traffic = config.traffic
        n = topo.n_faps if n is None else n
        area = n * (topo.fap_radius_m / topo.macro_radius_m) ** 2
        if area > 1.0:
            raise DomainError(f"femto area fraction n(r_f/r_m)^2 = {area:.4g} exceeds 1")
        lambda_f, lambda_m = split_arrivals(traffic.total_arrival_rate, area, traffic.density_ratio)
        return cls(
            n=n,
            r_f=topo.fap_radius_m,
            r_m=topo.macro_radius_m,
            mu=1.0 / traffic.call_duration_s,
            eta_f=1.0 / traffic.femto_dwell_s,
            eta_m=1.0 / traffic.macro_dwell_s,
            lambda_f_o=lambda_f,
            lambda_m_o=lambda_m,
            K=topo.fap_capacity,
            n_channels=config.n_channels,
            s_channels=config.s_channels,
            alpha=traffic.alpha if alpha is None else alpha,
        )


def split_arrivals(total_rate: float, area_fraction: float, density_ratio: float) -> Tuple[float, float]:
    """(femto-area, macro-only) originating rates for a fixed total."""
    w_f = density_ratio * area_fraction
    w_m = 1.0 - area_fraction
    if w_f + w_m <= 0:
        return 0.0, total_rate
    return total_rate * w_f / (w_f + w_m), total_rate * w_m / (w_f + w_m)


@dataclass(frozen=True)
class HandoverProbabilities:
    p_h_mm: float
    p_h_mf: float
    p_h_ff: float
    p_h_fm: float


@dataclass(frozen=True)
class TrafficSolution:
    """Fixed point of the handover streams with the resulting loss probabilities."""

    lambda_h_mm: float
    lambda_h_mf: float
    lambda_h_ff: float
    lambda_h_fm: float
    p_b_f: float
    p_d_f: float
    p_b_m: float
    p_d_m: float
    p_h_mm: float
    p_h_mf: float
    p_h_ff: float
    p_h_fm: float
    mu_m: float
    mu_f: float
    lambda_t_f: float
    lambda_h_m: float
    alpha: float
    iterations: int
    converged: bool
    residual: float
    forced_termination: float = float("nan")

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)


def release_rates(params: TrafficParams) -> Tuple[float, float]:
    """
    Channel release rates.

    Returns:
        (mu_m, mu_f) = (eta_m + mu, eta_f + mu)
    """
    return params.eta_m + params.mu, params.eta_f + params.mu


def handover_probabilities(params: TrafficParams) -> HandoverProbabilities:
    """
    Probabilities that a call hands over before it ends, per handover kind.

    Raises:
        DomainError: femto area exceeds the macrocell
    """
    ratio2 = (params.r_f / params.r_m) ** 2
    area = params.n * ratio2
    if area > 1.0:
        raise DomainError(f"femto area fraction {area:.4g} exceeds 1")
    femto_exit = params.eta_f / (params.eta_f + params.mu)
    scaled = params.eta_m * math.sqrt(params.n)
    return HandoverProbabilities(
        p_h_mm=params.eta_m / (params.eta_m + params.mu),
        p_h_mf=area * scaled / (scaled + params.mu) if params.n else 0.0,
        p_h_ff=max(0.0, (params.n - 1) * ratio2) * femto_exit,
        p_h_fm=(1.0 - area) * femto_exit,
    )


def erlang_b(servers: int, offered: float) -> float:
    """Erlang-B blocking by the stable recursion B(k) = aB(k-1) / (k + aB(k-1))."""
    if offered < 0 or servers < 0:
        raise DomainError(f"Erlang-B needs offered >= 0 and servers >= 0, got ({offered}, {servers})")
    b = 1.0
    for k in range(1, servers + 1):
        b = offered * b / (k + offered * b)
    return b


def erlang_b_direct(servers: int, offered: float) -> float:
    """Erlang-B from the truncated Poisson sum (log-space)."""
    if offered == 0:
        return 0.0 if servers > 0 else 1.0
    i = np.arange(servers + 1)
    log_terms = i * math.log(offered) - np.array([math.lgamma(k + 1) for k in i])
    log_terms -= log_terms.max()
    terms = np.exp(log_terms)
    return float(terms[-1] / terms.sum())


def femto_blocking(offered_per_fap: float, capacity: int) -> float:
    """Blocking (and dropping) probability of one K-slot FAP."""
    return erlang_b(capacity, offered_per_fap)


def birth_death_distribution(birth: Sequence[float], death: Sequence[float]) -> np.ndarray:
    """
    Stationary distribution of a finite birth-death chain.

    Args:
        birth: Rates out of states 0..S-1 upward
        death: Rates out of states 1..S downward (all positive)

    Returns:
        Probability vector over states 0..S
    """
    birth = np.asarray(birth, dtype=float)
    death = np.asarray(death, dtype=float)
    if birth.shape != death.shape:
        raise DomainError("birth and death rate vectors must have equal length")
    if np.any(death <= 0) or np.any(birth < 0):
        raise DomainError("death rates must be positive and birth rates non-negative")
    with np.errstate(divide="ignore"):
        steps = np.log(birth) - np.log(death)
    log_p = np.concatenate(([0.0], np.cumsum(steps)))
    finite = np.isfinite(log_p)
    log_p = np.where(finite, log_p - log_p[finite].max(), -np.inf)
    p = np.exp(log_p)
    return p / p.sum()


def macro_blocking_dropping(
    lambda_new: float,
    lambda_ho: float,
    mu_m: float,
    n_channels: int,
    s_channels: int,
) -> Tuple[float, float]:
    """
    Macrocell chain: new calls admitted below N_ch, handovers up to N_ch + S_ch.

    Returns:
        (P_B_m, P_D_m) with P_B_m the mass on states N_ch..N_ch+S_ch and
        P_D_m the mass on the full state
    """
    if mu_m <= 0 or n_channels < 1 or s_channels < 0:
        raise DomainError(f"invalid macro chain mu_m={mu_m}, N_ch={n_channels}, S_ch={s_channels}")
    total = n_channels + s_channels
    birth = [lambda_new + lambda_ho] * n_channels + [lambda_ho] * s_channels
    death = mu_m * np.arange(1, total + 1)
    p = birth_death_distribution(birth, death)
    return float(p[n_channels:].sum()), float(p[total])


def macro_first_share(alpha: float) -> float:
    """Share of femto-to-femto attempts that try the macrocell first."""
    return 1.0 - alpha


def _evaluate(x: np.ndarray, params: TrafficParams, probs: HandoverProbabilities, mu_m: float, mu_f: float) -> np.ndarray:
    l_mm, l_mf, l_ff, l_fm, p_f, p_b_m, p_d_m = x
    alpha = params.alpha
    beta = macro_first_share(alpha)

    new_m = params.lambda_m_o + params.lambda_f_o * p_f
    macro_in = (1 - p_b_m) * new_m + (1 - p_d_m) * (l_fm + l_ff * (beta + alpha * p_f))
    macro_den = 1 - probs.p_h_mm * (1 - p_d_m)
    femto_in = params.lambda_f_o * (1 - p_f) + l_mf * (1 - p_f)
    femto_den = 1 - probs.p_h_ff * (1 - p_f) * (alpha + beta * p_d_m)

    n_mm = probs.p_h_mm * macro_in / macro_den
    n_mf = probs.p_h_mf * macro_in / macro_den
    n_ff = probs.p_h_ff * femto_in / femto_den
    n_fm = probs.p_h_fm * femto_in / femto_den

    lambda_t_f = params.lambda_f_o + n_mf + alpha * n_ff + p_d_m * beta * n_ff
    n_pf = femto_blocking(lambda_t_f / params.n / mu_f, params.K) if params.n else 0.0

    lambda_h_m = n_mm + n_fm + alpha * n_pf * n_ff + beta * n_ff
    n_pbm, n_pdm = macro_blocking_dropping(
        params.lambda_m_o + params.lambda_f_o * n_pf,
        lambda_h_m,
        mu_m,
        params.n_channels,
        params.s_channels,
    )
    return np.array([n_mm, n_mf, n_ff, n_fm, n_pf, n_pbm, n_pdm])


def solve_fixed_point(
    params: TrafficParams,
    tol: float = 1e-9,
    max_iter: int = 1000,
    damping: float = 1.0,
) -> TrafficSolution:
    """
    Solve the coupled handover-rate and loss-probability equations.

    Starts from zero handover rates and zero loss, applies damped successive
    substitution and halves the damping whenever the residual grows.

    Args:
        params: Model inputs
        tol: Stop when no value changes by tol or more
        max_iter: Iteration cap; reaching it returns converged=False
        damping: Step factor in (0, 1]

    Returns:
        TrafficSolution (forced_termination filled in)

    Raises:
        NumericError: an intermediate value is not finite
    """
    if tol <= 0 or not 0 < damping <= 1:
        raise DomainError(f"tol must be positive and damping in (0, 1], got tol={tol}, damping={damping}")
    probs = handover_probabilities(params)
    mu_m, mu_f = release_rates(params)
    x = np.zeros(7)
    residual = math.inf
    converged = False
    iteration = 0
    step = damping
    for iteration in range(1, max_iter + 1):
        fx = _evaluate(x, params, probs, mu_m, mu_f)
        if not np.all(np.isfinite(fx)):
            raise NumericError(
                "fixed-point iterate is not finite",
                iteration,
                {"state": x.tolist(), "next": fx.tolist()},
            )
        delta = float(np.max(np.abs(fx - x)))
        if delta > residual and step > 1 / 64:
            step /= 2
            logger.debug("residual grew to %.3g at iteration %d; damping now %.4g", delta, iteration, step)
        residual = delta
        if residual < tol:
            x = fx
            converged = True
            break
        x = x + step * (fx - x)
    if not converged:
        logger.warning("fixed point did not converge in %d iterations (residual %.3g)", max_iter, residual)

    l_mm, l_mf, l_ff, l_fm, p_f, p_b_m, p_d_m = (float(v) for v in x)
    beta = macro_first_share(params.alpha)
    solution = TrafficSolution(
        lambda_h_mm=l_mm,
        lambda_h_mf=l_mf,
        lambda_h_ff=l_ff,
        lambda_h_fm=l_fm,
        p_b_f=p_f,
        p_d_f=p_f,
        p_b_m=p_b_m,
        p_d_m=p_d_m,
        p_h_mm=probs.p_h_mm,
        p_h_mf=probs.p_h_mf,
        p_h_ff=probs.p_h_ff,
        p_h_fm=probs.p_h_fm,
        mu_m=mu_m,
        mu_f=mu_f,
        lambda_t_f=params.lambda_f_o + l_mf + params.alpha * l_ff + p_d_m * beta * l_ff,
        lambda_h_m=l_mm + l_fm + params.alpha * p_f * l_ff + beta * l_ff,
        alpha=params.alpha,
        iterations=iteration,
        converged=converged,
        residual=residual,
    )
    return _with_forced_termination(solution, params)


def handover_chain(solution: TrafficSolution) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-handover transitions between the macro (0) and femto (1) layers.

    Returns:
        (Q, d): Q[i, j] probability that the next event from layer i is a
        successful move to layer j, d[i] probability that it is a drop
    """
    pdf, pdm, a = solution.p_d_f, solution.p_d_m, solution.alpha
    b = macro_first_share(a)
    # a failed macro-to-femto offload keeps the call on the macrocell
    q_mm = solution.p_h_mm * (1 - pdm) + solution.p_h_mf * pdf
    q_mf = solution.p_h_mf * (1 - pdf)
    q_fm = solution.p_h_ff * (a * pdf * (1 - pdm) + b * (1 - pdm)) + solution.p_h_fm * (1 - pdm)
    q_ff = solution.p_h_ff * (a * (1 - pdf) + b * pdm * (1 - pdf))
    d_m = solution.p_h_mm * pdm
    d_f = solution.p_h_ff * pdf * pdm + solution.p_h_fm * pdm
    return np.array([[q_mm, q_mf], [q_fm, q_ff]]), np.array([d_m, d_f])


def forced_termination(solution: TrafficSolution, params: TrafficParams) -> float:
    """
    Probability that an admitted call is dropped at some handover.

    Absorption probability of the two-layer handover chain, weighted by where
    admitted new calls start.
    """
    q, d = handover_chain(solution)
    absorb = np.linalg.solve(np.eye(2) - q, d)
    start_m = (1 - solution.p_b_m) * (params.lambda_m_o + params.lambda_f_o * solution.p_b_f)
    start_f = (1 - solution.p_b_f) * params.lambda_f_o
    total = start_m + start_f
    if total <= 0:
        return 0.0
    return float((start_m * absorb[0] + start_f * absorb[1]) / total)


def _with_forced_termination(solution: TrafficSolution, params: TrafficParams) -> TrafficSolution:
    return replace(solution, forced_termination=forced_termination(solution, params))
