"""The Stackelberg power-control game engine.

One stage runs the sequential protocol: the base station (leader) measures the
followers' average power from the previous stage and updates its satisfaction
x; every D2D pair (follower) then simultaneously best-responds to the
previous-stage interference, paying a satisfaction price that couples x with
its own transmit power; finally SINR and PDR are measured with the new powers
on the current channel.

Leader utility (strictly concave in x, second derivative -2*p_bar):

    U_BS(x) = -p_bar * x**2 + beta * x + kappa
    beta = 2 * p_bar * x_prev * ln(t),  kappa = kappa_c * ln(t)

whose maximizer over (0, 1] is the clamped recursion x_t = x_prev * ln(t).

Satisfaction price charged to every follower:

    D(x, p) = (delta / ln(q - x)) * (1 / ln(y - p / z))

Follower utilities (p in watts, g the linear SINR, g_bar the class target):

    casual        (g_bar / g) * p                      - D(x, p)
    intermediate  -s * p - c * (g_bar - g)**2          - D(x, p)
    serious       -p**w - h_i / pdr**v                 - D(x, p)

Each class must meet its target SINR, so the best-response search runs over
the feasible set [max(p_min, p_req), p_max] with p_req = g_bar * I / g_own;
if even p_max cannot reach the target the follower transmits at p_max and is
flagged as in outage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from . import link
from .channel import CellTopology, FadingState, gain_matrix, generate_topology, path_loss_amplitudes
from .config import BehaviorClass, ClassProfile, GameConfig, behavior_target_pdr, rng_streams

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


# ---------------------------------------------------------------------------
# Leader.
# ---------------------------------------------------------------------------

def leader_utility(x: float, p_bar: float, t: float, x_prev: float, kappa_c: float) -> float:
    """Quadratic satisfaction utility of the base station at stage t >= 1."""
    if p_bar <= 0.0:
        raise ValueError(f"average power must be positive, got {p_bar}")
    if t < 1.0:
        raise ValueError(f"stage index must be >= 1, got {t}")
    log_t = math.log(t)
    beta = 2.0 * p_bar * x_prev * log_t
    kappa = kappa_c * log_t
    return -p_bar * x * x + beta * x + kappa


def leader_best_satisfaction(x_prev: float, p_bar: float, t: float,
                             x_floor: float = 0.001) -> float:
    """Maximizer of the leader utility over [x_floor, 1].

    The unconstrained optimum beta / (2 * p_bar) reduces to x_prev * ln(t);
    the floor prevents collapse at t = 2 where ln(2) < 1.
    """
    if p_bar <= 0.0:
        raise ValueError(f"average power must be positive, got {p_bar}")
    if t < 1.0:
        raise ValueError(f"stage index must be >= 1, got {t}")
    return min(1.0, max(x_floor, x_prev * math.log(t)))


# ---------------------------------------------------------------------------
# Satisfaction price and its derivatives.
# ---------------------------------------------------------------------------

def _price_logs(x: float, p: float, cfg: GameConfig) -> tuple[float, float, float]:
    if not 0.0 < x <= 1.0:
        raise ValueError(f"satisfaction must lie in (0, 1], got {x}")
    qx = cfg.q - x
    yz = cfg.y - p / cfg.z
    if qx <= 1.0:
        raise ValueError(f"price undefined: q - x = {qx} must exceed 1")
    if yz <= 1.0:
        raise ValueError(f"price undefined: y - p/z = {yz} must exceed 1")
    return math.log(qx), yz, math.log(yz)


def satisfaction_price(x: float, p: float, cfg: GameConfig) -> float:
    """Price D(x, p) > 0 charged by the BS; increasing in both arguments."""
    log_qx, _, log_yz = _price_logs(x, p, cfg)
    return cfg.delta / (log_qx * log_yz)


def price_gradient_x(x: float, p: float, cfg: GameConfig) -> float:
    """dD/dx, positive on the admissible domain."""
    log_qx, _, log_yz = _price_logs(x, p, cfg)
    return cfg.delta / ((cfg.q - x) * log_qx * log_qx * log_yz)


def price_gradient_power(x: float, p: float, cfg: GameConfig) -> float:
    """dD/dp, positive on the admissible domain."""
    log_qx, yz, log_yz = _price_logs(x, p, cfg)
    return cfg.delta / (cfg.z * yz * log_qx * log_yz * log_yz)


def price_curvature_x(x: float, p: float, cfg: GameConfig) -> float:
    """d2D/dx2, positive, so the -D term in every utility is concave in x."""
    log_qx, _, log_yz = _price_logs(x, p, cfg)
    qx = cfg.q - x
    return (cfg.delta / (qx * qx * log_qx * log_qx * log_yz)) * (2.0 / log_qx + 1.0)


def price_curvature_power(x: float, p: float, cfg: GameConfig) -> float:
    """d2D/dp2, positive, so the -D term in every utility is concave in p."""
    log_qx, yz, log_yz = _price_logs(x, p, cfg)
    return (cfg.delta / (cfg.z * cfg.z * yz * yz * log_qx * log_yz * log_yz)) * (
        2.0 / log_yz + 1.0
    )


# ---------------------------------------------------------------------------
# Follower utilities.
# ---------------------------------------------------------------------------

@lru_cache(maxsize=16)
def _cached_target_sinr(behavior: BehaviorClass, priority_mode: bool, modulation: str) -> float:
    return link.target_sinr(behavior_target_pdr(behavior, priority_mode),
                            link.MODULATIONS[modulation])


def class_target_sinr(behavior: BehaviorClass, cfg: GameConfig) -> float:
    """Linear target SINR implied by the class's minimum target PDR."""
    return _cached_target_sinr(behavior, cfg.priority_mode, cfg.modulation)


def performance_value(behavior: BehaviorClass, p: float, own_gain: float,
                      interference: float, target: float, cfg: GameConfig) -> float:
    """Class-specific performance term, before the satisfaction price."""
    gamma = p * own_gain / interference
    if behavior is BehaviorClass.CASUAL:
        return (target / gamma) * p
    if behavior is BehaviorClass.INTERMEDIATE:
        err = target - gamma
        return -cfg.s * p - cfg.c * err * err
    mod = cfg.modulation_params
    # h_i / pdr**v evaluated in log space; deep fades push pdr below the
    # smallest normal float and the penalty toward infinity.
    exponent = -cfg.v * mod.a * gamma ** mod.b
    if exponent > 700.0:
        return -math.inf
    return -(p ** cfg.w) - cfg.h_i * math.exp(exponent)


def performance_gradient(behavior: BehaviorClass, p: float, own_gain: float,
                         interference: float, target: float, cfg: GameConfig) -> float:
    """d(performance)/dp; uses d(gamma)/dp = gamma / p."""
    gamma = p * own_gain / interference
    if behavior is BehaviorClass.CASUAL:
        return 0.0
    if behavior is BehaviorClass.INTERMEDIATE:
        return -cfg.s + 2.0 * cfg.c * gamma * (target - gamma) / p
    mod = cfg.modulation_params
    gamma_b = gamma ** mod.b
    exponent = -cfg.v * mod.a * gamma_b
    if exponent > 700.0:
        return math.inf
    return (-cfg.w * p ** (cfg.w - 1.0)
            + cfg.h_i * cfg.v * mod.a * mod.b * gamma_b * math.exp(exponent) / p)


def follower_utility(behavior: BehaviorClass, x: float, p: float, own_gain: float,
                     interference: float, cfg: GameConfig) -> float:
    """Utility of one follower with the interference treated as fixed."""
    if interference <= 0.0:
        raise ValueError(f"interference plus noise must be positive, got {interference}")
    target = class_target_sinr(behavior, cfg)
    return (performance_value(behavior, p, own_gain, interference, target, cfg)
            - satisfaction_price(x, p, cfg))


def follower_utility_gradient(behavior: BehaviorClass, x: float, p: float, own_gain: float,
                              interference: float, cfg: GameConfig) -> float:
    """dU/dp for one follower; the price contributes -dD/dp for every class."""
    if interference <= 0.0:
        raise ValueError(f"interference plus noise must be positive, got {interference}")
    target = class_target_sinr(behavior, cfg)
    return (performance_gradient(behavior, p, own_gain, interference, target, cfg)
            - price_gradient_power(x, p, cfg))


# ---------------------------------------------------------------------------
# Concave scalar maximization on the feasible power set.
# ---------------------------------------------------------------------------

def _golden_section_max(fn: Callable[[float], float], lo: float, hi: float,
                        tol: float) -> float:
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def maximize_concave(utility: Callable[[float], float], gradient: Callable[[float], float],
                     lo: float, hi: float, tol: float) -> float:
    """Argmax of a concave utility on [lo, hi] via derivative-sign bisection.

    Boundary optima are returned exactly; if the gradient signs are not
    consistent with concavity the raw utility is searched by golden section
    and compared against both endpoints, ties resolved toward lower power.
    """
    if hi - lo <= tol:
        return lo
    g_lo = gradient(lo)
    g_hi = gradient(hi)
    if g_lo <= 0.0 and g_hi <= 0.0:
        return lo
    if g_lo >= 0.0 and g_hi >= 0.0:
        return hi
    if g_lo > 0.0 > g_hi:
        a, b = lo, hi
        while b - a > tol:
            mid = 0.5 * (a + b)
            g_mid = gradient(mid)
            if g_mid > 0.0:
                a = mid
            elif g_mid < 0.0:
                b = mid
            else:
                return mid
        return 0.5 * (a + b)
    interior = _golden_section_max(utility, lo, hi, tol)
    best_p, best_u = lo, utility(lo)
    for candidate in (interior, hi):
        value = utility(candidate)
        if value > best_u:
            best_p, best_u = candidate, value
    return best_p


def required_power(target: float, own_gain: float, interference: float) -> float:
    """Power that meets the class target SINR against the given interference."""
    return target * interference / own_gain


def follower_best_response(behavior: BehaviorClass, x: float, own_gain: float,
                           interference: float, cfg: GameConfig) -> tuple[float, bool]:
    """Utility-maximizing power on the feasible set, plus an outage flag.

    The feasible set is [max(p_min, p_req), p_max]; when p_req exceeds p_max
    the follower transmits at p_max and is flagged as in outage.
    """
    if own_gain <= 0.0:
        raise ValueError(f"own-link gain must be positive, got {own_gain}")
    if interference <= 0.0:
        raise ValueError(f"interference plus noise must be positive, got {interference}")
    target = class_target_sinr(behavior, cfg)
    return _best_response_with_target(behavior, target, x, own_gain, interference, cfg)


# ---------------------------------------------------------------------------
# Stage protocol and trajectories.
# ---------------------------------------------------------------------------

@dataclass(slots=True)
class LeaderState:
    """Base-station satisfaction together with its last measured average power."""

    x: float
    kappa_c: float
    t: int = 0
    p_bar: float = 0.0


@dataclass(slots=True)
class FollowerAgent:
    """Per-pair persistent game state: class, QoS targets and current power."""

    index: int
    behavior: BehaviorClass
    target_pdr: float
    target_sinr: float
    power: float


@dataclass(frozen=True, slots=True)
class FollowerState:
    """Measured outcome of one follower at one stage."""

    index: int
    behavior: BehaviorClass
    power: float
    sinr: float
    pdr: float
    utility: float
    price: float
    outage: bool


@dataclass(frozen=True)
class StageRecord:
    """Leader satisfaction plus all follower outcomes for one stage."""

    t: int
    x: float | None
    followers: tuple[FollowerState, ...]
    class_power_dbm: dict[BehaviorClass, float]
    class_pdr: dict[BehaviorClass, float]

    @property
    def outages(self) -> tuple[bool, ...]:
        return tuple(f.outage for f in self.followers)

    @property
    def powers(self) -> np.ndarray:
        return np.array([f.power for f in self.followers])


@dataclass(frozen=True)
class Trajectory:
    """All stage records of one repetition plus the channel context behind them."""

    records: tuple[StageRecord, ...]
    topology: CellTopology
    final_gains: np.ndarray
    profiles: tuple[ClassProfile, ...]
    config: GameConfig

    @property
    def convergence_stage(self) -> int | None:
        for record in self.records:
            if record.x == 1.0:
                return record.t
        return None


def class_means(followers: tuple[FollowerState, ...]) -> tuple[dict, dict]:
    """Per-class mean transmit power (dBm, averaged in watts) and mean PDR."""
    power_dbm: dict[BehaviorClass, float] = {}
    mean_pdr: dict[BehaviorClass, float] = {}
    for behavior in BehaviorClass:
        members = [f for f in followers if f.behavior is behavior]
        if not members:
            continue
        watts = sum(f.power for f in members) / len(members)
        power_dbm[behavior] = 10.0 * math.log10(watts * 1e3)
        mean_pdr[behavior] = sum(f.pdr for f in members) / len(members)
    return power_dbm, mean_pdr


def measure_followers(agents: list[FollowerAgent], x: float | None, gains: np.ndarray,
                      outages: list[bool], cfg: GameConfig) -> tuple[FollowerState, ...]:
    """Evaluate SINR, PDR, utility and price at the powers just selected."""
    powers = np.array([agent.power for agent in agents])
    interference = link.interference_all(powers, gains, cfg.noise_power)
    sinrs = powers * np.diagonal(gains) / interference
    mod = cfg.modulation_params
    states = []
    for i, agent in enumerate(agents):
        gamma = float(sinrs[i])
        pdr = link.pdr_from_sinr(gamma, mod)
        if x is None:
            price = 0.0
            utility = performance_value(agent.behavior, agent.power, float(gains[i, i]),
                                        float(interference[i]), agent.target_sinr, cfg)
        else:
            price = satisfaction_price(x, agent.power, cfg)
            utility = performance_value(agent.behavior, agent.power, float(gains[i, i]),
                                        float(interference[i]), agent.target_sinr, cfg) - price
        states.append(FollowerState(agent.index, agent.behavior, agent.power, gamma,
                                    pdr, utility, price, outages[i]))
    return tuple(states)


def run_stage(leader: LeaderState, agents: list[FollowerAgent], gains: np.ndarray,
              cfg: GameConfig) -> StageRecord:
    """Advance the game by one stage and return its record.

    Sequence: the leader measures the previous-stage average power and updates
    its satisfaction (held at x_init for the opening stage); each follower
    best-responds to the previous-stage interference using the new
    satisfaction in its price; performance is then measured with the new
    powers on the current gains.
    """
    t = leader.t + 1
    prev_powers = np.array([agent.power for agent in agents])
    p_bar = float(prev_powers.mean())
    if t == 1:
        x = cfg.x_init
    else:
        x = leader_best_satisfaction(leader.x, p_bar, float(t), cfg.x_floor)
    interference = link.interference_all(prev_powers, gains, cfg.noise_power)

    outages = []
    for i, agent in enumerate(agents):
        power, outage = _best_response_with_target(
            agent.behavior, agent.target_sinr, x, float(gains[i, i]),
            float(interference[i]), cfg)
        agent.power = power
        outages.append(outage)

    leader.t = t
    leader.x = x
    leader.p_bar = p_bar
    followers = measure_followers(agents, x, gains, outages, cfg)
    power_dbm, mean_pdr = class_means(followers)
    return StageRecord(t, x, followers, power_dbm, mean_pdr)


def _best_response_with_target(behavior: BehaviorClass, target: float, x: float,
                               own_gain: float, interference: float,
                               cfg: GameConfig) -> tuple[float, bool]:
    p_req = required_power(target, own_gain, interference)
    if p_req > cfg.p_max:
        return cfg.p_max, True
    lo = max(cfg.p_min, p_req)
    power = maximize_concave(
        lambda p: (performance_value(behavior, p, own_gain, interference, target, cfg)
                   - satisfaction_price(x, p, cfg)),
        lambda p: (performance_gradient(behavior, p, own_gain, interference, target, cfg)
                   - price_gradient_power(x, p, cfg)),
        lo, cfg.p_max, cfg.br_tolerance,
    )
    return power, False


def build_agents(profiles: tuple[ClassProfile, ...], initial_powers: np.ndarray,
                 cfg: GameConfig) -> list[FollowerAgent]:
    mod = cfg.modulation_params
    return [
        FollowerAgent(i, profile.behavior, profile.target_pdr,
                      link.target_sinr(profile.target_pdr, mod), float(initial_powers[i]))
        for i, profile in enumerate(profiles)
    ]


def run_game(cfg: GameConfig, repetition: int = 0,
             profiles: list[ClassProfile] | None = None) -> Trajectory:
    """Simulate one full repetition of the Stackelberg game.

    Topology, fading and the uniform-random initial powers are drawn from
    independent substreams of (seed, repetition), so a paired baseline run
    with the same seed sees the identical channel.
    """
    rngs = rng_streams(cfg.seed, repetition)
    topology = generate_topology(cfg, rngs.topology, profiles)
    m = topology.num_pairs
    fading = FadingState((m, m), cfg.jakes_oscillators, cfg.doppler, rngs.fading)
    initial = rngs.powers.uniform(cfg.p_min, cfg.p_max, size=m)
    agents = build_agents(topology.profiles, initial, cfg)
    leader = LeaderState(x=cfg.x_init, kappa_c=cfg.kappa_c)
    pl_amp = path_loss_amplitudes(topology, cfg)

    records = []
    gains = np.empty((m, m))
    for _ in range(cfg.stages):
        gains = gain_matrix(topology, fading.advance(), cfg, pl_amp)
        records.append(run_stage(leader, agents, gains, cfg))
    return Trajectory(tuple(records), topology, gains, topology.profiles, cfg)
