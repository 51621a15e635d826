"""Estimate experiments for the regularized diffusion.

This module houses the integrated convex functional of a state, its
smoothed version, semigroup mollification, admissible test processes, and
the quantitative checks: the variational inequality against test processes,
initial-condition contraction in the dual norm, the pairwise gap between
smoothing levels, and the time-integrated regularity budget.  Every Monte
Carlo verdict uses path-batch confidence intervals; supremum-in-time
quantities are taken over the simulation grid, a lower bound for the
continuum supremum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .dirichlet import DirichletSpace
from .engine import SimulationConfig, TrajectoryEnsemble, simulate
from .monotone import ConvexPotential, MoreauYosida
from .noise import NoiseModel, certify_noise
from .reports import EstimateReport, batch_mean_ci

__all__ = [
    "EnergyFunctional",
    "MollifiedSequence",
    "TestProcess",
    "mollify_sequence",
    "build_test_process",
    "default_decay_rate",
    "check_svi",
    "contraction_experiment",
    "pairwise_smoothing_gap",
    "epsilon_convergence",
    "regularity_budget",
    "energy_uniformity",
    "regularity_uniformity",
]


@dataclass(frozen=True, eq=False)
class EnergyFunctional:
    """Integral of a convex potential against the node measure."""

    space: DirichletSpace
    potential: ConvexPotential

    def value(self, v) -> np.ndarray:
        """Integrated potential; zero at zero and nonnegative."""
        return self.potential.value(v) @ self.space.measure

    def smoothed(self, eps: float, v) -> np.ndarray:
        """Integrated envelope at smoothing ``eps``; never above ``value``."""
        return MoreauYosida(self.potential, eps).envelope(v) @ self.space.measure

    def gap_bound_pointwise(self, eps: float, v) -> np.ndarray:
        """Integrated bound ``eps * minimal_section**2`` for the smoothing gap."""
        return eps * self.potential.minimal_section(v) ** 2 @ self.space.measure

    def gap_bound_folded(self, eps: float, v) -> np.ndarray | None:
        """State-size form of the gap bound with the linear-slope constant
        folded in; ``None`` when the potential has no such constant."""
        c = self.potential.slope_bound
        if c is None:
            return None
        v = np.asarray(v, dtype=float)
        l2sq = self.space.lp_norm(v, 2) ** 2
        return 2.0 * c**2 * eps * (l2sq + self.space.total_mass)


@dataclass(frozen=True, eq=False)
class MollifiedSequence:
    """Semigroup mollification ladder of one state."""

    orders: np.ndarray       # 1..n_max
    states: np.ndarray       # (n_max, nodes), order n holds P_{1/n} v
    values: np.ndarray       # functional at each mollified state
    value_at_state: float
    dual_gaps: np.ndarray    # dual-norm distance of each mollification to v


def mollify_sequence(functional: EnergyFunctional, v,
                     n_max: int = 64) -> MollifiedSequence:
    """Mollify a state through the semigroup at times 1/n.

    The integrated potential never increases under mollification and climbs
    back to its value at the state as the order grows, while the mollified
    states converge in the dual norm.
    """
    if n_max < 1:
        raise ValueError("need at least one mollification order")
    space = functional.space
    v = np.asarray(v, dtype=float)
    orders = np.arange(1, n_max + 1)
    c = space.to_spectral(v)
    decay = np.exp(-np.outer(1.0 / orders, space.eigenvalues))
    states = space.from_spectral(decay * c)
    values = functional.value(states)
    gaps = space.dual_norm(states - v)
    return MollifiedSequence(orders, states, values,
                             float(functional.value(v)), gaps)


# -- test processes ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TestProcess:
    """Adapted process driven by the same increments as a coupled run.

    The path solves ``Z_{k+1} = Z_k + dt G_k + B(t_k, Z_k) dW_k`` with the
    increments of the reference ensemble, so comparisons against the run
    are exact in the noise.
    """

    ensemble: TrajectoryEnsemble
    initial: np.ndarray
    drift: np.ndarray | None     # (paths, steps, nodes) or None for zero
    states: np.ndarray           # (paths, steps + 1, nodes)
    mode: str


def build_test_process(ensemble: TrajectoryEnsemble, initial,
                       drift=None, noise: NoiseModel | None = None,
                       coupling_tag: str | None = None) -> TestProcess:
    """Integrate a test process on the grid of a reference run.

    ``drift`` selects the deterministic part: ``None`` for no drift, a
    node-indexed array for a constant drift density, or a second ensemble
    whose implicit drift is replayed; the latter reproduces that ensemble's
    own states up to the accumulated solver tolerance.
    """
    cfg = ensemble.config
    space = cfg.space
    noise = noise if noise is not None else cfg.noise
    if coupling_tag is not None and coupling_tag != cfg.coupling_tag:
        raise ValueError(
            f"coupling tag {coupling_tag!r} does not match the ensemble "
            f"tag {cfg.coupling_tag!r}")
    if noise.mode_count != ensemble.increments.shape[-1]:
        raise ValueError("noise mode count does not match the ensemble")
    initial = np.asarray(initial, dtype=float)
    if initial.shape != (space.node_count,):
        raise ValueError("initial state must be node-indexed")

    P, N, _ = ensemble.increments.shape
    if drift is None:
        G = None
        mode = "zero"
    elif isinstance(drift, TrajectoryEnsemble):
        other = drift.config
        if (other.coupling_tag, other.seed, other.step_count,
                other.path_count) != (cfg.coupling_tag, cfg.seed,
                                      cfg.step_count, cfg.path_count):
            raise ValueError("drift ensemble is not coupled to the reference")
        smoother = MoreauYosida(other.potential, other.eps)
        post = drift.states[:, 1:]    # drift is implicit in the next state
        w = smoother.yosida(post) + other.eps * post
        G = w @ other.space.generator.T
        mode = "from_regularized"
    else:
        g = np.asarray(drift, dtype=float)
        if g.shape != (space.node_count,):
            raise ValueError("constant drift must be node-indexed")
        G = np.broadcast_to(g, (P, N, space.node_count)).copy()
        mode = "constant"

    dt = cfg.dt
    Z = np.empty((P, N + 1, space.node_count))
    Z[:, 0] = initial
    for k in range(N):
        t = k * dt
        inc = noise.apply(t, Z[:, k], ensemble.increments[:, k])
        Z[:, k + 1] = Z[:, k] + (0.0 if G is None else dt * G[:, k]) + inc
        gap = Z[:, k + 1] - Z[:, k] - (0.0 if G is None else dt * G[:, k]) - inc
        if np.abs(gap).max() > 1e-12:
            raise AssertionError("test process recursion violated")
    return TestProcess(ensemble, initial, G, Z, mode)


# -- experiment helpers -----------------------------------------------------------


def default_decay_rate(config: SimulationConfig,
                       certificate=None) -> float:
    """Exponential weight rate: twice the certified Lipschitz constant of
    the noise plus one, the rate that absorbs the noise difference term."""
    cert = certificate or certify_noise(config.noise, config.space)
    return 2.0 * cert.lipschitz + 1.0


def _cum_trapz(f: np.ndarray, dt: float) -> np.ndarray:
    return cumulative_trapezoid(f, dx=dt, axis=1, initial=0.0)


def _coupled(a: SimulationConfig, b: SimulationConfig) -> bool:
    return (a.coupling_tag, a.seed, a.step_count, a.path_count,
            a.horizon) == (b.coupling_tag, b.seed, b.step_count,
                           b.path_count, b.horizon)


# -- the variational inequality -----------------------------------------------------


def check_svi(ensemble: TrajectoryEnsemble, test: TestProcess,
              functional: EnergyFunctional,
              constant: float | None = None) -> EstimateReport:
    """Check the variational inequality of the run against a test process.

    Both sides are evaluated at every grid time with trapezoid quadrature
    for the time integrals and the transient dual norm for distances.  The
    report carries the smallest constant that closes the inequality at all
    checkpoints; the verdict uses the supplied constant when given, that
    fitted constant otherwise, with CI slack.
    """
    if test.ensemble is not ensemble and not _coupled(test.ensemble.config,
                                                      ensemble.config):
        raise ValueError("test process is not coupled to the ensemble")
    cfg = ensemble.config
    space = cfg.space
    dt = cfg.dt
    X, Z = ensemble.states, test.states
    diff = X - Z
    dsq = space.dual_norm(diff) ** 2                    # (P, K+1)
    int_phi_x = _cum_trapz(functional.value(X), dt)
    int_phi_z = _cum_trapz(functional.value(Z), dt)
    int_dsq = _cum_trapz(dsq, dt)

    if test.drift is None:
        int_pair = np.zeros_like(dsq)
    else:
        mid = 0.5 * (diff[:, :-1] + diff[:, 1:])
        pair = space.dual_inner(test.drift, mid)        # (P, K)
        int_pair = np.concatenate(
            [np.zeros((dsq.shape[0], 1)), dt * np.cumsum(pair, axis=1)], axis=1)

    lhs = dsq + 2.0 * int_phi_x
    rhs_free = dsq[:, :1] + 2.0 * int_phi_z - 2.0 * int_pair

    mean_lhs = lhs.mean(axis=0)
    mean_rhs_free = rhs_free.mean(axis=0)
    mean_int = int_dsq.mean(axis=0)
    need = mean_lhs - mean_rhs_free
    usable = mean_int > 1e-14
    fitted = float(np.max(need[usable] / mean_int[usable], initial=0.0))
    fitted = max(fitted, 0.0)
    if np.any(~usable & (need > 1e-10 * (1.0 + np.abs(mean_lhs)))):
        fitted = np.inf

    c_use = fitted if constant is None else float(constant)
    margin_samples = rhs_free + c_use * int_dsq - lhs
    margin, ci = batch_mean_ci(margin_samples)
    adjusted = margin + ci + 1e-10 * (1.0 + np.abs(mean_lhs))
    passed = bool(np.isfinite(c_use) and np.all(adjusted >= 0.0))

    times = ensemble.times
    series = tuple(
        (float(times[k]), float(mean_lhs[k]),
         float(mean_rhs_free[k] + c_use * mean_int[k]),
         float(margin[k]), float(ci[k]))
        for k in range(times.size))
    return EstimateReport(
        name="svi_inequality",
        passed=passed,
        worst_margin=float(np.min(adjusted)),
        constants={"fitted_constant": fitted, "used_constant": c_use,
                   "eps": cfg.eps},
        columns=("time", "lhs", "rhs", "margin", "ci"),
        series=series,
        notes=(f"test process mode = {test.mode}",),
    )


# -- contraction -----------------------------------------------------------------


def contraction_experiment(config: SimulationConfig, second_initial,
                           decay_rate: float | None = None,
                           certificate=None) -> EstimateReport:
    """Compare two coupled runs started from different states.

    Estimates, at every grid time, the exponentially weighted mean squared
    dual distance relative to the squared dual distance of the initial
    states, and asserts the grid supremum stays at or below two with CI
    slack.
    """
    if decay_rate is None:
        decay_rate = default_decay_rate(config, certificate)
    second_initial = np.asarray(second_initial, dtype=float)
    ens_x = simulate(config)
    ens_y = simulate(config.with_initial(second_initial))
    space = config.space
    denom = float(space.dual_norm(config.initial - second_initial) ** 2)

    times = config.times
    if denom == 0.0:
        identical = bool(np.array_equal(ens_x.states, ens_y.states))
        return EstimateReport(
            name="contraction",
            passed=identical,
            worst_margin=0.0 if identical else -np.inf,
            constants={"decay_rate": decay_rate, "initial_gap_sq": 0.0},
            notes=("degenerate case: identical initial states",),
        )

    dsq = space.dual_norm(ens_x.states - ens_y.states) ** 2
    weighted = np.exp(-decay_rate * times) * dsq / denom   # (P, K+1)
    ratio, ci = batch_mean_ci(weighted)
    margin = 2.0 + ci - ratio
    passed = bool(np.all(margin >= -1e-10))
    series = tuple((float(times[k]), float(ratio[k]), float(ci[k]))
                   for k in range(times.size))
    return EstimateReport(
        name="contraction",
        passed=passed,
        worst_margin=float(margin.min()),
        constants={"decay_rate": decay_rate,
                   "sup_ratio": float(ratio.max()),
                   "initial_gap_sq": denom},
        columns=("time", "ratio", "ci"),
        series=series,
    )


# -- smoothing-level convergence ----------------------------------------------------


def pairwise_smoothing_gap(config: SimulationConfig, eps_a: float,
                           eps_b: float, decay_rate: float,
                           sims: dict | None = None) -> np.ndarray:
    """Per-path supremum over the grid of the weighted squared dual distance
    between two coupled runs at different smoothing levels."""
    sims = sims if sims is not None else {}
    for e in (eps_a, eps_b):
        if e not in sims:
            sims[e] = simulate(config.with_eps(e))
    space = config.space
    dsq = space.dual_norm(sims[eps_a].states - sims[eps_b].states) ** 2
    weights = np.exp(-decay_rate * config.times)
    return (weights * dsq).max(axis=1)


def epsilon_convergence(config: SimulationConfig, eps_list,
                        decay_rate: float | None = None,
                        certificate=None,
                        sims: dict | None = None) -> EstimateReport:
    """Gap decay across a descending ladder of smoothing levels.

    For consecutive pairs the expected weighted supremum gap is estimated
    on coupled noise; the report fits the log-log slope of the gap against
    the sum of the pair and passes when the gaps decrease strictly and the
    slope is at least 0.8 within the CI.  ``sims`` may carry simulations
    keyed by smoothing level for reuse across experiments.
    """
    if config.potential.slope_bound is None:
        raise ValueError(
            "the smoothing-gap comparison needs a linear minimal-section "
            "bound, which this potential kind does not have")
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 2:
        raise ValueError("need at least two smoothing levels")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("smoothing levels must be strictly decreasing")
    if decay_rate is None:
        decay_rate = default_decay_rate(config, certificate)

    sims = sims if sims is not None else {}
    pairs = list(zip(eps_list[:-1], eps_list[1:]))
    samples = [pairwise_smoothing_gap(config, a, b, decay_rate, sims)
               for a, b in pairs]
    gaps = np.array([s.mean() for s in samples])
    cis = np.array([batch_mean_ci(s)[1] for s in samples])

    x = np.log([a + b for a, b in pairs])
    y = np.log(gaps)
    slope = float(np.polyfit(x, y, 1)[0])

    # CI of the slope through path batches
    P = samples[0].shape[0]
    b = min(20, P)
    slope_ci = 0.0
    if b >= 2:
        edges = np.linspace(0, P, b + 1).astype(int)
        bs = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            means = np.array([s[lo:hi].mean() for s in samples])
            if np.all(means > 0):
                bs.append(np.polyfit(x, np.log(means), 1)[0])
        if len(bs) >= 2:
            slope_ci = 1.96 * np.std(bs, ddof=1) / np.sqrt(len(bs))

    decreasing = bool(np.all(np.diff(gaps) < 0))
    passed = decreasing and (slope + slope_ci >= 0.8)
    series = tuple(
        (f"{a:g}:{b_}", float(g), slope, float(c))
        for (a, b_), g, c in zip(pairs, gaps, cis))
    return EstimateReport(
        name="epsilon_convergence",
        passed=passed,
        worst_margin=float(slope + slope_ci - 0.8),
        constants={"slope": slope, "slope_ci": slope_ci,
                   "decay_rate": decay_rate,
                   "strictly_decreasing": decreasing},
        columns=("eps_pair", "D", "slope_fit", "ci"),
        series=series,
    )


# -- regularity budget ---------------------------------------------------------------


def regularity_budget(ensemble: TrajectoryEnsemble,
                      functional: EnergyFunctional) -> EstimateReport:
    """Time integral of the smoothed functional along the run and the
    constant it implies against one plus the squared dual norm of the
    initial state."""
    cfg = ensemble.config
    vals = functional.smoothed(cfg.eps, ensemble.states)     # (P, K+1)
    integral = np.trapezoid(vals, ensemble.times, axis=1)
    denom = float(cfg.space.dual_norm(cfg.initial) ** 2) + 1.0
    mean, ci = batch_mean_ci(integral)
    c_hat = float(mean / denom)
    return EstimateReport(
        name="regularity_budget",
        passed=bool(np.isfinite(c_hat)),
        worst_margin=c_hat,
        constants={"budget": float(mean), "budget_ci": float(ci),
                   "implied_constant": c_hat,
                   "implied_constant_ci": float(ci / denom),
                   "eps": cfg.eps},
        columns=("quantity", "value", "ci"),
        series=(("budget", float(mean), float(ci)),
                ("implied_constant", c_hat, float(ci / denom))),
    )


# -- uniformity over the smoothing ladder ----------------------------------------------


def _uniformity_report(name: str, eps_list, constants, cis,
                       band: float = 2.0) -> EstimateReport:
    constants = np.asarray(constants, dtype=float)
    top, bottom = constants.max(), constants.min()
    ratio = float(top / bottom) if bottom > 0 else np.inf
    passed = bool(np.isfinite(ratio) and ratio <= band)
    series = tuple((float(e), float(c), float(ci))
                   for e, c, ci in zip(eps_list, constants, cis))
    return EstimateReport(
        name=name,
        passed=passed,
        worst_margin=float(band - ratio),
        constants={"band_ratio": ratio, "band": band},
        columns=("eps", "implied_constant", "ci"),
        series=series,
    )


def _sims_for(config: SimulationConfig, eps_list, sims: dict | None) -> dict:
    sims = sims if sims is not None else {}
    for e in eps_list:
        if e not in sims:
            sims[e] = simulate(config.with_eps(e))
    return sims


def energy_uniformity(config: SimulationConfig, eps_list, band: float = 2.0,
                      sims: dict | None = None) -> EstimateReport:
    """Implied uniform-bound constants across a smoothing ladder must stay
    inside a fixed multiplicative band."""
    from .engine import energy_budget

    sims = _sims_for(config, eps_list, sims)
    reports = [energy_budget(sims[e]) for e in eps_list]
    return _uniformity_report(
        "energy_uniformity", eps_list,
        [r.constants["implied_constant"] for r in reports],
        [r.constants["implied_constant_ci"] for r in reports],
        band=band)


def regularity_uniformity(config: SimulationConfig, eps_list,
                          band: float = 2.0,
                          sims: dict | None = None) -> EstimateReport:
    """Implied regularity-budget constants across a smoothing ladder must
    stay inside a fixed multiplicative band."""
    functional = EnergyFunctional(config.space, config.potential)
    sims = _sims_for(config, eps_list, sims)
    reports = [regularity_budget(sims[e], functional) for e in eps_list]
    return _uniformity_report(
        "regularity_uniformity", eps_list,
        [r.constants["implied_constant"] for r in reports],
        [r.constants["implied_constant_ci"] for r in reports],
        band=band)
