"""Convex scalar potentials and their Moreau-Yosida smoothing.

A potential is a nonnegative convex function on the line with value zero at
the origin.  Its subdifferential is an interval-valued monotone graph; the
resolvent of the graph, the single-valued Lipschitz slope and the smoothed
envelope are available in closed form for the built-in kinds and through a
safeguarded scalar Newton solve otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "ConvexPotential",
    "MoreauYosida",
    "CrossMonotonicityDefect",
    "AssumptionCheck",
    "AssumptionReport",
    "fast_diffusion",
    "porous_medium",
    "zhang",
    "piecewise_quadratic",
    "cross_monotonicity_defect",
    "check_assumptions",
]

_KINDS = ("fast_diffusion", "porous_medium", "zhang", "piecewise")


@dataclass(frozen=True)
class ConvexPotential:
    """Scalar potential with an interval-valued subdifferential.

    ``kind`` selects the formulas: ``fast_diffusion`` has sublinear slope
    ``|r|**theta`` (exponent in (0, 1)), ``porous_medium`` the superlinear
    slope ``|r|**gamma`` (exponent above 1), ``zhang`` the sandpile
    potential whose slope jumps at the origin, and ``piecewise`` a
    continuous piecewise-quadratic function given by knots and per-piece
    coefficients.

    ``slope_bound`` certifies that the minimal subgradient magnitude is at
    most ``slope_bound * (|r| + 1)``; it is ``None`` when no linear bound
    exists, as for the porous-medium kind.
    """

    kind: str
    exponent: float = 0.0
    knots: tuple = ()
    pieces: tuple = ()
    slope_bound: float | None = None
    superlinear: bool = True

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")

    # -- evaluation -------------------------------------------------------

    def _piece_index(self, r: np.ndarray, side: str = "right") -> np.ndarray:
        return np.searchsorted(np.asarray(self.knots), r, side=side)

    def value(self, r):
        """Potential value, vectorized."""
        r = np.asarray(r, dtype=float)
        if self.kind == "fast_diffusion" or self.kind == "porous_medium":
            p = self.exponent
            return np.abs(r) ** (p + 1.0) / (p + 1.0)
        if self.kind == "zhang":
            return np.where(r > 0, 0.5 * r**2 + r, 0.0)
        coeff = np.asarray(self.pieces)[self._piece_index(r)]
        return coeff[..., 0] * r**2 + coeff[..., 1] * r + coeff[..., 2]

    def subdiff(self, r):
        """Subdifferential interval as a pair of arrays (lower, upper)."""
        r = np.asarray(r, dtype=float)
        if self.kind == "fast_diffusion" or self.kind == "porous_medium":
            s = np.sign(r) * np.abs(r) ** self.exponent
            return s, s.copy()
        if self.kind == "zhang":
            lo = np.where(r > 0, r + 1.0, 0.0)
            hi = np.where(r > 0, r + 1.0, np.where(r == 0, 1.0, 0.0))
            return lo, hi
        pieces = np.asarray(self.pieces)
        left = pieces[self._piece_index(r, side="left")]
        right = pieces[self._piece_index(r, side="right")]
        lo = 2.0 * left[..., 0] * r + left[..., 1]
        hi = 2.0 * right[..., 0] * r + right[..., 1]
        return lo, hi

    def minimal_section(self, r):
        """Smallest magnitude over the subdifferential interval."""
        lo, hi = self.subdiff(r)
        inside = (lo <= 0.0) & (0.0 <= hi)
        return np.where(inside, 0.0, np.minimum(np.abs(lo), np.abs(hi)))

    @property
    def breakpoints(self) -> np.ndarray:
        """Points excluded from smoothness-based checks."""
        if self.kind == "piecewise":
            return np.asarray(self.knots, dtype=float)
        return np.array([0.0])

    @cached_property
    def _knot_slopes(self):
        # Left and right slopes at each knot of a piecewise potential.
        knots = np.asarray(self.knots, dtype=float)
        pieces = np.asarray(self.pieces, dtype=float)
        left = 2.0 * pieces[:-1, 0] * knots + pieces[:-1, 1]
        right = 2.0 * pieces[1:, 0] * knots + pieces[1:, 1]
        return knots, left, right


def fast_diffusion(theta: float) -> ConvexPotential:
    """Potential with slope ``|r|**theta`` for an exponent in (0, 1)."""
    if not 0.0 < theta < 1.0:
        raise ValueError(f"exponent must lie in (0, 1), got {theta}")
    return ConvexPotential("fast_diffusion", exponent=theta, slope_bound=1.0)


def porous_medium(gamma: float) -> ConvexPotential:
    """Potential with slope ``|r|**gamma`` for an exponent above 1.

    The slope grows faster than linearly, so no linear minimal-section
    bound exists; estimate experiments that need one refuse this kind.
    """
    if gamma <= 1.0:
        raise ValueError(f"exponent must exceed 1, got {gamma}")
    return ConvexPotential("porous_medium", exponent=gamma, slope_bound=None)


def zhang() -> ConvexPotential:
    """Sandpile potential: quadratic with unit offset on the right half
    line, flat on the left, multi-valued slope [0, 1] at the origin."""
    return ConvexPotential("zhang", slope_bound=1.0)


def piecewise_quadratic(knots, pieces, superlinear: bool = True) -> ConvexPotential:
    """Continuous piecewise-quadratic potential.

    ``knots`` are the ascending junction points; ``pieces`` has one
    ``(a, b, c)`` row per interval (one more row than knots) with value
    ``a r^2 + b r + c``.  Continuity at the knots is required; convexity is
    not enforced so that assumption checking can report genuine failures.
    """
    knots = np.asarray(knots, dtype=float)
    pieces = np.asarray(pieces, dtype=float)
    if knots.ndim != 1 or np.any(np.diff(knots) <= 0):
        raise ValueError("knots must be strictly ascending")
    if pieces.shape != (knots.size + 1, 3):
        raise ValueError("need one (a, b, c) row per interval")
    left = pieces[:-1]
    right = pieces[1:]
    gap = np.abs((left[:, 0] - right[:, 0]) * knots**2
                 + (left[:, 1] - right[:, 1]) * knots
                 + (left[:, 2] - right[:, 2]))
    scale = max(float(np.abs(pieces).max()), 1.0)
    if gap.max(initial=0.0) > 1e-9 * scale:
        raise ValueError("pieces must agree at the knots")
    bound = float((2.0 * np.abs(pieces[:, 0]) + np.abs(pieces[:, 1])).max())
    return ConvexPotential(
        "piecewise",
        knots=tuple(knots.tolist()),
        pieces=tuple(map(tuple, pieces.tolist())),
        slope_bound=bound,
        superlinear=superlinear,
    )


# -- resolvent machinery -------------------------------------------------


def _power_resolvent(p: float, eps: float, r: np.ndarray) -> np.ndarray:
    """Solve s + eps * sign(s) |s|**p = r, vectorized and odd in r."""
    a = np.abs(r)
    if p == 1.0:
        s = a / (1.0 + eps)
    elif p == 0.5:
        x = 0.5 * (-eps + np.sqrt(eps**2 + 4.0 * a))
        s = x * x
    elif p == 2.0:
        s = np.where(a > 0, 2.0 * a / (1.0 + np.sqrt(1.0 + 4.0 * eps * a)), 0.0)
    elif p < 1.0:
        s = _power_newton_sublinear(p, eps, a)
    else:
        s = _power_newton(p, eps, a)
    return np.sign(r) * s


def _power_newton(p: float, eps: float, a: np.ndarray) -> np.ndarray:
    # Monotone scalar solve of s + eps s^p = a on [0, a] for p > 1; the
    # root stays comparable to min(a, (a/eps)^(1/p)), so plain Newton with
    # bracket safeguarding resolves it.
    s = a.copy()
    lo = np.zeros_like(a)
    hi = a.copy()
    tol = 1e-13 * (1.0 + a)
    for _ in range(80):
        with np.errstate(divide="ignore", invalid="ignore"):
            g = s + eps * s**p - a
            dg = 1.0 + eps * p * np.where(s > 0, s ** (p - 1.0), np.inf)
        if np.all(np.abs(g) <= tol):
            break
        lo = np.where(g < 0, s, lo)
        hi = np.where(g > 0, s, hi)
        step = np.where(np.isfinite(dg), g / np.where(dg > 0, dg, 1.0), 0.0)
        cand = s - step
        outside = (cand <= lo) | (cand >= hi)
        s = np.where(outside, 0.5 * (lo + hi), cand)
    return s


def _power_newton_sublinear(p: float, eps: float, a: np.ndarray) -> np.ndarray:
    # For p < 1 the root can be exponentially small in 1/p (for tiny a it
    # sits near (a/eps)^(1/p)), which defeats bisection in s.  Substituting
    # y = s^p gives y^(1/p) + eps y = a, whose root is comparable to
    # min(a/eps, a^p); Newton in y is monotone and well conditioned since
    # the derivative is bounded below by eps.
    q = 1.0 / p
    with np.errstate(invalid="ignore"):
        hi = np.minimum(a / eps, a**p)
    y = hi.copy()
    lo = np.zeros_like(a)
    tol = 1e-13 * (1.0 + a)
    for _ in range(80):
        with np.errstate(invalid="ignore"):
            g = y**q + eps * y - a
            dg = q * y ** (q - 1.0) + eps
        if np.all(np.abs(g) <= tol):
            break
        lo = np.where(g < 0, y, lo)
        hi = np.where(g > 0, y, hi)
        cand = y - g / dg
        outside = (cand <= lo) | (cand >= hi)
        y = np.where(outside, 0.5 * (lo + hi), cand)
    return y**q


def _zhang_resolvent(eps: float, r: np.ndarray) -> np.ndarray:
    return np.where(r <= 0, r, np.where(r <= eps, 0.0, (r - eps) / (1.0 + eps)))


class ResolventError(RuntimeError):
    """Scalar monotone solve failed; carries the worst residual."""


@dataclass(frozen=True)
class MoreauYosida:
    """Resolvent, Lipschitz slope and smoothed envelope of a potential at a
    fixed smoothing parameter ``eps > 0``."""

    potential: ConvexPotential
    eps: float

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError(f"smoothing parameter must be positive, got {self.eps}")

    def resolvent(self, r):
        """Unique solution s of 0 in s - r + eps * subdiff(s).

        Equals the minimizer of ``|r - s|^2 / (2 eps) + value(s)``.
        """
        r = np.asarray(r, dtype=float)
        pot, eps = self.potential, self.eps
        if pot.kind in ("fast_diffusion", "porous_medium"):
            s = _power_resolvent(pot.exponent, eps, r)
        elif pot.kind == "zhang":
            s = _zhang_resolvent(eps, r)
        else:
            s = self._piecewise_resolvent(r)
        self._check_residual(r, s)
        return s

    def _check_residual(self, r, s):
        # Distance of r - s from eps * subdiff(s), relative to 1 + |r|.
        lo, hi = self.potential.subdiff(s)
        gap = np.maximum(self.eps * lo - (r - s), (r - s) - self.eps * hi)
        bad = gap > 1e-12 * (1.0 + np.abs(r))
        if np.any(bad):
            raise ResolventError(
                f"resolvent residual {float(np.max(gap)):g} exceeds tolerance")

    @cached_property
    def _piecewise_bands(self):
        pot = self.potential
        if np.asarray(pot.pieces)[:, 0].min() < 0:
            raise ResolventError(
                "resolvent needs a convex potential: concave piece present")
        knots, left, right = pot._knot_slopes
        lows = knots + self.eps * left
        highs = knots + self.eps * right
        interleaved = np.column_stack([lows, highs]).ravel()
        if np.any(np.diff(interleaved) < 0):
            raise ResolventError(
                "resolvent needs a convex potential: the knot map is not monotone")
        return interleaved

    def _piecewise_resolvent(self, r: np.ndarray) -> np.ndarray:
        pot, eps = self.potential, self.eps
        idx = np.searchsorted(self._piecewise_bands, r, side="right")
        on_knot = idx % 2 == 1
        piece = np.asarray(pot.pieces)[idx // 2]
        s = (r - eps * piece[..., 1]) / (1.0 + 2.0 * eps * piece[..., 0])
        return np.where(on_knot, np.asarray(pot.knots)[
            np.minimum(idx // 2, len(pot.knots) - 1)], s)

    def yosida(self, r):
        """Single-valued Lipschitz slope ``(r - resolvent(r)) / eps``; its
        value lies in the subdifferential at the resolvent point."""
        r = np.asarray(r, dtype=float)
        return (r - self.resolvent(r)) / self.eps

    def envelope(self, r):
        """Smoothed potential: quadratic transport cost to the resolvent
        point plus the potential there.  Bounded between the potential at
        the resolvent point and the potential itself."""
        r = np.asarray(r, dtype=float)
        s = self.resolvent(r)
        return (r - s) ** 2 / (2.0 * self.eps) + self.potential.value(s)

    def yosida_slope(self, r):
        """Almost-everywhere derivative of the Lipschitz slope, used by the
        implicit time stepper; bounded by ``1/eps``."""
        r = np.asarray(r, dtype=float)
        pot, eps = self.potential, self.eps
        if pot.kind in ("fast_diffusion", "porous_medium"):
            p = pot.exponent
            s = np.abs(self.resolvent(r))
            with np.errstate(divide="ignore", over="ignore"):
                t = p * np.where(s > 0, s ** (p - 1.0), np.inf)
            return np.where(np.isfinite(t), t / (1.0 + eps * t),
                            (1.0 / eps) if p < 1.0 else 0.0)
        if pot.kind == "zhang":
            return np.where(r <= 0, 0.0,
                            np.where(r <= eps, 1.0 / eps, 1.0 / (1.0 + eps)))
        idx = np.searchsorted(self._piecewise_bands, r, side="right")
        on_knot = idx % 2 == 1
        t = 2.0 * np.asarray(pot.pieces)[idx // 2][..., 0]
        return np.where(on_knot, 1.0 / eps, t / (1.0 + eps * t))


# -- paired-smoothing comparison -------------------------------------------


@dataclass(frozen=True)
class CrossMonotonicityDefect:
    """Slack of the two lower bounds for the product
    ``(slope_1(r) - slope_2(r')) (r - r')`` across two smoothing levels."""

    product: float
    slope_bound: float
    growth_bound: float | None
    slack_slope: float
    slack_growth: float | None
    scale: float


def cross_monotonicity_defect(potential: ConvexPotential,
                              eps_one: float, eps_two: float,
                              r: float, r_prime: float) -> CrossMonotonicityDefect:
    """Evaluate both lower bounds for mixed-smoothing monotonicity.

    The first bound uses the squared smoothed slopes; the second, available
    whenever the potential carries a linear minimal-section bound, replaces
    them with the squared states plus one, with the constant folded from
    that bound.
    """
    a = MoreauYosida(potential, eps_one)
    b = MoreauYosida(potential, eps_two)
    ya = float(a.yosida(r))
    yb = float(b.yosida(r_prime))
    product = (ya - yb) * (r - r_prime)
    bound = -0.5 * (eps_one + eps_two) * (ya**2 + yb**2)
    scale = 1.0 + abs(product) + abs(bound)
    if potential.slope_bound is None:
        growth = None
        slack_growth = None
    else:
        c = 2.0 * potential.slope_bound**2
        growth = -c * (eps_one + eps_two) * (r**2 + r_prime**2 + 1.0)
        slack_growth = product - growth
    return CrossMonotonicityDefect(
        product=product,
        slope_bound=bound,
        growth_bound=growth,
        slack_slope=product - bound,
        slack_growth=slack_growth,
        scale=scale,
    )


# -- assumption checking ------------------------------------------------------


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    passed: bool
    margin: float
    detail: str = ""


@dataclass(frozen=True)
class AssumptionReport:
    potential_kind: str
    entries: tuple

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def to_text(self) -> str:
        lines = [f"assumption report for potential kind = {self.potential_kind}"]
        for e in self.entries:
            status = "pass" if e.passed else "FAIL"
            lines.append(f"  [{status}] {e.name}: worst margin = {e.margin:.6g}"
                         + (f" ({e.detail})" if e.detail else ""))
        return "\n".join(lines) + "\n"


def check_assumptions(potential: ConvexPotential, grid) -> AssumptionReport:
    """Report the structural requirements of a potential on a sample grid.

    Checks nonnegativity with value zero at the origin, midpoint convexity,
    monotone growth of ``value(r)/|r|`` on a coarse geometric ladder, the
    linear minimal-section bound, and monotonicity of the subdifferential
    graph.  Margins are worst cases; nothing is raised, failures are
    reported.
    """
    grid = np.sort(np.asarray(grid, dtype=float))
    vals = potential.value(grid)
    entries = []

    zero_val = float(potential.value(0.0))
    entries.append(AssumptionCheck(
        "nonnegative_with_zero_at_origin",
        vals.min() >= -1e-12 and abs(zero_val) <= 1e-12,
        float(min(vals.min(), -abs(zero_val))),
    ))

    rng = np.random.default_rng(0xA55)
    x = rng.choice(grid, size=400)
    y = rng.choice(grid, size=400)
    lam = rng.uniform(0.0, 1.0, size=400)
    mix = lam * potential.value(x) + (1 - lam) * potential.value(y)
    mid = potential.value(lam * x + (1 - lam) * y)
    scale = 1.0 + np.abs(mix)
    convex_margin = float(((mix - mid) / scale).min())
    entries.append(AssumptionCheck(
        "convexity", convex_margin >= -1e-12, convex_margin))

    # Growth of value(r)/|r| on a geometric ladder.  The ratios must never
    # decrease, and a declared-superlinear potential must grow on at least
    # one side (one-sided potentials are flat on the other).
    ladder = np.array([1e2, 1e3, 1e4])
    ratios_pos = potential.value(ladder) / ladder
    ratios_neg = potential.value(-ladder) / ladder
    monotone = float(min(np.diff(ratios_pos).min(), np.diff(ratios_neg).min()))
    grows = max(ratios_pos[-1] - ratios_pos[0], ratios_neg[-1] - ratios_neg[0])
    ok = monotone >= -1e-12 and (grows > 0 or not potential.superlinear)
    entries.append(AssumptionCheck(
        "superlinear_growth_on_ladder", ok,
        monotone if monotone < 0 else float(grows),
        detail="declared property, grid evidence only",
    ))

    ms = potential.minimal_section(grid)
    if potential.slope_bound is None:
        worst = float((ms / (np.abs(grid) + 1.0)).max())
        entries.append(AssumptionCheck(
            "linear_minimal_section_bound", False, -worst,
            detail="no linear bound exists for this kind",
        ))
    else:
        slack = potential.slope_bound * (np.abs(grid) + 1.0) - ms
        entries.append(AssumptionCheck(
            "linear_minimal_section_bound",
            bool(slack.min() >= -1e-12),
            float(slack.min()),
            detail=f"certified constant {potential.slope_bound:g}",
        ))

    lo, hi = potential.subdiff(grid)
    step = hi[:-1] - lo[1:]  # upper value must not exceed next lower value
    mono_margin = float((-step).min(initial=0.0))
    entries.append(AssumptionCheck(
        "monotone_subdifferential", mono_margin >= -1e-12, mono_margin))

    return AssumptionReport(potential.kind, tuple(entries))
