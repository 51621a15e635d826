"""Line-oriented experiment configuration and the experiment dispatcher.

Configs are plain text, one ``section.key = value`` pair per line with ``#``
comments.  Parsing validates everything and reports every violation at
once, syntax errors with their line number and semantic ones with the field
path.  Artifacts (reports, trajectory CSVs, manifest) are written with
fixed float formatting and no wall-clock data, so identical configs produce
byte-identical outputs.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dirichlet import (
    BernsteinFunction,
    DirichletSpace,
    build_graph_space,
    complete_space,
    gamma_transform_quadrature,
    path_space,
    single_node_space,
    subordinate,
)
from .engine import (
    SimulationConfig,
    energy_budget,
    simulate,
    write_metadata,
    write_trajectories,
)
from .estimates import (
    EnergyFunctional,
    build_test_process,
    check_svi,
    contraction_experiment,
    epsilon_convergence,
    energy_uniformity,
    regularity_budget,
    regularity_uniformity,
)
from .monotone import (
    check_assumptions,
    fast_diffusion,
    piecewise_quadratic,
    porous_medium,
    zhang,
)
from .noise import certify_noise, diagonal_noise, eigenmode_noise
from .reports import CheckResult, EstimateReport, bundle_report, format_value

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "preset_space",
    "preset_names",
    "run_experiment",
]

EXPERIMENTS = ("svi", "contraction", "eps_convergence", "energy",
               "regularity", "assumptions", "norms")
_SIM_EXPERIMENTS = ("svi", "contraction", "eps_convergence", "energy",
                    "regularity")

_KNOWN_KEYS = {
    "experiment": {"kind"},
    "space": {"preset", "nodes", "edges", "killing", "measure", "bernstein"},
    "potential": {"kind", "theta", "gamma", "knots", "pieces"},
    "noise": {"kind", "sigma", "clip", "modes", "amplitude"},
    "run": {"epsilon", "epsilon_list", "horizon", "steps", "paths", "seed",
            "tag", "x0", "y0", "drift_const", "decay_rate"},
}

_DEFAULTS = {
    ("experiment", "kind"): "norms",
    ("potential", "kind"): "fast_diffusion",
    ("potential", "theta"): "0.5",
    ("potential", "gamma"): "2",
    ("noise", "kind"): "diagonal",
    ("noise", "sigma"): "0.2",
    ("noise", "clip"): "1000",
    ("noise", "modes"): "4",
    ("noise", "amplitude"): "0.2",
    ("run", "epsilon"): "0.1",
    ("run", "horizon"): "1",
    ("run", "steps"): "64",
    ("run", "paths"): "100",
    ("run", "seed"): "0",
    ("run", "tag"): "default",
    ("run", "x0"): "constant:1",
    ("run", "drift_const"): "0.1",
}


class ConfigError(ValueError):
    """Carries every violation found while parsing a config."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class ExperimentConfig:
    """Validated key-value configuration, keyed by (section, key)."""

    entries: dict = field(default_factory=dict)

    def get(self, section: str, key: str, default=None) -> str | None:
        return self.entries.get((section, key), default)

    @property
    def experiment(self) -> str:
        return self.entries[("experiment", "kind")]

    def normalize(self) -> str:
        lines = [f"{s}.{k} = {v}" for (s, k), v in sorted(self.entries.items())]
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.normalize().encode()).hexdigest()

    # -- builders -------------------------------------------------------

    def build_space(self) -> DirichletSpace:
        if ("space", "preset") in self.entries:
            space = preset_space(self.get("space", "preset"))
        else:
            n = int(self.get("space", "nodes"))
            W = np.zeros((n, n))
            for part in _split_list(self.get("space", "edges", "")):
                m = re.fullmatch(r"(\d+)-(\d+):(\S+)", part)
                if not m:
                    raise ValueError(f"edge {part!r} is not of the form "
                                     "'i-j:weight'")
                i, j, w = int(m.group(1)), int(m.group(2)), float(m.group(3))
                if not (0 <= i < n and 0 <= j < n):
                    raise ValueError(f"edge {part!r} references a node "
                                     f"outside 0..{n - 1}")
                W[i, j] = W[j, i] = w
            killing = _float_list(self.get("space", "killing"))
            measure = _float_list(self.get("space", "measure", ""))
            if not measure:
                measure = [1.0] * n
            space = build_graph_space(W, killing, measure, label="custom")
        bernstein = self.get("space", "bernstein")
        if bernstein:
            space = subordinate(space, _parse_bernstein(bernstein))
        return space

    def build_potential(self):
        kind = self.get("potential", "kind")
        if kind == "fast_diffusion":
            return fast_diffusion(float(self.get("potential", "theta")))
        if kind == "porous_medium":
            return porous_medium(float(self.get("potential", "gamma")))
        if kind == "zhang":
            return zhang()
        knots = _float_list(self.get("potential", "knots"))
        pieces = [tuple(float(x) for x in p.split(":"))
                  for p in _split_list(self.get("potential", "pieces"))]
        return piecewise_quadratic(knots, pieces)

    def build_noise(self, space: DirichletSpace):
        kind = self.get("noise", "kind")
        if kind == "diagonal":
            return diagonal_noise(space.node_count,
                                  float(self.get("noise", "sigma")),
                                  clip_at=float(self.get("noise", "clip")))
        return eigenmode_noise(space, int(self.get("noise", "modes")),
                               float(self.get("noise", "amplitude")))

    def initial_state(self, space: DirichletSpace, key: str = "x0") -> np.ndarray:
        return _parse_state(self.get("run", key), space.node_count)

    def epsilon_values(self) -> list[float]:
        listed = self.get("run", "epsilon_list")
        if listed:
            return _float_list(listed)
        return [float(self.get("run", "epsilon"))]

    def sim_config(self, space, potential, noise, eps: float) -> SimulationConfig:
        return SimulationConfig(
            space=space, potential=potential, noise=noise, eps=eps,
            horizon=float(self.get("run", "horizon")),
            step_count=int(self.get("run", "steps")),
            path_count=int(self.get("run", "paths")),
            initial=self.initial_state(space),
            seed=int(self.get("run", "seed")),
            coupling_tag=self.get("run", "tag"),
        )


# -- preset spaces -------------------------------------------------------------


def preset_names() -> list[str]:
    return ["single", "path_<n>", "complete_<n>"]


def preset_space(name: str) -> DirichletSpace:
    """Build a named preset: ``single``, ``path_<n>`` or ``complete_<n>``."""
    if name == "single":
        return single_node_space()
    m = re.fullmatch(r"path_(\d+)", name)
    if m:
        return path_space(int(m.group(1)))
    m = re.fullmatch(r"complete_(\d+)", name)
    if m:
        return complete_space(int(m.group(1)))
    raise ValueError(f"unknown preset {name!r}")


# -- parsing ----------------------------------------------------------------------


def _split_list(text: str | None) -> list[str]:
    if not text:
        return []
    return [p.strip() for p in text.split(",") if p.strip()]


def _float_list(text: str | None) -> list[float]:
    return [float(p) for p in _split_list(text)]


def _parse_bernstein(text: str) -> BernsteinFunction:
    m = re.fullmatch(r"(power|shifted_power)\(([^)]+)\)", text.strip())
    if not m:
        raise ValueError(f"cannot parse Bernstein spec {text!r}")
    return BernsteinFunction(m.group(1), float(m.group(2)))


def _parse_state(text: str, n: int) -> np.ndarray:
    text = text.strip()
    if text.startswith("constant:"):
        return np.full(n, float(text.split(":", 1)[1]))
    if text.startswith("spike:"):
        j = int(text.split(":", 1)[1])
        out = np.zeros(n)
        out[j] = 1.0
        return out
    values = _float_list(text)
    if len(values) != n:
        raise ValueError(f"state has {len(values)} entries, space has {n} nodes")
    return np.asarray(values)


_LINE = re.compile(r"([A-Za-z_]+)\.([A-Za-z0-9_]+)\s*=\s*(.*)")


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a config; raise ``ConfigError`` with every
    violation when anything is wrong."""
    problems: list[str] = []
    entries: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE.fullmatch(line)
        if not m:
            problems.append(f"line {lineno}: expected 'section.key = value', "
                            f"got {line!r}")
            continue
        section, key, value = m.group(1), m.group(2), m.group(3).strip()
        if section not in _KNOWN_KEYS:
            problems.append(f"line {lineno}: unknown section {section!r}")
            continue
        if key not in _KNOWN_KEYS[section]:
            problems.append(f"line {lineno}: unknown key {section}.{key}")
            continue
        entries[(section, key)] = value

    provided = frozenset(entries)
    has_custom_space = ("space", "nodes") in entries
    for (section, key), value in _DEFAULTS.items():
        entries.setdefault((section, key), value)
    if ("space", "preset") not in entries and not has_custom_space:
        entries[("space", "preset")] = "single"

    cfg = ExperimentConfig(entries)
    problems.extend(_semantic_problems(cfg, provided))
    if problems:
        raise ConfigError(problems)
    return cfg


def _semantic_problems(cfg: ExperimentConfig,
                       provided: frozenset = frozenset()) -> list[str]:
    problems = []
    exp = cfg.get("experiment", "kind")
    if exp not in EXPERIMENTS:
        problems.append(f"experiment.kind: unknown experiment {exp!r}, "
                        f"expected one of {', '.join(EXPERIMENTS)}")

    for eps in cfg.epsilon_values() or [np.nan]:
        if not 0.0 < eps < 1.0:
            problems.append(f"run.epsilon: epsilon must lie in (0,1), got {eps:g}")
    if float(cfg.get("run", "horizon")) <= 0:
        problems.append("run.horizon: horizon must be positive")
    if int(cfg.get("run", "steps")) < 1:
        problems.append("run.steps: need at least one step")
    if int(cfg.get("run", "paths")) < 1:
        problems.append("run.paths: need at least one path")

    kind = cfg.get("potential", "kind")
    if kind not in ("fast_diffusion", "porous_medium", "zhang", "piecewise"):
        problems.append(f"potential.kind: unknown kind {kind!r}")
    elif kind == "fast_diffusion":
        theta = float(cfg.get("potential", "theta"))
        if not 0 < theta < 1:
            problems.append("potential.theta: exponent must lie in (0,1)")
    elif kind == "porous_medium":
        if float(cfg.get("potential", "gamma")) <= 1:
            problems.append("potential.gamma: exponent must exceed 1")
    elif kind == "piecewise":
        if not cfg.get("potential", "knots") or not cfg.get("potential", "pieces"):
            problems.append("potential.knots/pieces: piecewise kind needs both")

    if exp in _SIM_EXPERIMENTS:
        if ("noise", "kind") not in provided and exp in ("svi", "contraction"):
            # These verdicts depend on the certified noise constants, so the
            # noise block must be intentional rather than defaulted.
            problems.append(f"noise: block required for experiment {exp!r} "
                            "(set noise.kind, noise.sigma, ...)")
        if exp == "contraction" and not cfg.get("run", "y0"):
            problems.append("run.y0: contraction experiment needs a second "
                            "initial state")
        if exp == "eps_convergence" and len(cfg.epsilon_values()) < 2:
            problems.append("run.epsilon_list: eps_convergence needs at "
                            "least two decreasing levels")

    noise_kind = cfg.get("noise", "kind")
    if noise_kind not in ("diagonal", "additive"):
        problems.append(f"noise.kind: unknown kind {noise_kind!r}")
    elif noise_kind == "diagonal" and float(cfg.get("noise", "sigma")) < 0:
        problems.append("noise.sigma: must be nonnegative")

    space = None
    if ("space", "preset") in cfg.entries:
        try:
            space = preset_space(cfg.get("space", "preset"))
        except ValueError as err:
            problems.append(f"space.preset: {err}")
    else:
        try:
            space = cfg.build_space()
        except Exception as err:  # graph construction reports its own reason
            problems.append(f"space: {err}")
    bern = cfg.get("space", "bernstein")
    if bern:
        try:
            _parse_bernstein(bern)
        except ValueError as err:
            problems.append(f"space.bernstein: {err}")
    if space is not None:
        for key in ("x0", "y0"):
            value = cfg.get("run", key)
            if value:
                try:
                    _parse_state(value, space.node_count)
                except ValueError as err:
                    problems.append(f"run.{key}: {err}")
    return problems


# -- experiment dispatch -------------------------------------------------------------


def _norms_checks(space: DirichletSpace, seed: int) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    checks = []

    vals, limits = [], []
    for _ in range(100):
        v = rng.standard_normal(space.node_count)
        shifts = [10.0 ** -k for k in range(0, 7)]
        series = [space.dual_norm(v, s) for s in shifts]
        vals.append(min(b - a for a, b in zip(series, series[1:])))
        limit = space.dual_norm(v)
        limits.append(abs(series[-1] - limit) / limit)
    checks.append(CheckResult("dual_norm_monotone_in_shift",
                              min(vals) >= -1e-12, float(min(vals))))
    checks.append(CheckResult("dual_norm_vanishing_shift_limit",
                              max(limits) <= 1e-6, float(1e-6 - max(limits)),
                              detail="relative gap at shift 1e-6"))

    u = rng.standard_normal((1000, space.node_count))
    v = rng.standard_normal((1000, space.node_count))
    lhs = space.dual_inner(space.apply_generator(u), v)
    rhs = -space.inner(u, v)
    scale = np.maximum(space.lp_norm(u, 2) * space.lp_norm(v, 2), 1e-30)
    worst = float(np.max(np.abs(lhs - rhs) / scale))
    checks.append(CheckResult("generator_pairing_identity", worst <= 1e-10,
                              1e-10 - worst))

    gamma_worst = 0.0
    for r in (1.0, 2.0, 3.0):
        w = rng.standard_normal(space.node_count)
        spectral = space.gamma_transform(r, w)
        quad = gamma_transform_quadrature(space, r, w)
        gamma_worst = max(gamma_worst, float(
            np.linalg.norm(spectral - quad) / np.linalg.norm(spectral)))
    checks.append(CheckResult("gamma_transform_quadrature_oracle",
                              gamma_worst <= 1e-6, 1e-6 - gamma_worst))

    op_worst = 0.0
    for t in (0.1, 0.5, 1.0, 2.0):
        a = space.opnorm(t, 1, 2) ** 2
        b = space.opnorm(2 * t, 1, np.inf)
        op_worst = max(op_worst, abs(a - b) / b)
    checks.append(CheckResult("ultracontractivity_identity",
                              op_worst <= 1e-8, 1e-8 - op_worst))

    u = rng.standard_normal((1000, space.node_count))
    slack = space.energy_norm(u) - np.abs(u) @ (space.witness * space.measure)
    checks.append(CheckResult("witness_inequality", float(slack.min()) >= -1e-10,
                              float(slack.min())))
    return checks


def run_experiment(cfg: ExperimentConfig, out_dir, threads: int = 1) -> int:
    """Execute the configured experiment and write artifacts.

    Returns 0 exactly when every report passes.  ``threads`` is accepted
    for interface compatibility; path evaluation is already vectorized and
    results never depend on it.
    """
    del threads
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    exp = cfg.experiment
    space = cfg.build_space()
    potential = cfg.build_potential()
    reports: list[EstimateReport] = []

    if exp == "assumptions":
        grid = np.linspace(-10.0, 10.0, 2001)
        rep = check_assumptions(potential, grid)
        (out / "report_assumptions.txt").write_text(rep.to_text())
        reports.append(EstimateReport(
            name="assumptions", passed=rep.passed,
            worst_margin=min(e.margin for e in rep.entries),
            columns=("check", "passed", "margin"),
            series=tuple((e.name, e.passed, e.margin) for e in rep.entries)))
        reports[-1].write(out, "report_assumptions_summary")
    elif exp == "norms":
        checks = _norms_checks(space, int(cfg.get("run", "seed")))
        rep = bundle_report("norms", checks)
        rep.write(out, "report_norms")
        reports.append(rep)
    else:
        noise = cfg.build_noise(space)
        eps_values = cfg.epsilon_values()
        base = cfg.sim_config(space, potential, noise, eps_values[0])
        decay_text = cfg.get("run", "decay_rate")
        cert = certify_noise(noise, space)
        decay = float(decay_text) if decay_text else 2.0 * cert.lipschitz + 1.0

        if exp == "eps_convergence":
            rep = epsilon_convergence(base, eps_values, decay_rate=decay)
            rep.write(out, "report_eps_convergence")
            reports.append(rep)
        elif exp == "contraction":
            y0 = cfg.initial_state(space, key="y0")
            rep = contraction_experiment(base, y0, decay_rate=decay)
            rep.write(out, "report_contraction")
            reports.append(rep)
        elif exp == "energy":
            for eps in eps_values:
                ens = simulate(base.with_eps(eps))
                rep = energy_budget(ens)
                rep.write(out, f"report_energy_eps{_eps_tag(eps)}")
                reports.append(rep)
                _dump_run(ens, out, f"trajectories_eps{_eps_tag(eps)}")
            if len(eps_values) >= 2:
                rep = energy_uniformity(base, eps_values)
                rep.write(out, "report_energy_uniformity")
                reports.append(rep)
        elif exp == "regularity":
            functional = EnergyFunctional(space, potential)
            for eps in eps_values:
                ens = simulate(base.with_eps(eps))
                rep = regularity_budget(ens, functional)
                rep.write(out, f"report_regularity_eps{_eps_tag(eps)}")
                reports.append(rep)
                _dump_run(ens, out, f"trajectories_eps{_eps_tag(eps)}")
            if len(eps_values) >= 2:
                rep = regularity_uniformity(base, eps_values)
                rep.write(out, "report_regularity_uniformity")
                reports.append(rep)
        else:  # svi
            functional = EnergyFunctional(space, potential)
            drift_const = float(cfg.get("run", "drift_const"))
            for eps in eps_values:
                ens = simulate(base.with_eps(eps))
                _dump_run(ens, out, f"trajectories_eps{_eps_tag(eps)}")
                zero_z0 = np.zeros(space.node_count)
                cases = [
                    ("zero", build_test_process(ens, zero_z0)),
                    ("constant", build_test_process(
                        ens, zero_z0,
                        drift=np.full(space.node_count, drift_const))),
                    ("replayed", build_test_process(ens, base.initial,
                                                    drift=ens)),
                ]
                for tag, proc in cases:
                    rep = check_svi(ens, proc, functional)
                    rep.write(out, f"report_svi_{tag}_eps{_eps_tag(eps)}")
                    reports.append(rep)

    _write_manifest(cfg, out, reports)
    return 0 if all(r.passed for r in reports) else 1


def _eps_tag(eps: float) -> str:
    return f"{eps:g}".replace(".", "p")


def _dump_run(ensemble, out: Path, stem: str) -> None:
    write_trajectories(ensemble, out / f"{stem}.csv")
    write_metadata(ensemble, out / f"{stem}.meta")


def _write_manifest(cfg: ExperimentConfig, out: Path, reports) -> None:
    lines = [
        f"config_sha256 = {cfg.digest()}",
        f"experiment = {cfg.experiment}",
        f"seed = {cfg.get('run', 'seed')}",
        f"steps = {cfg.get('run', 'steps')}",
        f"paths = {cfg.get('run', 'paths')}",
        f"package_version = {__version__}",
        f"numpy_version = {np.__version__}",
        f"reports = {len(reports)}",
        f"all_passed = {format_value(all(r.passed for r in reports))}",
        "",
        "# normalized configuration",
    ]
    lines += ["# " + line for line in cfg.normalize().strip().splitlines()]
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")
