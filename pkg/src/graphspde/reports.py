"""Report containers for estimate experiments and invariant bundles.

Every Monte Carlo assertion in this package is reported with a batch-means
confidence interval and decided only on CI-adjusted margins.  Reports
serialize to a self-describing key-value text document plus a CSV table of
per-checkpoint rows, printed with 17 significant digits so reruns are
byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["CheckResult", "EstimateReport", "batch_mean_ci", "bundle_report",
           "format_value"]


def format_value(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def batch_mean_ci(samples: np.ndarray, batches: int = 20,
                  z: float = 1.96) -> tuple[np.ndarray, np.ndarray]:
    """Mean and normal-approximation CI half-width via path-batch means.

    ``samples`` has paths on the first axis.  Paths are split into at most
    ``batches`` contiguous batches (independent paths make any split valid);
    with a single path the half-width is reported as zero.
    """
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    mean = samples.mean(axis=0)
    b = min(batches, n)
    if b < 2:
        return mean, np.zeros_like(mean)
    edges = np.linspace(0, n, b + 1).astype(int)
    bm = np.stack([samples[lo:hi].mean(axis=0)
                   for lo, hi in zip(edges[:-1], edges[1:])])
    se = bm.std(axis=0, ddof=1) / np.sqrt(b)
    return mean, z * se


@dataclass(frozen=True)
class CheckResult:
    """Single named check with its worst margin (nonnegative means pass)."""

    name: str
    passed: bool
    margin: float
    detail: str = ""


@dataclass(frozen=True)
class EstimateReport:
    """Outcome of one estimate experiment.

    ``series`` holds per-checkpoint rows under ``columns`` (written to CSV);
    ``constants`` carries fitted quantities such as smallest admissible
    constants, decay rates and slopes.  ``worst_margin`` is the smallest
    CI-adjusted margin over all checkpoints; the report passes only if it
    is nonnegative.
    """

    name: str
    passed: bool
    worst_margin: float
    constants: dict = field(default_factory=dict)
    columns: tuple = ()
    series: tuple = ()
    notes: tuple = ()

    def to_text(self) -> str:
        lines = [f"report = {self.name}",
                 f"passed = {format_value(self.passed)}",
                 f"worst_margin = {format_value(self.worst_margin)}"]
        for key in sorted(self.constants):
            lines.append(f"constant.{key} = {format_value(self.constants[key])}")
        for i, note in enumerate(self.notes):
            lines.append(f"note.{i} = {note}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        for row in self.series:
            lines.append(",".join(format_value(x) for x in row))
        return "\n".join(lines) + "\n"

    def write(self, directory, stem: str) -> list:
        """Write the text report and, when a series exists, its CSV."""
        import pathlib

        directory = pathlib.Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        txt = directory / f"{stem}.txt"
        txt.write_text(self.to_text())
        paths.append(txt)
        if self.series:
            csv = directory / f"{stem}.csv"
            csv.write_text(self.to_csv())
            paths.append(csv)
        return paths


def bundle_report(name: str, checks: list[CheckResult],
                  constants: dict | None = None) -> EstimateReport:
    """Collapse named checks into one report with a margin table."""
    return EstimateReport(
        name=name,
        passed=all(c.passed for c in checks),
        worst_margin=min((c.margin for c in checks), default=0.0),
        constants=dict(constants or {}),
        columns=("check", "passed", "margin", "detail"),
        series=tuple((c.name, c.passed, c.margin, c.detail) for c in checks),
    )
