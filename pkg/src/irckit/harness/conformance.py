"""The fixed conformance scenario set and its runner.

The scenarios live in ``conformance.scn`` as reviewable data.  Each one
uses fresh connections and unique nick/channel names, so the suite is
order-independent against a single long-running server.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from irckit.harness.scenario import Scenario, ScenarioResult, ScenarioRunner, parse_scenarios


@dataclass
class SuiteSummary:
    results: list[ScenarioResult]

    @property
    def passed(self) -> list[ScenarioResult]:
        return [r for r in self.results if r.ok]

    @property
    def failed(self) -> list[ScenarioResult]:
        return [r for r in self.results if not r.ok]

    @property
    def ok(self) -> bool:
        return not self.failed

    def summary_line(self) -> str:
        if self.ok:
            return f"{len(self.passed)} passed"
        return f"{len(self.passed)} passed, {len(self.failed)} failed"


def load_scenarios() -> list[Scenario]:
    text = resources.files("irckit.harness").joinpath("conformance.scn").read_text("utf-8")
    return parse_scenarios(text)


def run_suite(host: str, port: int, names: list[str] | None = None) -> SuiteSummary:
    """Run the conformance scenarios (optionally a named subset)."""
    runner = ScenarioRunner(host, port)
    scenarios = load_scenarios()
    if names is not None:
        scenarios = [s for s in scenarios if s.name in names]
    return SuiteSummary([runner.run(s) for s in scenarios])
