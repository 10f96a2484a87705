"""Bundled regression fixtures.

Each case lives in a directory under ``data/``:

``toy/<arm>/``
    ``config.toml`` and a recorded ``transcript.jsonl`` for one ablation arm
    of the toy request-controller spec, plus the expected artifacts in
    ``golden/`` and independently computed scores in ``oracle_scores.json``.
``handshake/``
    A hand-written ``.sv`` file scored against a small RTL design.
``fig3/``
    A two-register design whose unrolled dependency graph is stored as DOT.

``verify_fixture`` regenerates a case offline (replay mode) and diffs every
file byte for byte; scores are also checked against the oracle numbers.
"""

from __future__ import annotations

import json
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

DATA = Path(__file__).parent / "data"
TOY = DATA / "toy"
SCORE_TOLERANCE = 1e-9

TOY_ARMS = ("default", "temperature_0.2", "no_regularization", "no_formalization", "no_decomposition")
TOY_ARTIFACTS = (
    "descriptions.json", "mapping.json", "regularized.json", "statements.json",
    "assertions.sv", "assertions.json", "report.json", "report.csv",
)
SCORE_ARTIFACTS = ("report.json", "report.csv")


@dataclass(frozen=True)
class FixtureCase:
    name: str
    kind: str  # "pipeline", "score" or "sdg"
    directory: Path

    @property
    def golden(self) -> Path:
        return self.directory / "golden"


@dataclass
class FixtureResult:
    case: FixtureCase
    mismatched: list = field(default_factory=list)
    missing: list = field(default_factory=list)
    score_errors: list = field(default_factory=list)
    error: str | None = None
    stage: str | None = None

    @property
    def passed(self) -> bool:
        return not (self.mismatched or self.missing or self.score_errors or self.error)

    def summary(self) -> str:
        if self.passed:
            return f"PASS {self.case.name}"
        parts = []
        if self.error:
            parts.append(f"error: {self.error}")
        if self.missing:
            parts.append("missing: " + ", ".join(self.missing))
        if self.mismatched:
            parts.append("differs: " + ", ".join(self.mismatched))
        if self.score_errors:
            parts.append("scores: " + "; ".join(self.score_errors))
        return f"FAIL {self.case.name} ({' | '.join(parts)})"


def all_cases() -> list[FixtureCase]:
    cases = [FixtureCase(f"toy/{arm}", "pipeline", TOY / arm) for arm in TOY_ARMS]
    cases.append(FixtureCase("handshake", "score", DATA / "handshake"))
    cases.append(FixtureCase("fig3", "sdg", DATA / "fig3"))
    return cases


def get_case(name: str) -> FixtureCase:
    for case in all_cases():
        if case.name == name:
            return case
    raise KeyError(name)


def regenerate(case: FixtureCase, out: Path) -> list[str]:
    """Write the case's artifacts into ``out``; returns the file names."""
    from ..config import PipelineConfig
    from ..pipeline import run_all, run_score
    from ..rtl import build_sdg

    out.mkdir(parents=True, exist_ok=True)
    if case.kind == "pipeline":
        config = PipelineConfig.from_file(case.directory / "config.toml", llm_mode="replay")
        run_all(config, TOY / "spec.md", out, TOY / "req_ctrl.v")
        return list(TOY_ARTIFACTS)
    if case.kind == "score":
        config = PipelineConfig.from_file(case.directory / "config.toml")
        run_score(config, case.directory / "handshake.sv", case.directory / "handshake.v", out)
        return list(SCORE_ARTIFACTS)
    if case.kind == "sdg":
        spec = json.loads((case.directory / "sdg.json").read_text())
        g = build_sdg((case.directory / spec["rtl"]).read_text(), spec["depth"], spec.get("include_conditions", True))
        (out / "sdg.dot").write_text(g.to_dot())
        return ["sdg.dot"]
    raise ValueError(f"unknown fixture kind {case.kind!r}")


def _check_scores(case: FixtureCase, out: Path, result: FixtureResult) -> None:
    oracle_path = case.directory / "oracle_scores.json"
    if not oracle_path.exists():
        return
    oracle = json.loads(oracle_path.read_text())
    report = json.loads((out / "report.json").read_text())["data"]
    got = {a["name"]: a["raw"] for a in report["assertions"]}
    if set(got) != set(oracle):
        result.score_errors.append(f"assertion sets differ: {sorted(set(got) ^ set(oracle))}")
        return
    for name, want in sorted(oracle.items()):
        if abs(got[name] - want) > SCORE_TOLERANCE:
            result.score_errors.append(f"{name}: {got[name]!r} vs oracle {want!r}")


def verify_fixture(case: FixtureCase, keep: Path | None = None) -> FixtureResult:
    result = FixtureResult(case)
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(keep) if keep is not None else Path(tmp)
        try:
            names = regenerate(case, out)
        except Exception as exc:  # reported, not raised: the CLI lists every case
            stage = getattr(exc, "stage", None)
            result.stage = stage
            result.error = f"{stage + ' stage, ' if stage else ''}{type(exc).__name__}: {exc}"
            return result
        for name in names:
            want = case.golden / name
            if not want.exists():
                result.missing.append(name)
            elif (out / name).read_bytes() != want.read_bytes():
                result.mismatched.append(name)
        if "report.json" in names:
            _check_scores(case, out, result)
    return result
