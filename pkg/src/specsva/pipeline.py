"""Stage runners: each stage reads the previous stage's artifact from the
output directory and writes its own, so any stage can be re-run alone."""

from __future__ import annotations

import hashlib
import json
import logging
import shlex
import subprocess
import tempfile
from pathlib import Path
from typing import Optional

from . import __version__
from .config import PipelineConfig
from .estimator import ImportanceScorer
from .extraction import FunctionDescription, SpecDocument, extract_descriptions
from .formalization import FormalStatement, formalize_all, passthrough_statements, referenced_signals
from .gateway import LLMGateway, open_gateway
from .regularization import MappingTable, build_mapping_table, regularize
from .synthesis import generate_assertions, guess_clock_reset
from .sva import split_units

log = logging.getLogger(__name__)

DESCRIPTIONS = "descriptions.json"
MAPPING = "mapping.json"
REGULARIZED = "regularized.json"
STATEMENTS = "statements.json"
ASSERTIONS = "assertions.sv"
PROVENANCE = "assertions.json"
REPORT = "report.json"
REPORT_CSV = "report.csv"

_PRODUCER = {
    DESCRIPTIONS: "extract",
    MAPPING: "regularize",
    REGULARIZED: "regularize",
    STATEMENTS: "formalize",
    ASSERTIONS: "assemble",
    PROVENANCE: "assemble",
}


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


class MissingArtifact(StageError):
    pass


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _metadata(stage: str, config: PipelineConfig, gateway: Optional[LLMGateway], inputs: dict) -> dict:
    return {
        "tool": "specsva",
        "version": __version__,
        "stage": stage,
        "config": config.snapshot(),
        "config_digest": config.digest(),
        "transcript_digest": gateway.transcript.file_digest() if gateway is not None else None,
        "inputs": inputs,
    }


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def _write_json(out: Path, name: str, metadata: dict, data) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(_dump({"metadata": metadata, "data": data}), encoding="utf-8")
    return path


def _read_json(out: Path, name: str, stage: str) -> dict:
    path = out / name
    if not path.exists():
        raise MissingArtifact(stage, f"{name} not found in {out}; run the '{_PRODUCER.get(name, '?')}' stage first")
    return json.loads(path.read_text(encoding="utf-8"))["data"]


def _read_spec(spec_path, stage: str) -> tuple[SpecDocument, str]:
    path = Path(spec_path)
    if not path.exists():
        raise MissingArtifact(stage, f"specification {path} not found")
    raw = path.read_text(encoding="utf-8")
    return SpecDocument.from_text(raw), _sha256(raw.encode("utf-8"))


def run_extract(config: PipelineConfig, spec_path, out, gateway: LLMGateway) -> Path:
    out = Path(out)
    doc, spec_digest = _read_spec(spec_path, "extract")
    items = extract_descriptions(doc, config.m, config.k, gateway, temperature=config.temperature)
    data = {
        "m": config.m,
        "k": config.k,
        "sentence_count": len(doc.sentences),
        "segment_count": -(-len(doc.sentences) // config.m),
        "descriptions": [d.to_dict() for d in items],
    }
    meta = _metadata("extract", config, gateway, {"spec": spec_digest})
    return _write_json(out, DESCRIPTIONS, meta, data)


def _load_mapping(config: PipelineConfig, doc: SpecDocument, gateway: LLMGateway) -> MappingTable:
    if config.mapping:
        path = Path(config.mapping)
        if not path.exists():
            raise MissingArtifact("regularize", f"mapping file {path} not found")
        return MappingTable.from_json_file(path)
    return build_mapping_table(doc, gateway, config.temperature)


def run_regularize(config: PipelineConfig, spec_path, out, gateway: LLMGateway) -> Path:
    out = Path(out)
    items = [FunctionDescription.from_dict(d) for d in _read_json(out, DESCRIPTIONS, "regularize")["descriptions"]]
    doc, spec_digest = _read_spec(spec_path, "regularize")
    table = _load_mapping(config, doc, gateway)
    meta = _metadata("regularize", config, gateway, {"spec": spec_digest})
    _write_json(out, MAPPING, meta, table.to_dict())
    if config.semantic_regularization:
        kept = regularize(items, table, gateway, config.temperature, config.workers)
    else:
        kept = items
    data = {"applied": config.semantic_regularization, "input_count": len(items),
            "sentences": [d.to_dict() for d in kept]}
    meta = _metadata("regularize", config, gateway, {"spec": spec_digest})
    return _write_json(out, REGULARIZED, meta, data)


def run_formalize(config: PipelineConfig, out, gateway: LLMGateway) -> Path:
    out = Path(out)
    sentences = [FunctionDescription.from_dict(d) for d in _read_json(out, REGULARIZED, "formalize")["sentences"]]
    table = MappingTable.from_dict(_read_json(out, MAPPING, "formalize"))
    if config.formalization:
        result = formalize_all(sentences, table, gateway, config.temperature, config.workers)
        stmts, errors = result.items, result.errors
    else:
        stmts, errors = passthrough_statements(sentences, table), []
    data = {"applied": config.formalization, "statements": [s.to_dict() for s in stmts], "errors": errors}
    return _write_json(out, STATEMENTS, _metadata("formalize", config, gateway, {}), data)


def run_assemble(config: PipelineConfig, out, gateway: LLMGateway) -> Path:
    out = Path(out)
    stmts = [FormalStatement.from_dict(d) for d in _read_json(out, STATEMENTS, "assemble")["statements"]]
    sentences = _read_json(out, REGULARIZED, "assemble")["sentences"]
    table = MappingTable.from_dict(_read_json(out, MAPPING, "assemble"))
    clock, reset, low = guess_clock_reset(table)
    clock = config.clock or clock
    reset = config.reset or reset
    if config.reset_active_low is not None:
        low = config.reset_active_low
    elif config.reset:
        low = config.reset.lower().endswith(("_n", "_b", "n"))
    result = generate_assertions(
        stmts, table, gateway, clock, reset, low,
        decomposition=config.decomposition,
        require_connective=config.formalization,
        temperature=config.temperature,
        workers=config.workers,
    )
    pruned = [i for i, s in enumerate(stmts) if not referenced_signals(s.text, table)]
    meta = _metadata("assemble", config, gateway, {})
    out.mkdir(parents=True, exist_ok=True)
    header = [
        "// SystemVerilog assertions generated by specsva",
        f"// config_digest: {meta['config_digest']}",
        f"// config: {json.dumps(meta['config'], sort_keys=True)}",
        "",
    ]
    body = "\n".join(a.source for a in result.items)
    (out / ASSERTIONS).write_text("\n".join(header) + body, encoding="utf-8")
    records = []
    for a in result.items:
        stmt = stmts[a.statement]
        sent = sentences[stmt.source_sentence] if stmt.source_sentence < len(sentences) else None
        records.append({
            "name": a.name,
            "mode": "decomposed" if a.pair is not None else "one_shot",
            "antecedent": a.pair.antecedent if a.pair else None,
            "consequent": a.pair.consequent if a.pair else None,
            "statement": a.statement,
            "statement_text": stmt.text,
            "sentence": stmt.source_sentence,
            "sentence_text": sent["text"] if sent else None,
            "segment": sent["source_segment"] if sent else None,
        })
    data = {"clock": clock, "reset": reset, "reset_active_low": low, "assertions": records,
            "pruned_statements": pruned, "errors": result.errors}
    return _write_json(out, PROVENANCE, meta, data)


def external_syntax_check(unit: str, command: str) -> bool:
    """Run ``command <file>`` on one assertion unit; exit status 0 accepts."""
    with tempfile.NamedTemporaryFile("w", suffix=".sv", delete=False) as fh:
        fh.write(unit)
        path = fh.name
    try:
        proc = subprocess.run(shlex.split(command) + [path], capture_output=True)
        return proc.returncode == 0
    finally:
        Path(path).unlink(missing_ok=True)


def run_score(config: PipelineConfig, sv_path, rtl_path, out) -> Path:
    out = Path(out)
    sv_path, rtl_path = Path(sv_path), Path(rtl_path)
    for p in (sv_path, rtl_path):
        if not p.exists():
            raise MissingArtifact("score", f"{p} not found")
    sv_text = sv_path.read_text(encoding="utf-8")
    rtl_text = rtl_path.read_text(encoding="utf-8")
    scorer = ImportanceScorer(
        damping=config.damping, tol=config.tolerance, unroll_margin=config.unroll_depth_margin,
        unroll_depth=config.unroll_depth, include_conditions=config.include_conditions, top_n=config.top_n,
    ).fit(rtl_text)
    if config.syntax_checker:
        units = [text for _, text in split_units(sv_text)]
        accepted = [u for u in units if external_syntax_check(u, config.syntax_checker)]
        rejected = len(units) - len(accepted)
        report = scorer.report("\n".join(accepted))
        report.syntax_incorrect += rejected
    else:
        report = scorer.report(sv_text)
    if report.syntax_correct == 0 and report.syntax_incorrect == 0:
        report.warnings.append(f"{sv_path.name} contains no assertions")
    for w in report.warnings:
        log.warning(w)
    meta = _metadata("score", config, None, {
        "assertions": _sha256(sv_text.encode("utf-8")), "rtl": _sha256(rtl_text.encode("utf-8")),
    })
    _write_json(out, REPORT, meta, report.to_dict())
    (out / REPORT_CSV).write_text(report.to_csv(), encoding="utf-8")
    return out / REPORT


def run_all(config: PipelineConfig, spec_path, out, rtl_path=None, gateway: Optional[LLMGateway] = None) -> Path:
    gateway = gateway or open_gateway(config.llm_mode, config.transcript)
    stages = [
        ("extract", lambda: run_extract(config, spec_path, out, gateway)),
        ("regularize", lambda: run_regularize(config, spec_path, out, gateway)),
        ("formalize", lambda: run_formalize(config, out, gateway)),
        ("assemble", lambda: run_assemble(config, out, gateway)),
    ]
    if rtl_path is not None:
        stages.append(("score", lambda: run_score(config, Path(out) / ASSERTIONS, rtl_path, out)))
    last = None
    for name, stage in stages:
        try:
            last = stage()
        except Exception as exc:
            if not hasattr(exc, "stage"):
                exc.stage = name  # lets callers say which stage broke
            raise
    return last
