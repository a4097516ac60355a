"""Story-plot generation, filtering and pairwise judging."""

import json as _json
from typing import Optional

from . import _plotkit
from ._plotkit import (
    ParseError,
    PipelineConfig,
    PlotkitError,
    dump_prompt,
    percent_tenths,
    template_names,
    word_count,
)

__all__ = [
    "ParseError",
    "PipelineConfig",
    "PlotkitError",
    "aggregate_winrates",
    "deshuffle",
    "dump_prompt",
    "export_sft",
    "filter_records",
    "generate_plot",
    "parse_plot",
    "parse_verdict",
    "percent_tenths",
    "render_plot",
    "template_names",
    "validate_plot",
    "word_count",
]


def _jsonl(records):
    if isinstance(records, str):
        return records
    return "".join(_json.dumps(r) + "\n" for r in records)


def parse_plot(text: str) -> dict:
    return _json.loads(_plotkit.parse_plot(text))


def render_plot(doc: dict) -> str:
    return _plotkit.render_plot(_json.dumps(doc))


def validate_plot(text: str, config: Optional[PipelineConfig] = None) -> dict:
    return _json.loads(_plotkit.validate_plot(text, config or PipelineConfig()))


def generate_plot(rules, config: Optional[PipelineConfig] = None, premise: Optional[str] = None) -> dict:
    """Runs the planner against a scripted backend.

    `rules` is a rules dict or a path to a rules JSON file.
    """
    if not isinstance(rules, dict):
        with open(rules, encoding="utf-8") as f:
            rules = _json.load(f)
    return _json.loads(_plotkit.generate_plot(_json.dumps(rules), config or PipelineConfig(), premise))


def filter_records(records, config: Optional[PipelineConfig] = None) -> dict:
    return _json.loads(_plotkit.filter_records(_jsonl(records), config or PipelineConfig()))


def export_sft(records, config: Optional[PipelineConfig] = None) -> list:
    text, _ = _plotkit.export_sft(_jsonl(records), config or PipelineConfig())
    return [_json.loads(line) for line in text.splitlines() if line]


def parse_verdict(raw: str) -> Optional[str]:
    return _plotkit.parse_verdict(raw)


def deshuffle(verdict: str, presented_first: str, presented_second: str) -> str:
    return _plotkit.deshuffle(verdict, presented_first, presented_second)


def aggregate_winrates(records, aspect: Optional[str] = None) -> list:
    return _json.loads(_plotkit.aggregate_winrates(_jsonl(records), aspect))
