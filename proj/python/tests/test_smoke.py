import os
from pathlib import Path

import pytest

import plotkit

ROOT = Path(os.environ.get("PLOTKIT_SOURCE_DIR", Path(__file__).resolve().parents[2]))
RULES = ROOT / "fixtures" / "run1.json"


def test_prompt_templates_match_golden_files():
    names = plotkit.template_names()
    assert "premise" in names
    for name in names:
        golden = (ROOT / "tests" / "golden" / f"{name}.txt").read_text(encoding="utf-8")
        assert plotkit.dump_prompt(name) + "\n" == golden


def test_generate_parse_render_round_trip():
    cfg = plotkit.PipelineConfig()
    cfg.seed = 4
    cfg.candidates_per_step = 1
    run = plotkit.generate_plot(str(RULES), cfg)
    assert run["meta"]["total_calls"] == run["meta"]["expected_calls"]
    doc = plotkit.parse_plot(run["text"])
    assert doc == run["doc"]
    assert plotkit.render_plot(doc) == run["text"]
    assert plotkit.validate_plot(run["text"])["valid"]


def test_fixed_premise_and_config_validation():
    cfg = plotkit.PipelineConfig()
    cfg.annotate_scenes = False
    run = plotkit.generate_plot(str(RULES), cfg, premise="A lighthouse keeper finds a map.")
    assert run["doc"]["premise"] == "A lighthouse keeper finds a map."
    cfg.char_range = (5, 2)
    with pytest.raises(ValueError):
        cfg.check()


def test_parse_errors_raise():
    with pytest.raises(plotkit.ParseError):
        plotkit.parse_plot("not a plot")
    assert issubclass(plotkit.ParseError, plotkit.PlotkitError)


def test_filter_and_sft_export():
    cfg = plotkit.PipelineConfig()
    cfg.candidates_per_step = 1
    records = []
    for seed in range(5):
        cfg.seed = seed
        run = plotkit.generate_plot(str(RULES), cfg)
        records.append({"id": f"r{seed}", "premise": run["doc"]["premise"], "text": run["text"], "valid": True})
    records.append({"id": "bad", "premise": "", "text": "garbage", "valid": True})
    result = plotkit.filter_records(records)
    assert len(result["kept"]) == 5
    assert result["report"] == {"PARSE_ERROR": 1}
    lines = plotkit.export_sft(result["kept"])
    assert len(lines) == 5
    assert "Premise: " + lines[0]["prompt"] + "\n\n" + lines[0]["response"] == records[0]["text"]


def test_judge_helpers():
    assert plotkit.parse_verdict("first [[A]] then [[B]]") == "B"
    assert plotkit.parse_verdict("no verdict") is None
    assert plotkit.deshuffle("A", "tuned", "base") == "tuned"
    assert plotkit.deshuffle("C", "tuned", "base") == "TIE"
    records = (
        [{"pair_id": "p", "aspect": "OVERALL", "source_a": "x", "source_b": "y", "presented_first": "x",
          "verdict": "A", "winner": "x"}] * 229
        + [{"pair_id": "p", "aspect": "OVERALL", "source_a": "x", "source_b": "y", "presented_first": "x",
            "verdict": "B", "winner": "y"}] * 234
        + [{"pair_id": "p", "aspect": "OVERALL", "source_a": "x", "source_b": "y", "presented_first": "x",
            "verdict": "C", "winner": "TIE"}] * 37
    )
    row = plotkit.aggregate_winrates(records)[0]
    assert (row["pct_x"], row["pct_y"], row["pct_ties"]) == (45.8, 46.8, 7.4)
    assert plotkit.percent_tenths(2, 300) == 7
    assert plotkit.word_count("one two  three") == 3
