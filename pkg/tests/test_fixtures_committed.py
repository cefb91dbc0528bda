"""Guard the committed fixture directories the README demos rely on."""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

import pytest

from patchtrace.evaluation import VariantSpec, load_ground_truth, run_experiment
from patchtrace.report import RunConfig, trace_once

from conftest import replay_policy
from scenarios import URL_FIX, WORKED_CVE

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

pytestmark = pytest.mark.skipif(
    not FIXTURES.exists(), reason="committed fixtures not generated"
)


def test_committed_worked_example_replays():
    report = trace_once(
        WORKED_CVE, RunConfig(transport=replay_policy(FIXTURES / "cve-2017-11428"))
    )
    assert [p.node_id for p in report.selected] == [URL_FIX]
    assert report.selected[0].connectivity == Fraction(3, 2)
    assert len(report.expanded) == 3


def test_committed_mini_corpus_matches_expected_table():
    truths = load_ground_truth(FIXTURES / "mini" / "truth.txt")
    base = RunConfig(transport=replay_policy(FIXTURES / "mini" / "replay"))
    experiment = run_experiment(truths, base, [VariantSpec("default", base)])
    table = experiment.result("default").table
    expected = json.loads((FIXTURES / "mini" / "expected_table.json").read_text())
    for label, values in expected.items():
        line = table.line(label)
        assert line.count == values["count"]
        assert line.not_found == values["not_found"]
        for metric in ("precision", "recall", "f1"):
            assert getattr(line, metric) == pytest.approx(values[metric])
