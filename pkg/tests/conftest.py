from __future__ import annotations

import pytest

from patchtrace.evaluation import standard_variant_grid
from patchtrace.report import RunConfig, trace_once
from patchtrace.transport import CachingTransport, TransportMode, TransportPolicy

from fakeweb import FakeWeb
from scenarios import CORPUS_CVES, WORKED_CVE, corpus_scenario, worked_example_scenario


def replay_policy(directory) -> TransportPolicy:
    return TransportPolicy(mode=TransportMode.REPLAY_ONLY, cache_dir=directory)


def record_replay_dir(scenario, directory, cve_ids, configs) -> None:
    """Run configurations against the fake web, recording every exchange."""
    recorder = CachingTransport(directory, FakeWeb(scenario))
    for config in configs:
        for cve_id in cve_ids:
            trace_once(cve_id, config, transport=recorder)


@pytest.fixture(scope="session")
def worked_scenario():
    return worked_example_scenario()


@pytest.fixture()
def worked_web(worked_scenario):
    return FakeWeb(worked_scenario)


@pytest.fixture(scope="session")
def worked_replay_dir(tmp_path_factory, worked_scenario):
    directory = tmp_path_factory.mktemp("replay-worked")
    record_replay_dir(worked_scenario, directory, [WORKED_CVE], [RunConfig()])
    return directory


@pytest.fixture(scope="session")
def corpus():
    return corpus_scenario()


@pytest.fixture()
def corpus_web(corpus):
    return FakeWeb(corpus)


@pytest.fixture(scope="session")
def corpus_replay_dir(tmp_path_factory, corpus):
    directory = tmp_path_factory.mktemp("replay-corpus")
    record_replay_dir(
        corpus, directory, CORPUS_CVES, [v.config for v in standard_variant_grid(RunConfig())]
    )
    return directory


@pytest.fixture(scope="session")
def corpus_truth_file(tmp_path_factory):
    from scenarios import corpus_truth_text

    path = tmp_path_factory.mktemp("truth") / "truth.txt"
    path.write_text(corpus_truth_text(), encoding="utf-8")
    return path
