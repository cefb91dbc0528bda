from __future__ import annotations

import random

import pytest

from patchtrace.errors import EmptyNetworkError
from patchtrace.extraction import is_test_or_nonsource_only
from patchtrace.models import NodeKind, SourceId
from patchtrace.network import (
    BuildConfig,
    ReferenceNetwork,
    ReferenceNode,
    build_network,
    expand_node,
    source_node_id,
)

from fakeweb import CveSpec, FakeWeb, JitterTransport, Scenario
from scenarios import (
    URL_ADVISORY,
    URL_BLOG,
    URL_FIX,
    URL_GOSAML2_ISSUE,
    URL_SAMLBASE_COMMIT,
    URL_SAMLBASE_ISSUE,
    URL_SAML_ISSUE_140,
    URL_SAML_ISSUE_163,
    URL_SAML_TEST_1,
    URL_SAML_TEST_2,
    WORKED_CVE,
)
from webgen import random_web_scenario

NVD = source_node_id(SourceId.NVD)
DEBIAN = source_node_id(SourceId.DEBIAN)
REDHAT = source_node_id(SourceId.REDHAT)
GITHUB = source_node_id(SourceId.GITHUB)


@pytest.fixture()
def worked_network(worked_web):
    return build_network(WORKED_CVE, BuildConfig(), transport=worked_web)


# -- worked example structure --------------------------------------------------


def test_worked_example_matches_figure(worked_network):
    net = worked_network
    # sources: NVD, Debian, GitHub present; Red Hat absent
    assert NVD in net.nodes and DEBIAN in net.nodes and GITHUB in net.nodes
    assert REDHAT not in net.nodes

    # two hybrids under NVD, the same two plus the patch under Debian
    assert net.children(NVD) == sorted([URL_BLOG, URL_ADVISORY])
    assert net.children(DEBIAN) == sorted([URL_BLOG, URL_ADVISORY, URL_FIX])
    assert net.children(GITHUB) == [URL_FIX]

    # deep layers
    assert set(net.children(URL_ADVISORY)) == {
        URL_SAMLBASE_ISSUE,
        URL_SAML_ISSUE_140,
        URL_SAMLBASE_COMMIT,
    }
    assert net.children(URL_SAMLBASE_ISSUE) == [URL_SAMLBASE_COMMIT]
    assert set(net.children(URL_SAML_ISSUE_140)) == {
        URL_SAML_ISSUE_163,
        URL_SAML_TEST_1,
        URL_SAML_TEST_2,
    }

    # cross-repo issue dropped entirely
    assert URL_GOSAML2_ISSUE not in net.nodes
    assert any("cross-repo" in note for note in net.notes)

    # test-only commits present but removed
    assert net.nodes[URL_SAML_TEST_1].removed
    assert net.nodes[URL_SAML_TEST_2].removed
    assert not net.nodes[URL_FIX].removed
    assert not net.nodes[URL_SAMLBASE_COMMIT].removed

    # hybrid pages flagged with both their sources
    assert net.nodes[URL_BLOG].source_flags == {SourceId.NVD, SourceId.DEBIAN}


def test_empty_network_raises(corpus_web):
    with pytest.raises(EmptyNetworkError) as excinfo:
        build_network("CVE-2020-11011", BuildConfig(), transport=corpus_web)
    partial = excinfo.value.network
    assert partial is not None
    assert partial.reference_node_count() == 0


def test_shuffled_fetch_scheduling_yields_identical_network(worked_scenario):
    def build(seed: int) -> dict:
        transport = JitterTransport(FakeWeb(worked_scenario), seed=seed)
        return build_network(WORKED_CVE, BuildConfig(), transport=transport).to_dict()

    assert build(1) == build(99)


# -- expand_node ---------------------------------------------------------------


def test_expand_issue_node_drops_cross_repo_and_prunes_tests(worked_web):
    config = BuildConfig()
    net = ReferenceNetwork(cve_id=WORKED_CVE, root=WORKED_CVE, depth_limit=5)
    net.add_node(ReferenceNode(id=WORKED_CVE, kind=NodeKind.ROOT))
    net.add_node(ReferenceNode(id=NVD, kind=NodeKind.SOURCE))
    net.add_edge(WORKED_CVE, NVD)
    net.add_node(ReferenceNode(id=URL_SAML_ISSUE_140, kind=NodeKind.ISSUE))
    net.add_edge(NVD, URL_SAML_ISSUE_140)

    added = expand_node(net, URL_SAML_ISSUE_140, config, worked_web)
    assert set(added) == {URL_SAML_ISSUE_163, URL_SAML_TEST_1, URL_SAML_TEST_2}
    assert URL_GOSAML2_ISSUE not in net.nodes

    for url in (URL_SAML_TEST_1, URL_SAML_TEST_2):
        expand_node(net, url, config, worked_web)
        assert net.nodes[url].removed


def test_expand_hybrid_without_links_adds_nothing(worked_web):
    config = BuildConfig()
    net = ReferenceNetwork(cve_id=WORKED_CVE, root=WORKED_CVE, depth_limit=5)
    net.add_node(ReferenceNode(id=WORKED_CVE, kind=NodeKind.ROOT))
    net.add_node(ReferenceNode(id=NVD, kind=NodeKind.SOURCE))
    net.add_edge(WORKED_CVE, NVD)
    net.add_node(ReferenceNode(id=URL_BLOG, kind=NodeKind.HYBRID))
    net.add_edge(NVD, URL_BLOG)
    assert expand_node(net, URL_BLOG, config, worked_web) == []


def test_expand_issue_at_depth_limit_not_expanded(worked_web):
    config = BuildConfig(depth_limit=2)
    net = ReferenceNetwork(cve_id=WORKED_CVE, root=WORKED_CVE, depth_limit=2)
    net.add_node(ReferenceNode(id=WORKED_CVE, kind=NodeKind.ROOT))
    net.add_node(ReferenceNode(id=NVD, kind=NodeKind.SOURCE))
    net.add_edge(WORKED_CVE, NVD)
    net.add_node(ReferenceNode(id=URL_SAML_ISSUE_140, kind=NodeKind.ISSUE))
    net.add_edge(NVD, URL_SAML_ISSUE_140)  # depth 2 == limit
    assert expand_node(net, URL_SAML_ISSUE_140, config, worked_web) == []
    assert not net.children(URL_SAML_ISSUE_140)


def test_failed_page_fetch_marks_node_failed_leaf():
    scenario = Scenario()
    scenario.add_cve(
        CveSpec(
            cve_id="CVE-2022-1000",
            nvd_refs=["https://dead.example.org/page"],
            cpes=[],
        )
    )
    net = build_network("CVE-2022-1000", BuildConfig(), transport=FakeWeb(scenario))
    node = net.nodes["https://dead.example.org/page"]
    assert node.fetch_status.value == "failed"
    assert net.children(node.id) == []


# -- augment -------------------------------------------------------------------


def test_augment_attaches_search_hit_under_github_source(worked_network):
    # the worked example extracted no identifiers; the CVE-id search found the fix
    assert worked_network.identifiers == ()
    assert worked_network.children(GITHUB) == [URL_FIX]
    parents = worked_network.parents(URL_FIX)
    assert GITHUB in parents and DEBIAN in parents


def test_augment_excludes_cpe_mismatch(corpus_web):
    net = build_network("CVE-2020-11001", BuildConfig(), transport=corpus_web)
    fork_urls = [nid for nid in net.nodes if "forkuser" in nid]
    assert fork_urls == []


def test_augment_same_commit_from_two_keys_single_node_single_edge(corpus_web):
    net = build_network("CVE-2020-11006", BuildConfig(), transport=corpus_web)
    fix_url = next(nid for nid in net.nodes if "c60f00" in nid)
    github_edges = [e for e in net.edges if e == (GITHUB, fix_url)]
    assert len(github_edges) == 1
    # both search keys were used: the CVE id and the harvested STORE-88
    assert {i.text for i in net.identifiers} == {"STORE-88"}


def test_augment_disabled_when_github_source_off(worked_scenario):
    config = BuildConfig(enabled_sources=frozenset(SourceId) - {SourceId.GITHUB})
    net = build_network(WORKED_CVE, config, transport=FakeWeb(worked_scenario))
    assert GITHUB not in net.nodes


# -- invariants over random webs -------------------------------------------------


def _random_config(rng: random.Random) -> BuildConfig:
    return BuildConfig(depth_limit=rng.randint(2, 5), max_workers=rng.choice([1, 4]))


def test_depth_bound_and_layer_discipline_and_prune_soundness():
    rng = random.Random(20240701)
    for case in range(60):
        scenario = random_web_scenario(rng, cve_id=f"CVE-2021-{40000 + case}")
        config = _random_config(rng)
        try:
            net = build_network(
                f"CVE-2021-{40000 + case}", config, transport=FakeWeb(scenario)
            )
        except EmptyNetworkError:
            continue
        depths = net.depths()
        assert max(depths.values()) <= config.depth_limit
        for node in net.nodes.values():
            if node.kind is NodeKind.HYBRID:
                parents = net.parents(node.id)
                assert parents and all(p.startswith("source:") for p in parents)
            if node.removed:
                assert node.kind is NodeKind.PATCH
                assert is_test_or_nonsource_only(net.details[node.id])


def test_network_is_acyclic_even_with_cyclic_webs():
    rng = random.Random(777)
    for case in range(40):
        cve = f"CVE-2021-{41000 + case}"
        scenario = random_web_scenario(rng, cve_id=cve, allow_cycles=True)
        try:
            net = build_network(cve, BuildConfig(), transport=FakeWeb(scenario))
        except EmptyNetworkError:
            continue
        # Kahn's algorithm consumes every edge iff the graph is acyclic
        indegree = {nid: 0 for nid in net.nodes}
        for _, child in net.edges:
            indegree[child] += 1
        queue = [nid for nid, deg in indegree.items() if deg == 0]
        seen = 0
        while queue:
            current = queue.pop()
            seen += 1
            for parent, child in net.edges:
                if parent == current:
                    indegree[child] -= 1
                    if indegree[child] == 0:
                        queue.append(child)
        assert seen == len(net.nodes)


def test_order_independence_over_random_webs():
    rng = random.Random(31337)
    for case in range(12):
        cve = f"CVE-2021-{42000 + case}"
        scenario = random_web_scenario(rng, cve_id=cve)
        config = BuildConfig(max_workers=4)

        def build(seed: int):
            transport = JitterTransport(FakeWeb(scenario), seed=seed, max_delay=0.004)
            try:
                return build_network(cve, config, transport=transport).to_dict()
            except EmptyNetworkError:
                return None

        assert build(case) == build(case + 1000)


def test_source_ablation_yields_subgraph():
    rng = random.Random(90210)
    checked = 0
    for case in range(30):
        cve = f"CVE-2021-{43000 + case}"
        scenario = random_web_scenario(rng, cve_id=cve, allow_cycles=False)
        try:
            full = build_network(cve, BuildConfig(), transport=FakeWeb(scenario))
        except EmptyNetworkError:
            continue
        disabled = SourceId.DEBIAN
        config = BuildConfig(enabled_sources=frozenset(SourceId) - {disabled})
        try:
            ablated = build_network(cve, config, transport=FakeWeb(scenario))
        except EmptyNetworkError:
            continue
        restricted_nodes = set(full.nodes) - {source_node_id(disabled)}
        assert set(ablated.nodes) <= restricted_nodes
        assert ablated.edges <= {
            e for e in full.edges if source_node_id(disabled) not in e
        }
        checked += 1
    assert checked >= 5


def test_failed_advisory_source_recorded_build_continues(worked_scenario):
    from patchtrace.advisories import DEBIAN_LIST_URL
    from patchtrace.errors import TransportError
    from patchtrace.transport import Transport

    class _DebianDown(Transport):
        def __init__(self, inner):
            super().__init__()
            self.inner = inner

        def _fetch(self, method, url, body):
            if url == DEBIAN_LIST_URL:
                raise TransportError("tracker unreachable")
            return self.inner._fetch(method, url, body)

    transport = _DebianDown(FakeWeb(worked_scenario))
    net = build_network(WORKED_CVE, BuildConfig(), transport=transport)
    assert SourceId.DEBIAN in net.source_errors
    assert DEBIAN not in net.nodes
    assert NVD in net.nodes and GITHUB in net.nodes
    assert URL_FIX in net.nodes  # still found through commit search


def test_search_failure_noted_augment_best_effort(worked_scenario):
    from patchtrace.errors import RateLimitedError
    from patchtrace.transport import Transport

    class _SearchDown(Transport):
        def __init__(self, inner):
            super().__init__()
            self.inner = inner

        def _fetch(self, method, url, body):
            if "/search/commits" in url:
                raise RateLimitedError("slow down")
            return self.inner._fetch(method, url, body)

    transport = _SearchDown(FakeWeb(worked_scenario))
    net = build_network(WORKED_CVE, BuildConfig(), transport=transport)
    assert GITHUB not in net.nodes
    assert any("github-search" in note for note in net.notes)
    assert URL_FIX in net.nodes  # Debian still references the fix
