from __future__ import annotations

from patchtrace.expansion import (
    ExpansionConfig,
    MatchKind,
    expand_patch,
    messages_match,
)
from patchtrace.github import commit_ref_from_url, fetch_commit
from patchtrace.models import (
    IdentifierKind,
    NodeKind,
    SourceId,
    TrackingIdentifier,
)
from patchtrace.network import (
    BuildConfig,
    ReferenceNetwork,
    ReferenceNode,
    build_network,
    source_node_id,
)

from fakeweb import CommitSpec, FakeWeb, JitterTransport, RepoSpec, Scenario
from scenarios import (
    C5_URL_SVN,
    FIX_MESSAGE,
    SHA_BACKPORT_08,
    SHA_BACKPORT_09,
    SHA_BACKPORT_16,
    URL_FIX,
    WORKED_CVE,
    corpus_scenario,
)

CVE_IDS = [TrackingIdentifier(kind=IdentifierKind.CVE, text=WORKED_CVE)]


def _patch_network(url: str, detail) -> ReferenceNetwork:
    net = ReferenceNetwork(cve_id=WORKED_CVE, root=WORKED_CVE, depth_limit=5)
    net.add_node(ReferenceNode(id=WORKED_CVE, kind=NodeKind.ROOT))
    sid = source_node_id(SourceId.NVD)
    net.add_node(ReferenceNode(id=sid, kind=NodeKind.SOURCE))
    net.edges.add((WORKED_CVE, sid))
    net.add_node(ReferenceNode(id=url, kind=NodeKind.PATCH))
    net.edges.add((sid, url))
    net.details[url] = detail
    return net


# -- messages_match --------------------------------------------------------------


def test_identical_message_is_message_relation():
    assert (
        messages_match(FIX_MESSAGE, FIX_MESSAGE, CVE_IDS) is MatchKind.MESSAGE_RELATION
    )


def test_cve_mention_in_unrelated_message_is_identifier_mention():
    candidate = "Backport fix for CVE-2017-11428 to 0.8.x"
    assert (
        messages_match(candidate, "completely different subject", CVE_IDS)
        is MatchKind.IDENTIFIER_MENTION
    )


def test_boundary_strings_never_match_vacuously():
    # oracle: after normalization these candidates are empty, and empty
    # containment is excluded by the rule
    for candidate in ("", "   ", "\n\t", "(cherry picked from commit " + "a" * 40 + ")"):
        assert messages_match(candidate, FIX_MESSAGE, CVE_IDS) is None


def test_containment_both_directions():
    longer = "Fix overflow\n\nDetails follow."
    shorter = "fix overflow"
    assert messages_match(shorter, longer, []) is MatchKind.MESSAGE_RELATION
    assert messages_match(longer, shorter, []) is MatchKind.MESSAGE_RELATION


def test_cherry_pick_trailer_stripped_for_equality():
    cherry = FIX_MESSAGE + "\n(cherry picked from commit " + "a" * 40 + ")"
    assert messages_match(cherry, FIX_MESSAGE, []) is MatchKind.MESSAGE_RELATION


def test_identifier_match_is_case_insensitive():
    ids = [TrackingIdentifier(kind=IdentifierKind.ISSUE, text="THRIFT-4647")]
    assert (
        messages_match("fixes thrift-4647 crash", "unrelated", ids)
        is MatchKind.IDENTIFIER_MENTION
    )


# -- expand_patch -----------------------------------------------------------------


def test_worked_example_expands_to_three_backports(worked_web):
    net = build_network(WORKED_CVE, BuildConfig(), transport=worked_web)
    expanded = expand_patch(net, URL_FIX, ExpansionConfig(), CVE_IDS, worked_web)
    by_sha = {p.commit.commit_id: p for p in expanded}
    assert set(by_sha) == {SHA_BACKPORT_08, SHA_BACKPORT_09, SHA_BACKPORT_16}
    assert by_sha[SHA_BACKPORT_08].branches == ("0.8.17", "0.8.3")
    assert by_sha[SHA_BACKPORT_09].branches == ("v0.9.3",)
    assert all(p.matched_by is MatchKind.MESSAGE_RELATION for p in expanded)
    # expanded commits became children of the selected patch
    assert set(net.children(URL_FIX)) == {p.commit.url for p in expanded}


def test_svn_patch_expansion_skipped_with_note():
    web = FakeWeb(corpus_scenario())
    detail = fetch_commit(commit_ref_from_url(C5_URL_SVN), web)
    net = _patch_network(C5_URL_SVN, detail)
    expanded = expand_patch(net, C5_URL_SVN, ExpansionConfig(), [], web)
    assert expanded == []
    assert any("non-GitHub" in note for note in net.notes)


def test_disabled_expansion_returns_nothing(worked_web):
    net = build_network(WORKED_CVE, BuildConfig(), transport=worked_web)
    config = ExpansionConfig(enabled=False)
    assert expand_patch(net, URL_FIX, config, CVE_IDS, worked_web) == []


def test_same_backport_on_two_branches_is_one_entry_with_both_branches(worked_web):
    net = build_network(WORKED_CVE, BuildConfig(), transport=worked_web)
    expanded = expand_patch(net, URL_FIX, ExpansionConfig(), CVE_IDS, worked_web)
    dupes = [p for p in expanded if p.commit.commit_id == SHA_BACKPORT_08]
    assert len(dupes) == 1
    assert dupes[0].branches == ("0.8.17", "0.8.3")
    assert dupes[0].branch == "0.8.17"


def test_results_sorted_by_branch_then_commit(worked_web):
    net = build_network(WORKED_CVE, BuildConfig(), transport=worked_web)
    expanded = expand_patch(net, URL_FIX, ExpansionConfig(), CVE_IDS, worked_web)
    keys = [(p.branch, p.commit.commit_id) for p in expanded]
    assert keys == sorted(keys)


# -- invariants -------------------------------------------------------------------


def _expand_with_span(web, span: int):
    net = build_network(WORKED_CVE, BuildConfig(), transport=web)
    expanded = expand_patch(
        net, URL_FIX, ExpansionConfig(span_days=span), CVE_IDS, web
    )
    return {p.commit.commit_id for p in expanded}


def test_span_monotonicity(worked_web):
    previous: set[str] = set()
    for span in (0, 5, 10, 20, 30, 60):
        current = _expand_with_span(worked_web, span)
        assert previous <= current
        previous = current


def test_no_self_expansion(worked_web):
    for span in (0, 30, 365):
        assert URL_FIX not in {
            f"https://github.com/onelogin/ruby-saml/commit/{sha}"
            for sha in _expand_with_span(worked_web, span)
        }


def test_expansion_deterministic_under_fetch_jitter(worked_scenario):
    def run(seed: int):
        transport = JitterTransport(FakeWeb(worked_scenario), seed=seed)
        net = build_network(WORKED_CVE, BuildConfig(), transport=transport)
        expanded = expand_patch(net, URL_FIX, ExpansionConfig(), CVE_IDS, transport)
        return [p.to_dict() for p in expanded]

    assert run(3) == run(4000)


def test_equivalence_direction_symmetry():
    # two commits with the same message on one branch: whichever is selected,
    # its expansion contains the other
    message = "Clamp frame size before allocation"
    sha_a, sha_b = "a" * 40, "b" * 40
    scenario = Scenario()
    scenario.add_repo(
        RepoSpec(
            owner="pair",
            name="demo",
            default_branch="main",
            branches={"main": [sha_a, sha_b]},
            commits={
                sha_a: CommitSpec(sha_a, message, 1_600_000_000, ("src/frame.c",)),
                sha_b: CommitSpec(
                    sha_b, message, 1_600_000_000 + 86400, ("src/frame.c",)
                ),
            },
        )
    )
    web = FakeWeb(scenario)
    for selected_sha, other_sha in ((sha_a, sha_b), (sha_b, sha_a)):
        url = f"https://github.com/pair/demo/commit/{selected_sha}"
        detail = fetch_commit(commit_ref_from_url(url), web)
        net = _patch_network(url, detail)
        expanded = expand_patch(net, url, ExpansionConfig(), [], web)
        assert {p.commit.commit_id for p in expanded} == {other_sha}
