"""Advisory clients for NVD, Debian, and Red Hat.

Each fetcher distinguishes "the source does not track this CVE" (an absent
value) from transport failure (an exception). Documents carry their
reference material as named text sections; downstream reference extraction
runs the same URL scanner over all of them.
"""

from __future__ import annotations

import gzip
import json
import time

from .errors import NotFoundError, ParseError
from .models import (
    AdvisoryDocument,
    CpeEntry,
    SourceId,
    cve_year,
    validate_cve_id,
)
from .transport import Transport, TransportPolicy, as_transport
from .urls import with_query

NVD_FEED_URL_TEMPLATE = "https://nvd.nist.gov/feeds/json/cve/1.1/nvdcve-1.1-{year}.json.gz"
DEBIAN_LIST_URL = (
    "https://salsa.debian.org/security-tracker-team/security-tracker"
    "/-/raw/master/data/CVE/list"
)
REDHAT_BUGZILLA_URL = "https://bugzilla.redhat.com/rest/bug"


def nvd_feed_url(year: int) -> str:
    return NVD_FEED_URL_TEMPLATE.format(year=year)


def redhat_bug_lookup_url(cve_id: str) -> str:
    return with_query(REDHAT_BUGZILLA_URL, {"alias": cve_id, "include_fields": "id"})


def redhat_comments_url(bug_id: int) -> str:
    return f"{REDHAT_BUGZILLA_URL}/{bug_id}/comment"


def _maybe_gunzip(body: bytes) -> bytes:
    if body[:2] == b"\x1f\x8b":
        return gzip.decompress(body)
    return body


def _collect_cpe_uris(node: dict, into: list[str]) -> None:
    for child in node.get("children", []):
        _collect_cpe_uris(child, into)
    for match in node.get("cpe_match", []):
        uri = match.get("cpe23Uri")
        if uri:
            into.append(uri)


def fetch_nvd_advisory(
    cve_id: str, policy: TransportPolicy | Transport
) -> AdvisoryDocument:
    """Fetch the CVE's entry from the year-partitioned NVD JSON feed.

    Returns a document with the reference URL list under "references" and
    the CPE name list under "cpes". Raises NotFoundError when the feed does
    not contain the CVE.
    """
    cve_id = validate_cve_id(cve_id)
    transport = as_transport(policy)
    url = nvd_feed_url(cve_year(cve_id))
    response = transport.get(url)
    if response.status != 200:
        raise NotFoundError(f"NVD feed for {cve_id} returned HTTP {response.status}")
    try:
        feed = json.loads(_maybe_gunzip(response.body).decode("utf-8"))
        items = feed["CVE_Items"]
        for item in items:
            meta = item.get("cve", {}).get("CVE_data_meta", {})
            if meta.get("ID") != cve_id:
                continue
            refs = [
                ref.get("url", "")
                for ref in item.get("cve", {})
                .get("references", {})
                .get("reference_data", [])
                if ref.get("url")
            ]
            cpes: list[str] = []
            for node in item.get("configurations", {}).get("nodes", []):
                _collect_cpe_uris(node, cpes)
            return AdvisoryDocument(
                source=SourceId.NVD,
                cve_id=cve_id,
                raw_fields={"references": "\n".join(refs), "cpes": "\n".join(cpes)},
                fetched_at=int(time.time()),
            )
    except (ValueError, KeyError, TypeError, AttributeError, UnicodeDecodeError) as exc:
        raise ParseError(f"malformed NVD feed at {url}: {exc}") from exc
    raise NotFoundError(f"{cve_id} is not in the NVD feed for {cve_year(cve_id)}")


def parse_cpe_entries(document: AdvisoryDocument) -> list[CpeEntry]:
    """Parse vendor/product pairs out of an NVD document's "cpes" section."""
    entries: list[CpeEntry] = []
    seen: set[CpeEntry] = set()
    for line in document.raw_fields.get("cpes", "").splitlines():
        parts = line.strip().split(":")
        if len(parts) < 5 or parts[0] != "cpe":
            continue
        entry = CpeEntry(vendor=parts[3].lower(), product=parts[4].lower())
        if entry.vendor and entry.product and entry not in seen:
            seen.add(entry)
            entries.append(entry)
    return entries


def fetch_debian_advisory(
    cve_id: str, policy: TransportPolicy | Transport
) -> AdvisoryDocument | None:
    """Fetch the CVE's notes from the Debian security-tracker data file.

    The file is line-oriented: unindented ``CVE-...`` header lines start an
    entry; indented ``NOTE:`` lines carry its notes. Returns None when the
    tracker has no entry for the CVE.
    """
    cve_id = validate_cve_id(cve_id)
    transport = as_transport(policy)
    response = transport.get(DEBIAN_LIST_URL)
    if response.status != 200:
        raise ParseError(f"Debian tracker list returned HTTP {response.status}")
    notes: list[str] = []
    in_entry = False
    for line in response.text.splitlines():
        if line and not line[0].isspace():
            if in_entry:
                break
            in_entry = line.split(" ", 1)[0].split("\t", 1)[0] == cve_id
            continue
        if in_entry:
            stripped = line.strip()
            if stripped.startswith("NOTE:"):
                notes.append(stripped[len("NOTE:") :].strip())
    if not in_entry:
        return None
    return AdvisoryDocument(
        source=SourceId.DEBIAN,
        cve_id=cve_id,
        raw_fields={"Notes": "\n".join(notes)},
        fetched_at=int(time.time()),
    )


def fetch_redhat_advisory(
    cve_id: str, policy: TransportPolicy | Transport
) -> AdvisoryDocument | None:
    """Fetch the concatenated Bugzilla comments for the CVE's Red Hat bugs.

    Returns None when Red Hat does not track the CVE. A tracked bug with no
    comments yields a document with an empty "comments" section.
    """
    cve_id = validate_cve_id(cve_id)
    transport = as_transport(policy)
    response = transport.get(redhat_bug_lookup_url(cve_id))
    if response.status != 200:
        raise ParseError(f"Red Hat bug lookup returned HTTP {response.status}")
    try:
        bug_ids = sorted(int(bug["id"]) for bug in response.json().get("bugs", []))
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ParseError(f"malformed Red Hat bug lookup response: {exc}") from exc
    if not bug_ids:
        return None

    comment_texts: list[str] = []
    for bug_id in bug_ids:
        comments_response = transport.get(redhat_comments_url(bug_id))
        if comments_response.status != 200:
            raise ParseError(
                f"Red Hat comments for bug {bug_id} returned HTTP "
                f"{comments_response.status}"
            )
        try:
            payload = comments_response.json()["bugs"][str(bug_id)]["comments"]
            comment_texts.extend(comment.get("text", "") for comment in payload)
        except (KeyError, TypeError, AttributeError) as exc:
            raise ParseError(f"malformed Red Hat comments for bug {bug_id}") from exc
    return AdvisoryDocument(
        source=SourceId.REDHAT,
        cve_id=cve_id,
        raw_fields={"comments": "\n\n".join(comment_texts)},
        fetched_at=int(time.time()),
    )
