"""Exception hierarchy shared across the package."""

from __future__ import annotations


class PatchTraceError(Exception):
    """Base class for all patchtrace errors."""


class InvalidCveId(PatchTraceError, ValueError):
    """The supplied string is not a syntactically valid CVE identifier."""


class TransportError(PatchTraceError):
    """Network failure, replay miss, or any other transport-level problem."""


class RateLimitedError(TransportError):
    """The remote host rate-limited us and retries were exhausted. Retriable."""


class NotFoundError(PatchTraceError):
    """The requested resource exists as a concept but the remote has no entry."""


class ParseError(PatchTraceError):
    """A fetched document could not be parsed into the expected structure."""


class UnsupportedPlatformError(PatchTraceError):
    """Commit hosted on a platform we have no adapter for (recorded, not fetched)."""


class SourceUnavailableError(PatchTraceError):
    """One advisory source failed; the build continues without it."""

    def __init__(self, source: str, message: str) -> None:
        super().__init__(f"{source}: {message}")
        self.source = source


class EmptyNetworkError(PatchTraceError):
    """No advisory source yielded any reference for the CVE."""

    def __init__(self, cve_id: str, network: object = None) -> None:
        super().__init__(f"no source yielded any reference for {cve_id}")
        self.cve_id = cve_id
        self.network = network


class UnknownNodeError(PatchTraceError):
    """A node id was requested that is not part of the network."""


class UnknownReportError(PatchTraceError):
    """The report store has no report for the requested CVE."""


class EmptyTruthError(PatchTraceError):
    """A ground-truth entry has no equivalence classes."""


class StoreError(PatchTraceError):
    """The report store could not read or write a report."""
