"""patchtrace: trace security patch commits for CVEs across advisory sources."""

__version__ = "0.1.0"
