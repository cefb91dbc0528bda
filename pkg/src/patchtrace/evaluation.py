"""Equivalence-aware scoring against ground truth, and experiment driving.

Ground truth per CVE is a list of equivalence classes of patch commits plus
a mapping-cardinality label. A predicted commit is a true positive when it
belongs to any class. Recall counts covered classes, except for MEP entries
(mutually substitutable alternatives) where covering any single alternative
is full recall.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from statistics import mean

from .errors import EmptyTruthError, ParseError
from .models import SourceId, sha_equal
from .report import RunConfig, TraceReport, trace_once
from .selection import ConnectivityVariant
from .transport import Transport
from .urls import normalize_url, parse_github_commit_url


class Cardinality(str, Enum):
    SP = "SP"  # one-to-one
    MEP = "MEP"  # one-to-some: equivalent alternative patch sets
    MP = "MP"  # multiple commits, one branch
    MB = "MB"  # multiple branches
    MR = "MR"  # multiple repositories


def canonical_patch_id(raw: str) -> str:
    """Canonical, comparison-ready form of a commit URL or bare id."""
    text = raw.strip()
    if "://" in text:
        normalized = normalize_url(text)
        github = parse_github_commit_url(normalized)
        if github:
            owner, repo, sha = github
            return f"github.com/{owner.lower()}/{repo.lower()}/commit/{sha}"
        return normalized
    return text.lower()


_CANONICAL_COMMIT = re.compile(r"^(github\.com/[^/]+/[^/]+/commit/)([0-9a-f]{7,40})$")


def patch_ids_equal(a: str, b: str) -> bool:
    """Canonical equality with hex-prefix tolerance for same-repo commits."""
    ca, cb = canonical_patch_id(a), canonical_patch_id(b)
    if ca == cb:
        return True
    ma, mb = _CANONICAL_COMMIT.match(ca), _CANONICAL_COMMIT.match(cb)
    if ma and mb and ma.group(1) == mb.group(1):
        return sha_equal(ma.group(2), mb.group(2))
    return False


@dataclass(frozen=True)
class GroundTruthEntry:
    cve_id: str
    cardinality: Cardinality
    equivalence_classes: tuple[frozenset[str], ...]

    def __post_init__(self) -> None:
        if not self.equivalence_classes:
            raise EmptyTruthError(f"{self.cve_id}: no equivalence classes")
        if self.cardinality is Cardinality.MEP and len(self.equivalence_classes) < 2:
            raise ParseError(f"{self.cve_id}: MEP entries need >= 2 alternatives")
        flat: list[str] = []
        for cls_members in self.equivalence_classes:
            if not cls_members:
                raise EmptyTruthError(f"{self.cve_id}: empty equivalence class")
            flat.extend(cls_members)
        for i, member in enumerate(flat):
            for other in flat[i + 1 :]:
                if patch_ids_equal(member, other):
                    raise ParseError(
                        f"{self.cve_id}: equivalence classes overlap on {member}"
                    )


@dataclass
class ScoreRow:
    cve_id: str
    true_positives: int = 0
    false_positives: int = 0
    false_negatives: int = 0
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0
    not_found: bool = False
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "cve_id": self.cve_id,
            "tp": self.true_positives,
            "fp": self.false_positives,
            "fn": self.false_negatives,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "not_found": self.not_found,
            "note": self.note,
        }


def score_cve(predicted: set[str], truth: GroundTruthEntry) -> ScoreRow:
    """Score one CVE's predictions against its ground-truth entry."""
    if not truth.equivalence_classes:
        raise EmptyTruthError(truth.cve_id)
    canonical_predictions: list[str] = []
    for raw in predicted:
        canon = canonical_patch_id(raw)
        if not any(patch_ids_equal(canon, seen) for seen in canonical_predictions):
            canonical_predictions.append(canon)
    if not canonical_predictions:
        return ScoreRow(
            cve_id=truth.cve_id,
            false_negatives=(
                1
                if truth.cardinality is Cardinality.MEP
                else len(truth.equivalence_classes)
            ),
            not_found=True,
        )

    def in_class(prediction: str, members: frozenset[str]) -> bool:
        return any(patch_ids_equal(prediction, member) for member in members)

    tp = sum(
        1
        for prediction in canonical_predictions
        if any(in_class(prediction, cls) for cls in truth.equivalence_classes)
    )
    fp = len(canonical_predictions) - tp
    covered = sum(
        1
        for cls in truth.equivalence_classes
        if any(in_class(prediction, cls) for prediction in canonical_predictions)
    )
    if truth.cardinality is Cardinality.MEP:
        recall = 1.0 if covered else 0.0
        fn = 0 if covered else 1
    else:
        recall = covered / len(truth.equivalence_classes)
        fn = len(truth.equivalence_classes) - covered
    precision = tp / len(canonical_predictions)
    f1 = (
        2 * precision * recall / (precision + recall)
        if (precision + recall) > 0
        else 0.0
    )
    return ScoreRow(
        cve_id=truth.cve_id,
        true_positives=tp,
        false_positives=fp,
        false_negatives=fn,
        precision=precision,
        recall=recall,
        f1=f1,
    )


@dataclass
class AggregateLine:
    label: str
    count: int
    not_found: int
    precision: float | None
    recall: float | None
    f1: float | None

    @property
    def not_found_pct(self) -> float:
        return 100.0 * self.not_found / self.count if self.count else 0.0

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "count": self.count,
            "not_found": self.not_found,
            "not_found_pct": self.not_found_pct,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


@dataclass
class AggregateTable:
    lines: list[AggregateLine]

    def line(self, label: str) -> AggregateLine | None:
        for line in self.lines:
            if line.label == label:
                return line
        return None

    def to_dict(self) -> dict:
        return {"lines": [line.to_dict() for line in self.lines]}

    def to_text(self) -> str:
        def fmt(value: float | None) -> str:
            return f"{value:.3f}" if value is not None else "-"

        header = (
            f"{'Cardinality':<12}{'Number':>7}  {'Not Found':>16}"
            f"  {'Pre.':>6}  {'Rec.':>6}  {'F1':>6}"
        )
        rows = [header, "-" * len(header)]
        for line in self.lines:
            nf = f"{line.not_found} ({line.not_found_pct:.1f}%)"
            rows.append(
                f"{line.label:<12}{line.count:>7}  {nf:>16}"
                f"  {fmt(line.precision):>6}  {fmt(line.recall):>6}  {fmt(line.f1):>6}"
            )
        return "\n".join(rows)


def aggregate(rows: list[ScoreRow], truths: list[GroundTruthEntry]) -> AggregateTable:
    """Per-cardinality and total macro averages over CVEs with predictions."""
    truth_by_cve = {t.cve_id: t for t in truths}
    lines: list[AggregateLine] = []
    groups: dict[str, list[ScoreRow]] = {c.value: [] for c in Cardinality}
    for row in rows:
        truth = truth_by_cve.get(row.cve_id)
        if truth is None:
            raise ParseError(f"no ground truth aligned with score row {row.cve_id}")
        groups[truth.cardinality.value].append(row)

    def build(label: str, members: list[ScoreRow]) -> AggregateLine:
        found = [r for r in members if not r.not_found]
        return AggregateLine(
            label=label,
            count=len(members),
            not_found=len(members) - len(found),
            precision=mean(r.precision for r in found) if found else None,
            recall=mean(r.recall for r in found) if found else None,
            f1=mean(r.f1 for r in found) if found else None,
        )

    for cardinality in Cardinality:
        members = groups[cardinality.value]
        if members:
            lines.append(build(cardinality.value, members))
    lines.append(build("Total", rows))
    return AggregateTable(lines=lines)


_CLASS_GROUP = re.compile(r"\{([^{}]*)\}")


GROUND_TRUTH_SCHEMA = "ground-truth@1"


def load_ground_truth(path: Path | str) -> list[GroundTruthEntry]:
    """Parse the line-oriented ground-truth file (format ground-truth@1).

    Each record: ``<cve id> <cardinality> {url,url} | {url} | ...``
    Blank lines and ``#`` comments are skipped; ids are normalized on load.
    """
    entries: list[GroundTruthEntry] = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(None, 2)
        if len(parts) < 3:
            raise ParseError(f"{path}:{lineno}: expected 'CVE TAG {{...}}' record")
        cve_id, tag, rest = parts
        try:
            cardinality = Cardinality(tag)
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: unknown cardinality {tag!r}") from exc
        groups = _CLASS_GROUP.findall(rest)
        if not groups:
            raise ParseError(f"{path}:{lineno}: no equivalence classes found")
        classes = tuple(
            frozenset(
                canonical_patch_id(member)
                for member in (m.strip() for m in group.split(","))
                if member
            )
            for group in groups
        )
        entries.append(
            GroundTruthEntry(
                cve_id=cve_id, cardinality=cardinality, equivalence_classes=classes
            )
        )
    return entries


@dataclass
class VariantSpec:
    name: str
    config: RunConfig


@dataclass
class VariantResult:
    name: str
    config: dict
    rows: list[ScoreRow]
    table: AggregateTable

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "config": self.config,
            "rows": [r.to_dict() for r in self.rows],
            "table": self.table.to_dict(),
        }


EXPERIMENT_SCHEMA = "experiment@1"


@dataclass
class ExperimentReport:
    results: list[VariantResult] = field(default_factory=list)

    def result(self, name: str) -> VariantResult | None:
        for result in self.results:
            if result.name == name:
                return result
        return None

    def to_dict(self) -> dict:
        return {
            "schema": EXPERIMENT_SCHEMA,
            "variants": [r.to_dict() for r in self.results],
        }

    def to_text(self) -> str:
        blocks = []
        for result in self.results:
            blocks.append(f"== {result.name} ==\n{result.table.to_text()}")
        return "\n\n".join(blocks) + "\n"


def standard_variant_grid(base: RunConfig) -> list[VariantSpec]:
    """Default run plus source/selection/expansion ablations and both sweeps."""
    variants = [VariantSpec("default", base)]
    for source in SourceId:
        variants.append(
            VariantSpec(
                f"no-{source.value}",
                replace(base, sources=base.sources - {source}),
            )
        )
    variants.append(VariantSpec("flat", replace(base, flat=True)))
    variants.append(VariantSpec("select-all", replace(base, select_all=True)))
    variants.append(
        VariantSpec("no-connectivity", replace(base, use_connectivity=False))
    )
    variants.append(VariantSpec("no-confidence", replace(base, use_confidence=False)))
    variants.append(
        VariantSpec(
            "path-length",
            replace(base, connectivity_variant=ConnectivityVariant.PATH_LENGTH_ONLY),
        )
    )
    variants.append(
        VariantSpec(
            "path-number",
            replace(base, connectivity_variant=ConnectivityVariant.PATH_NUMBER_ONLY),
        )
    )
    variants.append(VariantSpec("no-expansion", replace(base, expansion=False)))
    for depth in range(3, 7):
        variants.append(VariantSpec(f"depth-{depth}", replace(base, depth_limit=depth)))
    for span in range(0, 61, 10):
        variants.append(VariantSpec(f"span-{span}", replace(base, span_days=span)))
    return variants


def run_experiment(
    dataset: list[GroundTruthEntry],
    base_config: RunConfig,
    variants: list[VariantSpec] | None = None,
    transport: Transport | None = None,
) -> ExperimentReport:
    """Run the full pipeline per CVE per variant and aggregate each table.

    Per-CVE failures are recorded as not-found rows with a note; the
    experiment always completes.
    """
    if variants is None:
        variants = standard_variant_grid(base_config)
    experiment = ExperimentReport()
    for variant in variants:
        rows: list[ScoreRow] = []
        for truth in dataset:
            try:
                report: TraceReport = trace_once(
                    truth.cve_id, variant.config, transport
                )
                predicted = set(report.patch_ids())
            except Exception as exc:  # per-CVE failures never abort the sweep
                rows.append(
                    ScoreRow(
                        cve_id=truth.cve_id,
                        not_found=True,
                        false_negatives=len(truth.equivalence_classes),
                        note=f"trace failed: {exc}",
                    )
                )
                continue
            rows.append(score_cve(predicted, truth))
        experiment.results.append(
            VariantResult(
                name=variant.name,
                config=variant.config.to_dict(),
                rows=rows,
                table=aggregate(rows, dataset),
            )
        )
    return experiment
