"""Incident reports: probable causes, ranked measures, and a plain summary.

Reports render to two deterministic byte formats: a structured document
(canonical JSON, parseable back into a field-equal report) and printable
HTML for handing to non-technical readers. The management summary is
deliberately free of raw flow attribute names; a test enforces that.
"""

from __future__ import annotations

import html
import json
from dataclasses import dataclass
from datetime import datetime
from typing import Sequence

from .flows import CLASS_ORDER, ClassLabel
from .knowledge import RemediationEntry
from .nnet import ClassDistribution

MIN_CAUSE_PROBABILITY = 0.01

RENDER_FORMATS = ("structured_text", "html")


class ReportError(Exception):
    pass


@dataclass(frozen=True)
class CauseBlock:
    label: ClassLabel
    probability: float
    narrative: str


@dataclass(frozen=True)
class IncidentReport:
    incident_id: str
    created_at: datetime
    flows_covered: tuple[int, ...]
    distribution: ClassDistribution
    probable_causes: tuple[CauseBlock, ...]
    recommendations: tuple[tuple[RemediationEntry, float], ...]
    management_summary: str
    model_version: str
    kb_version: str

    def __post_init__(self):
        probs = [c.probability for c in self.probable_causes]
        if any(probs[i] < probs[i + 1] for i in range(len(probs) - 1)):
            raise ReportError("probable causes must be ordered by descending probability")


_CAUSE_NARRATIVES = {
    ClassLabel.NORMAL_TRAFFIC:
        "The observed flows match the learned profile of ordinary usage: "
        "balanced exchanges at routine volume against the usual endpoints. "
        "Nothing in the analyzed attributes points at a fault or an attack.",
    ClassLabel.SERVICE_INCIDENT:
        "The flows resemble clients repeatedly failing to reach a service: "
        "connections are attempted but answered slowly, reset, or not at "
        "all, which is the typical shape of a degraded or crashed service "
        "rather than hostile activity.",
    ClassLabel.DOS_ATTACK:
        "The flows carry the signature of a deliberate flood: extremely "
        "one-sided traffic at rates far above normal use, concentrated on "
        "one target, consistent with a denial-of-service attempt.",
}

_MANAGEMENT_SUMMARIES = {
    ClassLabel.NORMAL_TRAFFIC:
        "The analyzed activity looks like ordinary usage of our systems. "
        "No action is required; monitoring continues as usual.",
    ClassLabel.SERVICE_INCIDENT:
        "One of our services appears degraded or unavailable; users are "
        "likely affected. This points to an internal fault, not an attack. "
        "The technical team should restore the service (restart or fail "
        "over) and confirm with users that access is back.",
    ClassLabel.DOS_ATTACK:
        "Our systems appear to be under a deliberate overload attack that "
        "can make services unreachable for customers. The technical team "
        "should temporarily block the attacking addresses and involve the "
        "internet provider. A short outage is possible while the attack is "
        "being contained.",
}


@dataclass(frozen=True)
class ReportMetadata:
    incident_id: str
    created_at: datetime
    flows_covered: tuple[int, ...]
    model_version: str = ""
    kb_version: str = ""


def generate_report(
    dist: ClassDistribution,
    suggestions: Sequence[tuple[RemediationEntry, float]],
    metadata: ReportMetadata,
) -> IncidentReport:
    """Deterministic report for one prediction.

    A cause block appears for every class with probability >= 0.01,
    highest first; probabilities are copied verbatim from the
    distribution. The management summary follows the predicted class.
    """
    causes = [
        CauseBlock(label, dist.prob_of(label), _CAUSE_NARRATIVES[label])
        for label in CLASS_ORDER
        if dist.prob_of(label) >= MIN_CAUSE_PROBABILITY
    ]
    causes.sort(key=lambda c: (-c.probability, c.label.index))
    return IncidentReport(
        incident_id=metadata.incident_id,
        created_at=metadata.created_at,
        flows_covered=tuple(metadata.flows_covered),
        distribution=dist,
        probable_causes=tuple(causes),
        recommendations=tuple(suggestions),
        management_summary=_MANAGEMENT_SUMMARIES[dist.predicted],
        model_version=metadata.model_version,
        kb_version=metadata.kb_version,
    )


# --- structured_text (canonical JSON) ---------------------------------------


def _entry_to_dict(entry: RemediationEntry) -> dict:
    return {
        "recommendation_id": entry.recommendation_id,
        "title": entry.title,
        "detail": entry.detail,
        "level": entry.level,
        "applicable_classes": sorted(c.value for c in entry.applicable_classes),
        "base_rank": entry.base_rank,
        "feedback_score": entry.feedback_score,
        "rating_count": entry.rating_count,
        "links": list(entry.links),
    }


def _entry_from_dict(doc: dict) -> RemediationEntry:
    return RemediationEntry(
        recommendation_id=doc["recommendation_id"],
        title=doc["title"],
        detail=doc["detail"],
        level=doc["level"],
        applicable_classes=frozenset(ClassLabel.from_name(c) for c in doc["applicable_classes"]),
        base_rank=float(doc["base_rank"]),
        feedback_score=float(doc["feedback_score"]),
        rating_count=int(doc["rating_count"]),
        links=tuple(doc["links"]),
    )


def report_to_dict(report: IncidentReport) -> dict:
    return {
        "incident_id": report.incident_id,
        "created_at": report.created_at.isoformat(),
        "flows_covered": list(report.flows_covered),
        "distribution": {
            "probs": list(report.distribution.probs),
            "predicted": report.distribution.predicted.value,
        },
        "probable_causes": [
            {"class": c.label.value, "probability": c.probability, "narrative": c.narrative}
            for c in report.probable_causes
        ],
        "recommendations": [
            {"entry": _entry_to_dict(entry), "score": score}
            for entry, score in report.recommendations
        ],
        "management_summary": report.management_summary,
        "model_version": report.model_version,
        "kb_version": report.kb_version,
    }


def report_from_dict(doc: dict) -> IncidentReport:
    dist = ClassDistribution(
        tuple(float(p) for p in doc["distribution"]["probs"]),
        ClassLabel.from_name(doc["distribution"]["predicted"]),
    )
    return IncidentReport(
        incident_id=doc["incident_id"],
        created_at=datetime.fromisoformat(doc["created_at"]),
        flows_covered=tuple(int(i) for i in doc["flows_covered"]),
        distribution=dist,
        probable_causes=tuple(
            CauseBlock(ClassLabel.from_name(c["class"]), float(c["probability"]), c["narrative"])
            for c in doc["probable_causes"]
        ),
        recommendations=tuple(
            (_entry_from_dict(r["entry"]), float(r["score"]))
            for r in doc["recommendations"]
        ),
        management_summary=doc["management_summary"],
        model_version=doc["model_version"],
        kb_version=doc["kb_version"],
    )


def parse_report(data: bytes | str) -> IncidentReport:
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    return report_from_dict(json.loads(text))


# --- rendering ---------------------------------------------------------------


def _render_html(report: IncidentReport) -> str:
    esc = html.escape
    rows = []
    for cause in report.probable_causes:
        rows.append(
            f"<tr><td>{esc(cause.label.value)}</td>"
            f"<td>{cause.probability * 100:.2f}%</td></tr>"
        )
    cause_sections = []
    for cause in report.probable_causes:
        cause_sections.append(
            f'<section class="cause"><h3>{esc(cause.label.value)} '
            f"({cause.probability * 100:.2f}%)</h3>"
            f"<p>{esc(cause.narrative)}</p></section>"
        )
    measures = []
    for entry, score in report.recommendations:
        measures.append(
            f'<li class="measure" data-level="{esc(entry.level)}">'
            f"<strong>{esc(entry.title)}</strong> "
            f'<span class="score">(rank {score:.4f}, {esc(entry.level)} level)</span>'
            f"<p>{esc(entry.detail)}</p></li>"
        )
    flows = ", ".join(str(i) for i in report.flows_covered)
    return (
        "<!DOCTYPE html>\n"
        '<html lang="en"><head><meta charset="utf-8"/>'
        f"<title>Incident {esc(report.incident_id)}</title>"
        "<style>body{font-family:sans-serif;margin:2em;}"
        "table{border-collapse:collapse;}td,th{border:1px solid #999;padding:4px 8px;}"
        ".summary{background:#f4f4f4;padding:1em;border-left:4px solid #555;}"
        "@media print{.noprint{display:none;}}</style></head><body>"
        f"<h1>Incident report {esc(report.incident_id)}</h1>"
        f"<p>Created {esc(report.created_at.isoformat())} &#183; "
        f"flows {esc(flows)} &#183; model {esc(report.model_version[:12])} &#183; "
        f"knowledge base v{esc(report.kb_version)}</p>"
        '<section class="summary"><h2>Management summary</h2>'
        f"<p>{esc(report.management_summary)}</p></section>"
        "<h2>Possible causes</h2>"
        f"<table><tr><th>cause</th><th>probability</th></tr>{''.join(rows)}</table>"
        f"{''.join(cause_sections)}"
        "<h2>Recommended measures</h2>"
        f"<ol>{''.join(measures)}</ol>"
        "</body></html>"
    )


def render(report: IncidentReport, format: str) -> bytes:
    """Stable bytes per (report, format); formats: structured_text, html."""
    if format == "structured_text":
        return json.dumps(report_to_dict(report), sort_keys=True, indent=1).encode("utf-8")
    if format == "html":
        return _render_html(report).encode("utf-8")
    raise ReportError(f"unknown render format {format!r}")
