"""Remediation knowledge base and class-aware suggestion ranking.

An entry's rank against a prediction is the product of three independent
signals so each stays auditable in the report:

    score = (sum of probabilities of its applicable classes)
            * base_rank * (feedback_score / 3)

feedback_score is a running mean over analyst ratings, seeded with one
pseudo-rating of 3 so fresh entries start neutral instead of extreme.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

from .flows import CLASS_ORDER, ClassLabel
from .nnet import ClassDistribution

KB_FORMAT_VERSION = "1"
NEUTRAL_FEEDBACK = 3.0


class KnowledgeBaseError(Exception):
    pass


class UnknownRecommendationError(KnowledgeBaseError):
    pass


@dataclass(frozen=True)
class RemediationEntry:
    recommendation_id: str
    title: str
    detail: str
    level: str                      # hardware | software | organizational
    applicable_classes: frozenset[ClassLabel]
    base_rank: float = 0.5
    feedback_score: float = NEUTRAL_FEEDBACK
    rating_count: int = 0           # real ratings folded into feedback_score
    links: tuple[str, ...] = ()

    def __post_init__(self):
        if self.level not in ("hardware", "software", "organizational"):
            raise ValueError(f"unknown level {self.level!r}")
        if not self.applicable_classes:
            raise ValueError("applicable_classes must be non-empty")
        if not (0.0 <= self.base_rank <= 1.0):
            raise ValueError(f"base_rank {self.base_rank} outside [0,1]")
        if not (1.0 <= self.feedback_score <= 5.0):
            raise ValueError(f"feedback_score {self.feedback_score} outside [1,5]")


@dataclass(frozen=True)
class KnowledgeBase:
    entries: tuple[RemediationEntry, ...]
    version: str = KB_FORMAT_VERSION

    def __post_init__(self):
        ids = [e.recommendation_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise KnowledgeBaseError("recommendation ids must be unique")
        if self.entries:
            for label in CLASS_ORDER:
                if not any(label in e.applicable_classes for e in self.entries):
                    raise KnowledgeBaseError(f"no entry covers class {label.value}")

    def get(self, recommendation_id: str) -> RemediationEntry:
        for entry in self.entries:
            if entry.recommendation_id == recommendation_id:
                return entry
        raise UnknownRecommendationError(f"unknown recommendation {recommendation_id!r}")

    def ids(self) -> set[str]:
        return {e.recommendation_id for e in self.entries}


def suggestion_score(entry: RemediationEntry, dist: ClassDistribution) -> float:
    affinity = sum(dist.prob_of(label) for label in entry.applicable_classes)
    return affinity * entry.base_rank * (entry.feedback_score / NEUTRAL_FEEDBACK)


def suggest(
    dist: ClassDistribution,
    kb: KnowledgeBase,
    top_n: int = 5,
) -> list[tuple[RemediationEntry, float]]:
    """Rank entries for a prediction; deterministic ties by id."""
    if not kb.entries:
        raise KnowledgeBaseError("knowledge base has no entries")
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    scored = [(entry, suggestion_score(entry, dist)) for entry in kb.entries]
    scored.sort(key=lambda pair: (-pair[1], pair[0].recommendation_id))
    return scored[:top_n]


def apply_rating(kb: KnowledgeBase, recommendation_id: str, score: int) -> KnowledgeBase:
    """Fold one rating into the entry's running mean (pseudo-rating of 3
    counts as the first observation)."""
    if not (1 <= score <= 5):
        raise ValueError(f"score must be 1..5, got {score}")
    entry = kb.get(recommendation_id)
    observations = entry.rating_count + 1  # + the neutral pseudo-rating
    new_mean = (entry.feedback_score * observations + score) / (observations + 1)
    updated = replace(entry, feedback_score=new_mean, rating_count=entry.rating_count + 1)
    entries = tuple(updated if e.recommendation_id == recommendation_id else e for e in kb.entries)
    return KnowledgeBase(entries, kb.version)


# --- shipped defaults -------------------------------------------------------

_N = ClassLabel.NORMAL_TRAFFIC
_S = ClassLabel.SERVICE_INCIDENT
_D = ClassLabel.DOS_ATTACK


def default_knowledge_base() -> KnowledgeBase:
    entries = (
        RemediationEntry(
            "dos-blacklist-sources", "Temporarily blacklist attacking addresses",
            "Add temporary block rules for the flooding source addresses at the "
            "perimeter firewall and review them once the flood subsides.",
            "software", frozenset({_D}), base_rank=0.95,
        ),
        RemediationEntry(
            "dos-notify-provider", "Notify the upstream service provider",
            "Report the flood to the upstream provider so filtering can move "
            "closer to the sources; share the blocked address list.",
            "organizational", frozenset({_D}), base_rank=0.9,
        ),
        RemediationEntry(
            "dos-rate-limit", "Enable rate limiting on exposed services",
            "Apply connection and request rate limits on the targeted service "
            "and drop half-open connections aggressively.",
            "software", frozenset({_D}), base_rank=0.8,
        ),
        RemediationEntry(
            "dos-capacity-failover", "Shift load to standby capacity",
            "Move the targeted service behind additional capacity or a "
            "scrubbing path until the flood ends.",
            "hardware", frozenset({_D}), base_rank=0.6,
        ),
        RemediationEntry(
            "svc-reboot-server", "Reboot the affected servers",
            "Restart the machines hosting the degraded service after capturing "
            "their state for later review.",
            "hardware", frozenset({_S}), base_rank=0.85,
        ),
        RemediationEntry(
            "svc-restart-service", "Restart the failing service processes",
            "Restart the web or application service daemons and confirm they "
            "bind their listeners again.",
            "software", frozenset({_S}), base_rank=0.9,
        ),
        RemediationEntry(
            "svc-inspect-logs", "Inspect service and system logs",
            "Review application and system logs around the failure window to "
            "identify crashes, resource exhaustion, or misconfiguration.",
            "software", frozenset({_S}), base_rank=0.7,
        ),
        RemediationEntry(
            "svc-failover", "Fail over to the standby instance",
            "Switch traffic to the standby instance while the primary is "
            "investigated.",
            "hardware", frozenset({_S}), base_rank=0.6,
        ),
        RemediationEntry(
            "gen-firewall-review", "Review firewall rulesets",
            "Check recent ruleset changes and confirm the active policy still "
            "matches the intended one.",
            "software", frozenset({_S, _D}), base_rank=0.5,
        ),
        RemediationEntry(
            "gen-document-incident", "Document the event and decisions",
            "Record what was observed, who acted, and which measures were "
            "taken; this is the first artifact for any later review.",
            "organizational", frozenset({_N, _S, _D}), base_rank=0.35,
        ),
        RemediationEntry(
            "gen-notify-stakeholders", "Brief the responsible managers",
            "Summarize impact and next steps for the management level in "
            "non-technical terms.",
            "organizational", frozenset({_S, _D}), base_rank=0.4,
        ),
        RemediationEntry(
            "normal-no-action", "No action required",
            "The observed activity matches ordinary usage; keep monitoring.",
            "organizational", frozenset({_N}), base_rank=0.9,
        ),
        RemediationEntry(
            "normal-baseline-update", "Fold the sample into the baseline",
            "Confirm the classification and let the observation strengthen "
            "the model baseline.",
            "software", frozenset({_N}), base_rank=0.6,
        ),
        RemediationEntry(
            "normal-close-ticket", "Close the event as routine",
            "Close the event with a short note so the record stays complete.",
            "organizational", frozenset({_N}), base_rank=0.5,
        ),
    )
    return KnowledgeBase(entries, KB_FORMAT_VERSION)


# --- persistence (human-editable JSON, schema in docs/knowledge-base.md) ----


def save_knowledge_base(kb: KnowledgeBase, path) -> None:
    doc = {
        "format_version": kb.version,
        "entries": [
            {
                "recommendation_id": e.recommendation_id,
                "title": e.title,
                "detail": e.detail,
                "level": e.level,
                "applicable_classes": sorted(c.value for c in e.applicable_classes),
                "base_rank": e.base_rank,
                "feedback_score": e.feedback_score,
                "rating_count": e.rating_count,
                "links": list(e.links),
            }
            for e in kb.entries
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_knowledge_base(path) -> KnowledgeBase:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    entries = tuple(
        RemediationEntry(
            recommendation_id=e["recommendation_id"],
            title=e["title"],
            detail=e["detail"],
            level=e["level"],
            applicable_classes=frozenset(ClassLabel.from_name(c) for c in e["applicable_classes"]),
            base_rank=float(e["base_rank"]),
            feedback_score=float(e.get("feedback_score", NEUTRAL_FEEDBACK)),
            rating_count=int(e.get("rating_count", 0)),
            links=tuple(e.get("links", ())),
        )
        for e in doc["entries"]
    )
    return KnowledgeBase(entries, str(doc.get("format_version", KB_FORMAT_VERSION)))
