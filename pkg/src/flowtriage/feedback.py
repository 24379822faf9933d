"""Analyst ratings, training-set custody, and the retrain fallback.

The store keeps an immutable original dataset plus an ordered chain of
feedback-derived incremental datasets, each guarded by a content hash.
Before any training run the sets are integrity-checked: a missing or
corrupt incremental drops the run into retrain mode (full original set,
fresh parameters), while a missing or corrupt original is unrecoverable.

Ratings become new weighted samples rather than edits: a score of 3 is
neutral (weight 1.0), 5 emphasizes (5/3), 1 de-emphasizes (1/3). The
original set is never touched, which is what makes the fallback safe.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace
from datetime import datetime
from enum import Enum
from pathlib import Path

from .etl import (
    dataset_checksum,
    deserialize_dataset,
    serialize_dataset,
)
from .flows import ClassLabel, Dataset, FeatureVector, Provenance
from .nnet import Network, TrainConfig, TrainReport, init_network, train

MANIFEST_NAME = "manifest.json"
ORIGINAL_NAME = "original.ds"
INCREMENTAL_DIR = "incrementals"
RATINGS_NAME = "ratings.jsonl"
REGISTRY_NAME = "registry.tsv"
STORE_VERSION = 1

NEUTRAL_SCORE = 3


class StoreStatus(Enum):
    INTACT = "intact"
    INCREMENTAL_MISSING = "incremental_missing"
    ORIGINAL_MISSING = "original_missing"


class FeedbackError(Exception):
    pass


class RatingValidationError(FeedbackError):
    pass


class DanglingReferenceError(FeedbackError):
    """The rating points at an unknown incident, recommendation, or flow."""


class UnrecoverableStoreError(FeedbackError):
    """The original training set is gone or corrupt; no fallback exists."""

    status = StoreStatus.ORIGINAL_MISSING


@dataclass(frozen=True)
class Rating:
    """One analyst judgement of a suggested remediation."""

    incident_id: str
    flow_index: int
    recommendation_id: str
    rated_class: ClassLabel
    score: int
    timestamp: datetime
    note: str = ""

    def __post_init__(self):
        if not (1 <= self.score <= 5):
            raise RatingValidationError(f"score must be 1..5, got {self.score}")
        if self.timestamp.tzinfo is None:
            raise RatingValidationError("timestamp must be timezone-aware (UTC)")

    @property
    def dedup_key(self) -> tuple[str, str, str]:
        return (self.incident_id, self.recommendation_id, self.timestamp.isoformat())

    def to_json(self) -> str:
        return json.dumps({
            "incident_id": self.incident_id,
            "flow_index": self.flow_index,
            "recommendation_id": self.recommendation_id,
            "rated_class": self.rated_class.value,
            "score": self.score,
            "timestamp": self.timestamp.isoformat(),
            "note": self.note,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Rating":
        doc = json.loads(text)
        return cls(
            incident_id=doc["incident_id"],
            flow_index=int(doc["flow_index"]),
            recommendation_id=doc["recommendation_id"],
            rated_class=ClassLabel.from_name(doc["rated_class"]),
            score=int(doc["score"]),
            timestamp=datetime.fromisoformat(doc["timestamp"]),
            note=doc.get("note", ""),
        )


def rating_weight(score: int) -> float:
    """score/3: the neutral midpoint keeps unit weight."""
    return score / NEUTRAL_SCORE


def _atomic_write(path: Path, text: str) -> None:
    # replace() keeps concurrent readers from ever seeing a torn file
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


class TrainingStore:
    """Directory-backed custody of the original and incremental sets.

    Writes are serialized by the caller (the service holds one writer);
    reads only touch immutable files.
    """

    def __init__(self, root: Path):
        self.root = Path(root)

    # --- creation / loading -------------------------------------------

    @classmethod
    def create(cls, root, original: Dataset) -> "TrainingStore":
        root = Path(root)
        root.mkdir(parents=True, exist_ok=True)
        (root / INCREMENTAL_DIR).mkdir(exist_ok=True)
        store = cls(root)
        text = serialize_dataset(original)
        (root / ORIGINAL_NAME).write_text(text, encoding="utf-8")
        manifest = {
            "version": STORE_VERSION,
            "original": {"file": ORIGINAL_NAME, "sha256": dataset_checksum(text)},
            "incrementals": [],
        }
        store._write_manifest(manifest)
        (root / RATINGS_NAME).touch()
        (root / REGISTRY_NAME).touch()
        return store

    def _manifest(self) -> dict:
        path = self.root / MANIFEST_NAME
        if not path.exists():
            raise UnrecoverableStoreError(f"store manifest missing at {path}")
        return json.loads(path.read_text(encoding="utf-8"))

    def _write_manifest(self, manifest: dict) -> None:
        _atomic_write(self.root / MANIFEST_NAME, json.dumps(manifest, indent=1))

    # --- integrity ------------------------------------------------------

    def original_checksum(self) -> str:
        return self._manifest()["original"]["sha256"]

    def check(self) -> StoreStatus:
        """Verify presence and checksum of every set.

        Returns INTACT or INCREMENTAL_MISSING; raises
        UnrecoverableStoreError when the original set itself is missing
        or fails its hash.
        """
        manifest = self._manifest()
        original_path = self.root / manifest["original"]["file"]
        if not original_path.exists():
            raise UnrecoverableStoreError("original training set file is missing")
        text = original_path.read_text(encoding="utf-8")
        if dataset_checksum(text) != manifest["original"]["sha256"]:
            raise UnrecoverableStoreError("original training set failed its checksum")
        for entry in manifest["incrementals"]:
            path = self.root / entry["file"]
            if not path.exists():
                return StoreStatus.INCREMENTAL_MISSING
            if dataset_checksum(path.read_text(encoding="utf-8")) != entry["sha256"]:
                return StoreStatus.INCREMENTAL_MISSING
        return StoreStatus.INTACT

    # --- datasets ---------------------------------------------------------

    def original_dataset(self) -> Dataset:
        return deserialize_dataset((self.root / ORIGINAL_NAME).read_text(encoding="utf-8"))

    def incremental_datasets(self) -> list[Dataset]:
        out = []
        for entry in self._manifest()["incrementals"]:
            text = (self.root / entry["file"]).read_text(encoding="utf-8")
            out.append(deserialize_dataset(text))
        return out

    def merged_dataset(self) -> Dataset:
        parts = [self.original_dataset()] + self.incremental_datasets()
        return Dataset.concat(parts, Provenance.MERGED)

    def append_incremental(self, update: Dataset) -> Path | None:
        """Persist a feedback-update set; empty updates are skipped."""
        if len(update) == 0:
            return None
        manifest = self._manifest()
        seq = int(manifest.get("incremental_seq", len(manifest["incrementals"]))) + 1
        name = f"{INCREMENTAL_DIR}/{seq:04d}.ds"
        text = serialize_dataset(update)
        path = self.root / name
        path.parent.mkdir(exist_ok=True)
        path.write_text(text, encoding="utf-8")
        manifest["incrementals"].append({"file": name, "sha256": dataset_checksum(text)})
        manifest["incremental_seq"] = seq
        self._write_manifest(manifest)
        return path

    def prune_damaged_incrementals(self) -> int:
        """Drop manifest entries whose files are gone or fail their hash.

        Called after a successful retrain-mode run: the damaged sets are
        unrecoverable, and keeping their entries would pin every future
        run in retrain mode, silently discarding new feedback.
        """
        manifest = self._manifest()
        survivors = []
        for entry in manifest["incrementals"]:
            path = self.root / entry["file"]
            if path.exists() and dataset_checksum(
                    path.read_text(encoding="utf-8")) == entry["sha256"]:
                survivors.append(entry)
        dropped = len(manifest["incrementals"]) - len(survivors)
        if dropped:
            manifest["incrementals"] = survivors
            self._write_manifest(manifest)
        return dropped

    # --- flow registry ------------------------------------------------------

    def register_flow(self, features: FeatureVector) -> None:
        """Remember a flow's features so later ratings stay resolvable."""
        registry = self._read_registry()
        registry[features.flow_index] = features
        lines = []
        for idx in sorted(registry):
            fv = registry[idx]
            lines.append("\t".join([str(idx)] + [repr(float(v)) for v in fv.values]))
        _atomic_write(self.root / REGISTRY_NAME, "\n".join(lines) + "\n")

    def _read_registry(self) -> dict[int, FeatureVector]:
        path = self.root / REGISTRY_NAME
        if not path.exists():
            return {}
        registry: dict[int, FeatureVector] = {}
        for line in path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            cells = line.split("\t")
            idx = int(cells[0])
            registry[idx] = FeatureVector(tuple(float(c) for c in cells[1:]), idx)
        return registry

    def resolve_flow(self, flow_index: int) -> FeatureVector:
        registry = self._read_registry()
        if flow_index not in registry:
            raise DanglingReferenceError(f"flow {flow_index} is not resolvable to features")
        return registry[flow_index]

    # --- ratings -----------------------------------------------------------

    def ratings(self) -> list[Rating]:
        path = self.root / RATINGS_NAME
        if not path.exists():
            return []
        return [
            Rating.from_json(line)
            for line in path.read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]

    def append_rating(self, rating: Rating) -> bool:
        """Durably append; returns False when the triple is already stored."""
        existing = {r.dedup_key for r in self.ratings()}
        if rating.dedup_key in existing:
            return False
        with open(self.root / RATINGS_NAME, "a", encoding="utf-8") as fh:
            fh.write(rating.to_json() + "\n")
        return True


def record_rating(
    store: TrainingStore,
    rating: Rating,
    known_incidents: set[str] | None = None,
    known_recommendations: set[str] | None = None,
) -> bool:
    """Validate references and append the rating; idempotent on its triple."""
    if known_incidents is not None and rating.incident_id not in known_incidents:
        raise DanglingReferenceError(f"unknown incident {rating.incident_id!r}")
    if known_recommendations is not None and rating.recommendation_id not in known_recommendations:
        raise DanglingReferenceError(f"unknown recommendation {rating.recommendation_id!r}")
    store.resolve_flow(rating.flow_index)
    return store.append_rating(rating)


def build_training_update(store: TrainingStore, ratings: list[Rating]) -> Dataset:
    """One weighted sample per rating: the rated class at weight score/3."""
    features, labels, weights = [], [], []
    for rating in ratings:
        features.append(store.resolve_flow(rating.flow_index))
        labels.append(rating.rated_class)
        weights.append(rating_weight(rating.score))
    return Dataset(tuple(features), tuple(labels), tuple(weights), Provenance.FEEDBACK_UPDATE)


def fold_pending_ratings(store: TrainingStore) -> int:
    """Turn ratings not yet folded into a new incremental set.

    Returns the number of ratings folded (0 when nothing is pending).
    The manifest tracks the fold cursor so re-running is a no-op.
    """
    manifest = store._manifest()
    folded = int(manifest.get("ratings_folded", 0))
    ratings = store.ratings()
    fresh = ratings[folded:]
    if not fresh:
        return 0
    update = build_training_update(store, fresh)
    store.append_incremental(update)
    manifest = store._manifest()
    manifest["ratings_folded"] = len(ratings)
    store._write_manifest(manifest)
    return len(fresh)


def pending_rating_count(store: TrainingStore) -> int:
    manifest = store._manifest()
    return len(store.ratings()) - int(manifest.get("ratings_folded", 0))


def check_training_set(store: TrainingStore) -> StoreStatus:
    """Alias of TrainingStore.check with the module-level operation name."""
    return store.check()


def retrain(
    store: TrainingStore,
    net: Network,
    config: TrainConfig,
) -> tuple[Network, TrainReport]:
    """Integrity-check, then train.

    Intact stores continue training the given network on the merged
    original-plus-incrementals set. A damaged incremental chain switches
    to retrain mode: the entire original set, from freshly initialized
    parameters. Original-set damage propagates as unrecoverable.
    """
    status = check_training_set(store)
    if status is StoreStatus.INTACT:
        data = store.merged_dataset()
        mode = "merged"
        start = net
    else:
        data = store.original_dataset()
        mode = "retrain"
        start = init_network(net.layer_sizes, net.alpha, seed=config.seed)
    trained, report = train(start, data, config)
    if mode == "retrain":
        store.prune_damaged_incrementals()
    report = replace(
        report,
        mode=mode,
        data_checksum=dataset_checksum(serialize_dataset(data)),
    )
    return trained, report
