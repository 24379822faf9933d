"""HTTP API for the analyst console and scripted clients.

Uploaded flow CSVs become one incident per relevant flow, classified with
the current model snapshot. Ratings land in the feedback store and the
knowledge base; POST /api/train folds pending ratings into an incremental
set and retrains in a background job. Exactly one training job may run at
a time (409 otherwise) and predictions keep serving the previous model
until the new one is swapped in atomically at completion.
"""

from __future__ import annotations

import itertools
import logging
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field as PydanticField

from . import feedback as fb
from . import knowledge as kb_mod
from . import report as report_mod
from .etl import (
    EmptyInputError,
    EtlError,
    default_metrics,
    parse_flow_file,
    to_feature_vector,
    filter_relevant,
)
from .flows import ClassLabel, FeatureVector, FlowRecord, validate_flow
from .nnet import (
    Network,
    TrainConfig,
    TrainReport,
    init_network,
    load_weights,
    predict,
    save_weights,
    weights_checksum,
)
from .simulate import generate_corpus

logger = logging.getLogger(__name__)

STATUS_FLOW = ("open", "acknowledged", "resolved")


@dataclass
class IncidentRecord:
    incident_id: str
    created_at: datetime
    flow: FlowRecord
    features: FeatureVector
    distribution: "object"
    suggestions: list
    model_version: str
    status: str = "open"
    ratings: list = field(default_factory=list)

    def advance_status(self, new_status: str) -> None:
        if new_status not in STATUS_FLOW:
            raise ValueError(f"unknown status {new_status!r}")
        if STATUS_FLOW.index(new_status) < STATUS_FLOW.index(self.status):
            raise ValueError(f"cannot move status {self.status} -> {new_status}")
        self.status = new_status


class RatingRequest(BaseModel):
    recommendation_id: str
    score: int = PydanticField(ge=1, le=5)
    rated_class: str | None = None
    timestamp: datetime | None = None
    note: str = ""


class TrainRequest(BaseModel):
    epochs: int = PydanticField(default=60, ge=1, le=10000)
    batch_size: int = PydanticField(default=32, ge=1)
    seed: int = 0


class StatusRequest(BaseModel):
    status: str


class ServiceState:
    """All mutable service state; reads see immutable snapshots."""

    def __init__(self, data_dir: Path, model: Network, store: fb.TrainingStore,
                 kb: kb_mod.KnowledgeBase):
        self.data_dir = data_dir
        self.model = model
        self.store = store
        self.kb = kb
        self.incidents: dict[str, IncidentRecord] = {}
        self.train_lock = threading.Lock()
        self.mutation_lock = threading.Lock()
        self.last_report: TrainReport | None = None
        self.last_error: str | None = None
        self._incident_counter = itertools.count(1)
        self._flow_counter = itertools.count(1)

    def next_incident_id(self) -> str:
        return f"inc-{next(self._incident_counter):06d}"

    def next_flow_index(self) -> int:
        return next(self._flow_counter)

    @property
    def model_version(self) -> str:
        return weights_checksum(self.model)

    def pending_feedback(self) -> int:
        return fb.pending_rating_count(self.store)


def _dist_payload(dist) -> dict:
    return {
        "probs": {label.value: dist.probs[label.index] for label in ClassLabel},
        "predicted": dist.predicted.value,
    }


def _suggestion_payload(entry, score) -> dict:
    return {
        "recommendation_id": entry.recommendation_id,
        "title": entry.title,
        "detail": entry.detail,
        "level": entry.level,
        "score": score,
        "feedback_score": entry.feedback_score,
    }


def _incident_payload(record: IncidentRecord, full: bool = False) -> dict:
    dist = record.distribution
    top_risk = max(
        dist.prob_of(ClassLabel.SERVICE_INCIDENT),
        dist.prob_of(ClassLabel.DOS_ATTACK),
    )
    payload = {
        "incident_id": record.incident_id,
        "created_at": record.created_at.isoformat(),
        "status": record.status,
        "flow_index": record.features.flow_index,
        "distribution": _dist_payload(dist),
        "top_risk": top_risk,
        "model_version": record.model_version,
        "ratings": [
            {
                "recommendation_id": r.recommendation_id,
                "score": r.score,
                "rated_class": r.rated_class.value,
                "timestamp": r.timestamp.isoformat(),
            }
            for r in record.ratings
        ],
    }
    if full:
        payload["suggestions"] = [
            _suggestion_payload(entry, score) for entry, score in record.suggestions
        ]
        payload["destination"] = record.flow.ip_destination
        payload["protocol"] = record.flow.l4_protocol
    return payload


def bootstrap_data_dir(data_dir: Path, per_class: int = 100, seed: int = 7,
                       epochs: int = 60) -> tuple[Network, fb.TrainingStore]:
    """Create a demo-ready store and trained model from simulated traffic."""
    corpus = generate_corpus(per_class, seed)
    store = fb.TrainingStore.create(data_dir / "store", corpus)
    net = init_network(seed=seed)
    config = TrainConfig(epochs=epochs, batch_size=32, seed=seed)
    net, _ = fb.retrain(store, net, config)
    save_weights(net, data_dir / "model.json", store.original_checksum())
    return net, store


def create_app(
    data_dir,
    bootstrap: bool = False,
    train_config: TrainConfig | None = None,
    static_dir=None,
) -> FastAPI:
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    store_dir = data_dir / "store"
    weights_path = data_dir / "model.json"
    kb_path = data_dir / "kb.json"

    if kb_path.exists():
        kb = kb_mod.load_knowledge_base(kb_path)
    else:
        kb = kb_mod.default_knowledge_base()
        kb_mod.save_knowledge_base(kb, kb_path)

    if weights_path.exists() and store_dir.exists():
        model = load_weights(weights_path)
        store = fb.TrainingStore(store_dir)
    elif bootstrap:
        model, store = bootstrap_data_dir(data_dir)
    else:
        # Cold start: empty store over a minimal simulated set, untrained net.
        corpus = generate_corpus(10, seed=0)
        store = fb.TrainingStore.create(store_dir, corpus) if not store_dir.exists() \
            else fb.TrainingStore(store_dir)
        model = init_network(seed=0)

    state = ServiceState(data_dir, model, store, kb)
    default_config = train_config or TrainConfig(epochs=60, batch_size=32, seed=7)

    app = FastAPI(title="flowtriage", version="0.1.0")
    app.state.triage = state

    @app.exception_handler(ValueError)
    async def value_error_handler(request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.post("/api/flows")
    async def upload_flows(request: Request):
        body = await request.body()
        if not body:
            return JSONResponse(status_code=400, content={"detail": "empty request body"})
        try:
            records = parse_flow_file(body)
        except EmptyInputError as exc:
            return JSONResponse(status_code=400, content={"detail": str(exc)})
        except EtlError as exc:
            return JSONResponse(status_code=400, content={"detail": str(exc)})

        violations = []
        for row, record in enumerate(records, start=1):
            result = validate_flow(record)
            if not result.ok:
                violations.extend(
                    {"row": row, "field": v.field, "message": v.message}
                    for v in result.violations
                )
        if violations:
            return JSONResponse(status_code=422, content={"detail": violations})

        relevant = filter_relevant(records)
        metrics = default_metrics()
        created = []
        with state.mutation_lock:
            model = state.model
            version = state.model_version
            for record in relevant:
                flow_index = state.next_flow_index()
                record = _reindex(record, flow_index)
                features = to_feature_vector(record, metrics)
                dist = predict(model, features)
                suggestions = kb_mod.suggest(dist, state.kb, top_n=5)
                incident = IncidentRecord(
                    incident_id=state.next_incident_id(),
                    created_at=datetime.now(timezone.utc),
                    flow=record,
                    features=features,
                    distribution=dist,
                    suggestions=suggestions,
                    model_version=version,
                )
                state.incidents[incident.incident_id] = incident
                state.store.register_flow(features)
                created.append(incident.incident_id)
        return {
            "received": len(records),
            "filtered_out": len(records) - len(relevant),
            "incidents": created,
        }

    @app.get("/api/incidents")
    async def list_incidents():
        records = sorted(
            state.incidents.values(),
            key=lambda r: (
                -max(
                    r.distribution.prob_of(ClassLabel.SERVICE_INCIDENT),
                    r.distribution.prob_of(ClassLabel.DOS_ATTACK),
                ),
                r.incident_id,
            ),
        )
        return {"incidents": [_incident_payload(r) for r in records]}

    @app.get("/api/incidents/{incident_id}")
    async def get_incident(incident_id: str):
        record = state.incidents.get(incident_id)
        if record is None:
            return JSONResponse(status_code=404, content={"detail": f"unknown incident {incident_id}"})
        return _incident_payload(record, full=True)

    @app.post("/api/incidents/{incident_id}/status")
    async def set_status(incident_id: str, body: StatusRequest):
        record = state.incidents.get(incident_id)
        if record is None:
            return JSONResponse(status_code=404, content={"detail": f"unknown incident {incident_id}"})
        try:
            record.advance_status(body.status)
        except ValueError as exc:
            return JSONResponse(status_code=422, content={"detail": str(exc)})
        return {"incident_id": incident_id, "status": record.status}

    @app.post("/api/incidents/{incident_id}/ratings")
    async def rate_incident(incident_id: str, body: RatingRequest):
        record = state.incidents.get(incident_id)
        if record is None:
            return JSONResponse(status_code=404, content={"detail": f"unknown incident {incident_id}"})
        if body.rated_class is not None:
            try:
                rated_class = ClassLabel.from_name(body.rated_class)
            except ValueError as exc:
                return JSONResponse(status_code=422, content={"detail": str(exc)})
        else:
            rated_class = record.distribution.predicted
        timestamp = body.timestamp or datetime.now(timezone.utc)
        if timestamp.tzinfo is None:
            timestamp = timestamp.replace(tzinfo=timezone.utc)
        try:
            rating = fb.Rating(
                incident_id=incident_id,
                flow_index=record.features.flow_index,
                recommendation_id=body.recommendation_id,
                rated_class=rated_class,
                score=body.score,
                timestamp=timestamp,
                note=body.note,
            )
        except fb.RatingValidationError as exc:
            return JSONResponse(status_code=422, content={"detail": str(exc)})
        with state.mutation_lock:
            try:
                stored = fb.record_rating(
                    state.store, rating,
                    known_incidents=set(state.incidents),
                    known_recommendations=state.kb.ids(),
                )
            except fb.DanglingReferenceError as exc:
                return JSONResponse(status_code=404, content={"detail": str(exc)})
            if stored:
                state.kb = kb_mod.apply_rating(state.kb, body.recommendation_id, body.score)
                kb_mod.save_knowledge_base(state.kb, kb_path)
                record.ratings.append(rating)
                if record.status == "open":
                    record.advance_status("acknowledged")
        return {
            "incident_id": incident_id,
            "recommendation_id": body.recommendation_id,
            "score": body.score,
            "stored": stored,
            "duplicate": not stored,
            "pending_feedback": state.pending_feedback(),
        }

    def _run_training(config: TrainConfig):
        try:
            with state.mutation_lock:
                fb.fold_pending_ratings(state.store)
            net, report = fb.retrain(state.store, state.model, config)
            with state.mutation_lock:
                state.model = net
                state.last_report = report
                state.last_error = None
                save_weights(net, weights_path, report.data_checksum)
        except Exception as exc:  # surfaced via /api/train/status
            logger.exception("training job failed")
            state.last_error = f"{type(exc).__name__}: {exc}"
        finally:
            state.train_lock.release()

    @app.post("/api/train")
    async def start_training(body: TrainRequest | None = None):
        if not state.train_lock.acquire(blocking=False):
            return JSONResponse(status_code=409, content={"detail": "a training job is already running"})
        if body is None:
            config = default_config
        else:
            config = TrainConfig(
                epochs=body.epochs,
                batch_size=body.batch_size,
                seed=body.seed,
            )
        thread = threading.Thread(target=_run_training, args=(config,), daemon=True)
        thread.start()
        return JSONResponse(status_code=202, content={"detail": "training started"})

    @app.get("/api/train/status")
    async def train_status():
        running = state.train_lock.locked()
        payload = {
            "running": running,
            "pending_feedback": state.pending_feedback(),
            "last_error": state.last_error,
        }
        if state.last_report is not None:
            payload["last_report"] = {
                "mode": state.last_report.mode,
                "epochs": len(state.last_report.epoch_losses),
                "final_accuracy": state.last_report.final_accuracy,
                "samples": state.last_report.samples,
            }
        return payload

    @app.get("/api/reports/{incident_id}")
    async def get_report(incident_id: str, format: str = "json"):
        record = state.incidents.get(incident_id)
        if record is None:
            return JSONResponse(status_code=404, content={"detail": f"unknown incident {incident_id}"})
        if format not in ("json", "html"):
            return JSONResponse(status_code=400, content={"detail": f"unknown format {format!r}"})
        metadata = report_mod.ReportMetadata(
            incident_id=record.incident_id,
            created_at=record.created_at,
            flows_covered=(record.features.flow_index,),
            model_version=record.model_version,
            kb_version=state.kb.version,
        )
        rep = report_mod.generate_report(record.distribution, record.suggestions, metadata)
        if format == "html":
            return Response(content=report_mod.render(rep, "html"), media_type="text/html")
        return Response(
            content=report_mod.render(rep, "structured_text"),
            media_type="application/json",
        )

    @app.get("/api/model")
    async def model_info():
        return {
            "model_version": state.model_version,
            "layer_sizes": list(state.model.layer_sizes),
            "alpha": state.model.alpha,
            "classes": [c.value for c in ClassLabel],
            "kb_version": state.kb.version,
            "pending_feedback": state.pending_feedback(),
            "training_running": state.train_lock.locked(),
        }

    if static_dir is not None and Path(static_dir).exists():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")

    return app


def _reindex(record: FlowRecord, flow_index: int) -> FlowRecord:
    from dataclasses import replace
    return replace(record, flow_index=flow_index)
