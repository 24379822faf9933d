"""Command-line entry points.

    flowtriage simulate --class dos --count 1000 --seed 7 --out flows.csv
    flowtriage ingest flows.csv --out data.ds
    flowtriage train --data data.ds --epochs 100 --seed 7 --out model.json
    flowtriage predict --weights model.json --data flows.csv --json
    flowtriage feedback init|register|add ...
    flowtriage retrain --store <dir> --weights model.json --out model.json
    flowtriage report --incident <id> --format html --out report.html
    flowtriage kb list|show <id>
    flowtriage serve --port 8000 --data-dir ./data
"""

from __future__ import annotations

import argparse
import json
import sys
import urllib.request
from datetime import datetime, timezone
from pathlib import Path

from . import feedback as fb
from . import knowledge as kb_mod
from .etl import (
    EtlError,
    build_dataset,
    dataset_checksum,
    default_metrics,
    load_dataset,
    parse_flow_file,
    parse_labeled_flow_file,
    save_dataset,
    serialize_dataset,
    to_feature_vector,
    filter_relevant,
    write_flow_file,
)
from .flows import ClassLabel, validate_flow
from .nnet import (
    TrainConfig,
    init_network,
    load_weights,
    predict,
    save_weights,
    train,
)
from .simulate import ScenarioSpec, generate_labeled_flows, generate_scenario

CLASS_ALIASES = {
    "normal": ClassLabel.NORMAL_TRAFFIC,
    "normal_traffic": ClassLabel.NORMAL_TRAFFIC,
    "incident": ClassLabel.SERVICE_INCIDENT,
    "service_incident": ClassLabel.SERVICE_INCIDENT,
    "dos": ClassLabel.DOS_ATTACK,
    "dos_attack": ClassLabel.DOS_ATTACK,
}


def _class_arg(text: str) -> ClassLabel:
    try:
        return CLASS_ALIASES[text.lower()]
    except KeyError:
        raise argparse.ArgumentTypeError(
            f"unknown class {text!r}; choose from {sorted(CLASS_ALIASES)}"
        ) from None


def cmd_simulate(args) -> int:
    if args.kind == "all":
        flows = generate_labeled_flows(args.count, args.seed)
    else:
        spec = ScenarioSpec(_class_arg(args.kind), args.count, args.seed)
        flows = generate_scenario(spec)
    text = write_flow_file(flows)
    Path(args.out).write_text(text, encoding="utf-8")
    print(f"wrote {len(flows)} labeled flows to {args.out}")
    return 0


def cmd_ingest(args) -> int:
    try:
        labeled = parse_labeled_flow_file(Path(args.file).read_bytes())
        dataset = build_dataset(labeled, default_metrics())
    except EtlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    checksum = save_dataset(dataset, args.out)
    dropped = len(labeled) - len(dataset)
    print(f"wrote dataset of {len(dataset)} samples to {args.out} "
          f"({dropped} non-relevant flows dropped, sha256 {checksum[:12]})")
    return 0


def cmd_train(args) -> int:
    dataset = load_dataset(args.data)
    net = init_network(seed=args.seed, alpha=args.alpha)
    config = TrainConfig(epochs=args.epochs, batch_size=args.batch_size, seed=args.seed)
    net, report = train(net, dataset, config)
    checksum = dataset_checksum(serialize_dataset(dataset))
    save_weights(net, args.out, checksum)
    print(f"trained {args.epochs} epochs on {report.samples} samples; "
          f"final accuracy {report.final_accuracy:.4f}; weights -> {args.out}")
    return 0


def cmd_predict(args) -> int:
    net = load_weights(args.weights)
    records = parse_flow_file(Path(args.data).read_bytes())
    records = filter_relevant(records)
    metrics = default_metrics()
    results = []
    for record in records:
        if not validate_flow(record).ok:
            continue
        dist = predict(net, to_feature_vector(record, metrics))
        results.append({
            "flow_index": record.flow_index,
            "predicted": dist.predicted.value,
            "probs": {c.value: dist.probs[c.index] for c in ClassLabel},
        })
    if args.json:
        print(json.dumps(results, indent=1))
    else:
        for r in results:
            probs = " ".join(f"{k}={v:.4f}" for k, v in r["probs"].items())
            print(f"flow {r['flow_index']}: {r['predicted']}  [{probs}]")
    return 0


def cmd_feedback(args) -> int:
    store = fb.TrainingStore(Path(args.store))
    if args.feedback_cmd == "init":
        dataset = load_dataset(args.data)
        fb.TrainingStore.create(Path(args.store), dataset)
        print(f"created training store at {args.store} ({len(dataset)} original samples)")
        return 0
    if args.feedback_cmd == "register":
        dataset = load_dataset(args.data)
        for fv in dataset.features:
            store.register_flow(fv)
        print(f"registered {len(dataset)} flows for rating resolution")
        return 0
    # add
    rating = fb.Rating(
        incident_id=args.incident,
        flow_index=args.flow,
        recommendation_id=args.recommendation,
        rated_class=_class_arg(args.rated_class),
        score=args.score,
        timestamp=datetime.now(timezone.utc),
        note=args.note,
    )
    stored = fb.record_rating(store, rating)
    print("rating stored" if stored else "duplicate rating ignored")
    return 0


def cmd_retrain(args) -> int:
    store = fb.TrainingStore(Path(args.store))
    net = load_weights(args.weights)
    folded = fb.fold_pending_ratings(store)
    config = TrainConfig(epochs=args.epochs, batch_size=args.batch_size, seed=args.seed)
    net, report = fb.retrain(store, net, config)
    save_weights(net, args.out, report.data_checksum)
    print(f"mode={report.mode} folded={folded} samples={report.samples} "
          f"final_accuracy={report.final_accuracy:.4f}; weights -> {args.out}")
    return 0


def cmd_report(args) -> int:
    url = f"{args.api.rstrip('/')}/api/reports/{args.incident}?format={args.format}"
    try:
        with urllib.request.urlopen(url) as response:
            data = response.read()
    except Exception as exc:
        print(f"error fetching report: {exc}", file=sys.stderr)
        return 1
    if args.out:
        Path(args.out).write_bytes(data)
        print(f"wrote report to {args.out}")
    else:
        sys.stdout.write(data.decode("utf-8"))
    return 0


def _load_kb(path: str | None) -> kb_mod.KnowledgeBase:
    if path:
        return kb_mod.load_knowledge_base(path)
    return kb_mod.default_knowledge_base()


def cmd_kb(args) -> int:
    kb = _load_kb(args.kb)
    if args.kb_cmd == "list":
        for entry in kb.entries:
            classes = ",".join(sorted(c.value for c in entry.applicable_classes))
            print(f"{entry.recommendation_id:28s} [{entry.level:>14s}] "
                  f"rank={entry.base_rank:.2f} feedback={entry.feedback_score:.2f} ({classes})")
        return 0
    entry = kb.get(args.id)
    print(f"{entry.recommendation_id}: {entry.title}")
    print(f"  level: {entry.level}")
    print(f"  classes: {', '.join(sorted(c.value for c in entry.applicable_classes))}")
    print(f"  base rank: {entry.base_rank}")
    print(f"  feedback score: {entry.feedback_score} ({entry.rating_count} ratings)")
    print(f"  {entry.detail}")
    for link in entry.links:
        print(f"  link: {link}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    static = args.static
    if static is None and Path("frontend/dist").exists():
        static = "frontend/dist"
    app = create_app(
        Path(args.data_dir),
        bootstrap=args.bootstrap,
        static_dir=static,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flowtriage")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate labeled synthetic flows")
    p.add_argument("--class", dest="kind", default="all",
                   help="normal | incident | dos | all (default all)")
    p.add_argument("--count", type=int, default=100,
                   help="flows per scenario (per class when --class all)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ingest", help="flow CSV -> dataset file")
    p.add_argument("file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train a classifier on a dataset file")
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="classify flows from a CSV")
    p.add_argument("--weights", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("feedback", help="training store and analyst ratings")
    fsub = p.add_subparsers(dest="feedback_cmd", required=True)
    fp = fsub.add_parser("init", help="create a store from a dataset file")
    fp.add_argument("--store", required=True)
    fp.add_argument("--data", required=True)
    fp = fsub.add_parser("register", help="make a dataset's flows ratable")
    fp.add_argument("--store", required=True)
    fp.add_argument("--data", required=True)
    fp = fsub.add_parser("add", help="record one rating")
    fp.add_argument("--store", required=True)
    fp.add_argument("--incident", required=True)
    fp.add_argument("--flow", type=int, required=True)
    fp.add_argument("--recommendation", required=True)
    fp.add_argument("--rated-class", required=True)
    fp.add_argument("--score", type=int, required=True)
    fp.add_argument("--note", default="")
    p.set_defaults(func=cmd_feedback)

    p = sub.add_parser("retrain", help="integrity-check, fold ratings, retrain")
    p.add_argument("--store", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_retrain)

    p = sub.add_parser("report", help="fetch an incident report from the service")
    p.add_argument("--incident", required=True)
    p.add_argument("--format", choices=("html", "json"), default="html")
    p.add_argument("--out")
    p.add_argument("--api", default="http://127.0.0.1:8000")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("kb", help="inspect the remediation knowledge base")
    ksub = p.add_subparsers(dest="kb_cmd", required=True)
    kp = ksub.add_parser("list")
    kp.add_argument("--kb")
    kp = ksub.add_parser("show")
    kp.add_argument("id")
    kp.add_argument("--kb")
    p.set_defaults(func=cmd_kb)

    p = sub.add_parser("serve", help="run the HTTP API (and console, if built)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--data-dir", default="./data")
    p.add_argument("--bootstrap", action="store_true",
                   help="train a starter model from simulated traffic if none exists")
    p.add_argument("--static", help="directory with the built console")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
