"""Operator entry points: simulator, edge, cloud, replay, eval, bench.

Exit codes: 0 ok, 1 usage error, 2 runtime error. Reports are printed as
tables by default; --json switches every reporting subcommand to a stable
machine-readable document.
"""

from __future__ import annotations

import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import click
import numpy as np

from . import bench as bench_mod
from . import cloud as cloud_mod
from . import wearable_sim
from .domain import VitalRanges
from .edge import CloudClient, EdgeNode
from .errors import RemoniError
from .fall_detector import load_weights_file, make_detector
from .nlp import MissingPatient, detect_intent, evaluate_recognition
from .signal_prep import preprocess, read_csv


def _split_endpoint(text: str, default_host: str = "127.0.0.1") -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    return (host or default_host, int(port))


@click.group()
def cli():
    """Desk-scale remote health monitoring toolkit."""


# -- sim ---------------------------------------------------------------


@cli.group()
def sim():
    """Wearable simulator."""


@sim.command("run")
@click.option("--scenario", "scenario_path", required=True, type=click.Path(exists=True))
@click.option("--endpoint", default=f"127.0.0.1:{7400}", show_default=True)
@click.option("--speedup", type=float, default=None, help="Override the scenario's speedup.")
def sim_run(scenario_path, endpoint, speedup):
    """Stream a scenario to an edge node over the ingest protocol."""
    scenario = wearable_sim.Scenario.load(scenario_path)
    if speedup is not None:
        from dataclasses import replace

        scenario = replace(scenario, speedup=speedup)
    summary = wearable_sim.emit(scenario, endpoint)
    click.echo(json.dumps(summary.to_json(), indent=2))
    if summary.error:
        raise RemoniError(summary.error)


# -- edge ----------------------------------------------------------------


@cli.group()
def edge():
    """Edge node."""


@edge.command("run")
@click.option("--listen", default=":7400", show_default=True, help="Ingest TCP endpoint.")
@click.option("--http", "http_listen", default="", help="Instant-query HTTP endpoint (default: ingest port + 1).")
@click.option("--cloud", "cloud_url", default="http://127.0.0.1:8080", show_default=True)
@click.option("--model", "model_path", type=click.Path(exists=True), default=None)
@click.option("--rule", "use_rule", is_flag=True, help="Use the feature-rule baseline (default).")
@click.option("--upload-period", type=float, default=60.0, show_default=True)
@click.option("--ranges", "ranges_path", type=click.Path(exists=True), default=None,
              help="JSON overrides for the healthy vital ranges.")
def edge_run(listen, http_listen, cloud_url, model_path, use_rule, upload_period, ranges_path):
    """Terminate ingest sessions, detect anomalies, push alerts, upload batches."""
    if model_path and use_rule:
        raise click.UsageError("--model and --rule are mutually exclusive")
    cloud_url = os.environ.get(cloud_mod.ENV_CLOUD_URL) or cloud_url
    weights = load_weights_file(model_path) if model_path else None
    ranges = None
    if ranges_path:
        with open(ranges_path) as f:
            ranges = VitalRanges.from_json(json.load(f))

    host, port = _split_endpoint(listen)
    http_host, http_port = _split_endpoint(http_listen) if http_listen else (host, port + 1)

    node = EdgeNode(
        cloud=CloudClient(cloud_url),
        weights=weights,
        ranges=ranges,
        upload_period_s=upload_period,
    )
    ingest_port = node.serve_ingest(host, port)
    instant_port = node.serve_http(http_host, http_port)
    node.start_uploader()
    click.echo(
        f"edge up: ingest {host}:{ingest_port}, instant http {http_host}:{instant_port}, "
        f"cloud {cloud_url}, detector {'model' if weights else 'rule'}",
        err=True,
    )
    try:
        import time

        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        node.stop()


# -- cloud -----------------------------------------------------------------


@cli.group()
def cloud():
    """Cloud service."""


@cloud.command("run")
@click.option("--listen", default=":8080", show_default=True)
@click.option("--data-dir", default="./data", show_default=True)
@click.option("--edge", "edge_url", default="", help="Edge instant-query base URL.")
@click.option("--ui-dir", default=None, type=click.Path(), help="Static assets for the web UI.")
@click.option("--registry", "registry_file", default=None, type=click.Path(exists=True))
@click.option("--intent-backend", type=click.Choice(["grammar", "llm"]), default="grammar", show_default=True)
@click.option("--answer-backend", type=click.Choice(["template", "llm"]), default="template", show_default=True)
def cloud_run(listen, data_dir, edge_url, ui_dir, registry_file, intent_backend, answer_backend):
    """Serve the alert feed, ingestion, query and chat API."""
    host, port = _split_endpoint(listen)
    cloud_mod.run(
        host=host,
        port=port,
        data_dir=data_dir,
        edge_url=edge_url,
        ui_dir=ui_dir,
        registry_file=registry_file,
        intent_backend=intent_backend,
        answer_backend=answer_backend,
    )


# -- replay ------------------------------------------------------------------


@cli.command("replay")
@click.option("--csv", "csv_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", type=click.Path(exists=True), default=None)
@click.option("--rule", "use_rule", is_flag=True)
@click.option("--json", "as_json", is_flag=True)
def replay(csv_path, model_path, use_rule, as_json):
    """Run a recorded 238 Hz CSV through the full detection pipeline."""
    if model_path and use_rule:
        raise click.UsageError("--model and --rule are mutually exclusive")
    weights = load_weights_file(model_path) if model_path else None
    detector = make_detector(weights)

    t, xyz, labels = read_csv(csv_path)
    windows = preprocess(t, xyz)
    labeled_ts = t[labels == 1] if labels is not None else None

    rows = []
    for w in windows:
        score = detector(w)
        row = {
            "t_start": w.t_start,
            "probability": round(score.probability, 6),
            "is_fall": score.is_fall,
        }
        if labeled_ts is not None:
            lo = np.searchsorted(labeled_ts, w.t[0], side="left")
            hi = np.searchsorted(labeled_ts, w.t[-1], side="right")
            row["label"] = int(hi > lo)
        rows.append(row)

    report: dict = {"windows": rows, "detector": "model" if weights else "rule"}
    if labeled_ts is not None:
        # Overlapping windows see each event 1-2 times, and a peak hugging a
        # window edge is unassessable there by construction, so detection is
        # scored per event: a maximal run of consecutive labeled windows is
        # one true event, detected iff any window in the run fired. A run of
        # fired windows touching no label is one false positive.
        tp = fp = fn = tn = 0
        i = 0
        while i < len(rows):
            if rows[i]["label"] or rows[i]["is_fall"]:
                j = i
                while j < len(rows) and (rows[j]["label"] or rows[j]["is_fall"]):
                    j += 1
                run = rows[i:j]
                if any(r["label"] for r in run):
                    if any(r["is_fall"] for r in run):
                        tp += 1
                    else:
                        fn += 1
                else:
                    fp += 1
                i = j
            else:
                tn += 1
                i += 1
        report["confusion"] = {"tp": tp, "fp": fp, "fn": fn, "tn_windows": tn}
        report["metrics"] = {
            "precision": tp / (tp + fp) if tp + fp else 1.0,
            "recall": tp / (tp + fn) if tp + fn else 1.0,
        }
    if as_json:
        click.echo(json.dumps(report, indent=2))
        return
    for row in rows:
        suffix = f"  label={row['label']}" if "label" in row else ""
        click.echo(
            f"{row['t_start']:>14}  p={row['probability']:.4f}  "
            f"fall={'Y' if row['is_fall'] else 'n'}{suffix}"
        )
    if "confusion" in report:
        c, m = report["confusion"], report["metrics"]
        click.echo(
            f"events: tp={c['tp']} fp={c['fp']} fn={c['fn']} (clean windows {c['tn_windows']})  "
            f"precision={m['precision']:.3f} recall={m['recall']:.3f}"
        )


# -- eval ----------------------------------------------------------------------


@cli.group("eval")
def eval_group():
    """Offline evaluation harnesses."""


@eval_group.command("nlu")
@click.option("--cases", "cases_path", required=True, type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True)
def eval_nlu(cases_path, as_json):
    """Exact-match the intent grammar against a golden case file."""
    with open(cases_path) as f:
        doc = json.load(f)
    cases = doc["cases"] if isinstance(doc, dict) else doc
    passed, failures = 0, []
    for i, case in enumerate(cases):
        now = datetime.fromisoformat(case["now"].replace("Z", "+00:00")).astimezone(timezone.utc)
        name_map = case.get("name_map")
        expected = case["expected"]
        try:
            got = detect_intent(case["question"], now, name_map=name_map).to_json()
        except MissingPatient:
            got = {"error": "MissingPatient"}
        if got == expected:
            passed += 1
        else:
            failures.append({"case": i, "question": case["question"], "expected": expected, "got": got})
    report = {"passed": passed, "total": len(cases), "failures": failures}
    if as_json:
        click.echo(json.dumps(report, indent=2))
    else:
        click.echo(f"{passed}/{len(cases)} exact-match")
        for f_ in failures:
            click.echo(f"FAIL case {f_['case']}: {f_['question']}")
    if failures:
        raise RemoniError(f"{len(failures)} golden case(s) failed")


@eval_group.command("recognizer")
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--labels", "labels_path", required=True, type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True)
def eval_recognizer(pred_path, labels_path, as_json):
    """Score predicted activity/emotion pairs against gold labels."""
    with open(pred_path) as f:
        pred = json.load(f)
    with open(labels_path) as f:
        labels = json.load(f)
    report = evaluate_recognition(pred, labels)
    if as_json:
        click.echo(json.dumps(report, indent=2))
    else:
        for task, metrics in report.items():
            click.echo(
                f"{task}: accuracy={metrics['accuracy']:.3f} "
                f"P={metrics['macro_precision']:.3f} R={metrics['macro_recall']:.3f} "
                f"F1={metrics['macro_f1']:.3f}"
            )


# -- bench -------------------------------------------------------------------


@cli.group("bench")
def bench_group():
    """Benchmarks."""


@bench_group.command("latency")
@click.option("--scenario", "scenario_path", required=True, type=click.Path(exists=True))
@click.option("--n", default=10, show_default=True, help="Repetitions.")
@click.option("--data-dir", default=None, type=click.Path())
@click.option("--json", "as_json", is_flag=True)
def bench_latency(scenario_path, n, data_dir, as_json):
    """Measure alert detection-to-delivery latency on a local edge+cloud pair."""
    report = bench_mod.run_bench(scenario_path, n=n, data_dir=data_dir)
    if as_json:
        click.echo(json.dumps(report.to_json(), indent=2))
    else:
        click.echo(report.table())


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as e:
        e.show()
        return 1
    except click.ClickException as e:
        e.show()
        return 2
    except click.exceptions.Abort:
        return 2
    except RemoniError as e:
        click.echo(f"error: {e}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
