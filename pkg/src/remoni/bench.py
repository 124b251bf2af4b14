"""End-to-end latency benchmark: spawns a local edge + cloud pair, replays
a scripted emergency scenario n times, and measures each alert's path from
edge detection to cloud receipt and subscriber delivery.

Chat round-trips for the four standing question types (image retrieval,
vital-sign retrieval, image description, plotting) are timed against the
same deployment so the report mirrors the response-time breakdown the
system is judged on.
"""

from __future__ import annotations

import json
import socket
import subprocess
import sys
import tempfile
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import httpx

from .errors import RemoniError
from .wearable_sim import Scenario, emit

CHAT_QUESTIONS = {
    "image_retrieval": "Show me a picture of patient {pid}.",
    "vital_sign_retrieval": "What is the current heart rate of patient {pid}?",
    "image_description": "What is patient {pid} doing right now?",
    "plotting": "Plot patient {pid}'s heart rate today.",
}


class BenchError(RemoniError):
    pass


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def percentile(samples: list[float], q: float) -> float:
    if not samples:
        return float("nan")
    ordered = sorted(samples)
    idx = max(0, min(len(ordered) - 1, int(round(q * (len(ordered) - 1)))))
    return ordered[idx]


@dataclass
class BenchReport:
    scenario_id: str
    repetitions: int
    alerts: list = field(default_factory=list)
    detect_to_received_ms: dict = field(default_factory=dict)
    detect_to_delivered_ms: dict = field(default_factory=dict)
    chat_ms: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "repetitions": self.repetitions,
            "alert_count": len(self.alerts),
            "alerts": self.alerts,
            "detect_to_received_ms": self.detect_to_received_ms,
            "detect_to_delivered_ms": self.detect_to_delivered_ms,
            "chat_ms": self.chat_ms,
        }

    def table(self) -> str:
        lines = [
            f"scenario: {self.scenario_id}   repetitions: {self.repetitions}   "
            f"alerts: {len(self.alerts)}",
            f"{'latency':<24}{'mean':>10}{'p95':>10}{'max':>10}",
        ]
        for name, stats in (
            ("detect -> received", self.detect_to_received_ms),
            ("detect -> delivered", self.detect_to_delivered_ms),
        ):
            lines.append(
                f"{name:<24}{stats.get('mean', float('nan')):>10.1f}"
                f"{stats.get('p95', float('nan')):>10.1f}{stats.get('max', float('nan')):>10.1f}"
            )
        lines.append(f"{'chat question type':<28}{'round trip ms':>14}")
        for qtype, ms in self.chat_ms.items():
            lines.append(f"{qtype:<28}{ms:>14.1f}")
        return "\n".join(lines)


def _stats(samples: list[float]) -> dict:
    if not samples:
        return {"mean": float("nan"), "p95": float("nan"), "max": float("nan"), "samples": []}
    return {
        "mean": sum(samples) / len(samples),
        "p95": percentile(samples, 0.95),
        "max": max(samples),
        "samples": samples,
    }


def wait_for_http(url: str, timeout_s: float = 15.0) -> None:
    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        try:
            if httpx.get(url, timeout=1.0).status_code == 200:
                return
        except httpx.HTTPError:
            pass
        time.sleep(0.1)
    raise BenchError(f"service at {url} did not come up within {timeout_s}s")


class AlertSubscriber(threading.Thread):
    """Background SSE consumer collecting delivered alerts."""

    def __init__(self, cloud_url: str):
        super().__init__(daemon=True)
        self.url = f"{cloud_url}/alerts/stream"
        self.alerts: list[dict] = []
        self._stop = threading.Event()

    def run(self) -> None:
        try:
            with httpx.stream("GET", self.url, timeout=httpx.Timeout(5.0, read=60.0)) as resp:
                for line in resp.iter_lines():
                    if self._stop.is_set():
                        return
                    if line.startswith("data: "):
                        self.alerts.append(json.loads(line[len("data: "):]))
        except httpx.HTTPError:
            if not self._stop.is_set():
                raise

    def stop(self) -> None:
        self._stop.set()


def run_bench(
    scenario_path,
    n: int = 10,
    data_dir: Optional[str] = None,
    keep_children_output: bool = False,
) -> BenchReport:
    scenario = Scenario.load(scenario_path)
    edge_port = free_port()
    edge_http_port = free_port()
    cloud_port = free_port()
    cloud_url = f"http://127.0.0.1:{cloud_port}"
    # a fresh data dir per run: a reused journal would replay old alerts
    data = Path(data_dir) if data_dir else Path(tempfile.mkdtemp(prefix="remoni-bench-"))

    out = None if keep_children_output else subprocess.DEVNULL
    children: list[subprocess.Popen] = []
    subscriber = None
    try:
        children.append(
            subprocess.Popen(
                [sys.executable, "-m", "remoni", "cloud", "run",
                 "--listen", f"127.0.0.1:{cloud_port}", "--data-dir", str(data),
                 "--edge", f"http://127.0.0.1:{edge_http_port}"],
                stdout=out, stderr=out,
            )
        )
        wait_for_http(f"{cloud_url}/healthz")
        children.append(
            subprocess.Popen(
                [sys.executable, "-m", "remoni", "edge", "run",
                 "--listen", f"127.0.0.1:{edge_port}",
                 "--http", f"127.0.0.1:{edge_http_port}",
                 "--cloud", cloud_url, "--rule", "--upload-period", "3600"],
                stdout=out, stderr=out,
            )
        )
        wait_for_http(f"http://127.0.0.1:{edge_http_port}/healthz")

        subscriber = AlertSubscriber(cloud_url)
        subscriber.start()
        time.sleep(0.2)

        for rep in range(n):
            rep_scenario = replace(scenario, patient_id=f"{scenario.patient_id}-r{rep}")
            summary = emit(rep_scenario, f"127.0.0.1:{edge_port}")
            if summary.error:
                raise BenchError(f"repetition {rep}: {summary.error}")

        def run_falls():
            prefix = f"{scenario.patient_id}-r"
            return [
                a for a in subscriber.alerts
                if a["kind"] == "fall" and a["patient_id"].startswith(prefix)
            ]

        deadline = time.monotonic() + 30.0
        while time.monotonic() < deadline:
            if len(run_falls()) >= n:
                break
            time.sleep(0.05)

        chat_ms: dict[str, float] = {}
        chat_pid = f"{scenario.patient_id}-r{n - 1}"
        for qtype, template in CHAT_QUESTIONS.items():
            t0 = time.perf_counter()
            resp = httpx.post(
                f"{cloud_url}/chat",
                json={"question": template.format(pid=chat_pid)},
                timeout=30.0,
            )
            resp.raise_for_status()
            chat_ms[qtype] = (time.perf_counter() - t0) * 1000
    finally:
        if subscriber is not None:
            subscriber.stop()
        for child in children:
            child.terminate()
        for child in children:
            try:
                child.wait(timeout=5)
            except subprocess.TimeoutExpired:
                child.kill()

    falls = run_falls()
    received = [a["t_received"] - a["t_detected"] for a in falls]
    delivered = [a["t_delivered"] - a["t_detected"] for a in falls]
    return BenchReport(
        scenario_id=Path(scenario_path).name,
        repetitions=n,
        alerts=falls,
        detect_to_received_ms=_stats([float(x) for x in received]),
        detect_to_delivered_ms=_stats([float(x) for x in delivered]),
        chat_ms=chat_ms,
    )
