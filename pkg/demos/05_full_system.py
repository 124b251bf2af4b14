"""The whole system over real sockets: cloud, edge, wearable, subscriber.

Spawns the cloud API and an edge node as child processes, subscribes to
the live alert stream, replays the demo scenario (one fall, one SpO2
excursion, one activity) at 30x speed, then asks the assistant about the
ingested data and prints alert latencies.

Run: python3 demos/05_full_system.py
"""

import json
import subprocess
import sys
import tempfile
import threading
import time
from pathlib import Path

import httpx

from remoni.bench import free_port, wait_for_http
from remoni.wearable_sim import Scenario, emit

SCENARIO = Path(__file__).parent / "scenarios" / "demo_day.json"

cloud_port, edge_port, edge_http = free_port(), free_port(), free_port()
cloud_url = f"http://127.0.0.1:{cloud_port}"
data_dir = tempfile.mkdtemp(prefix="remoni-demo-")

children = [
    subprocess.Popen(
        [sys.executable, "-m", "remoni", "cloud", "run",
         "--listen", f"127.0.0.1:{cloud_port}", "--data-dir", data_dir,
         "--edge", f"http://127.0.0.1:{edge_http}"],
    ),
    subprocess.Popen(
        [sys.executable, "-m", "remoni", "edge", "run",
         "--listen", f"127.0.0.1:{edge_port}", "--http", f"127.0.0.1:{edge_http}",
         "--cloud", cloud_url, "--upload-period", "5"],
    ),
]

alerts = []


def subscribe():
    with httpx.stream("GET", f"{cloud_url}/alerts/stream",
                      timeout=httpx.Timeout(5.0, read=60.0)) as resp:
        for line in resp.iter_lines():
            if line.startswith("data: "):
                alerts.append(json.loads(line[6:]))


try:
    wait_for_http(f"{cloud_url}/healthz")
    wait_for_http(f"http://127.0.0.1:{edge_http}/healthz")
    print(f"cloud at {cloud_url}, edge ingest on :{edge_port}")

    threading.Thread(target=subscribe, daemon=True).start()
    time.sleep(0.3)

    scenario = Scenario.load(SCENARIO)
    print(f"replaying {SCENARIO.name}: {scenario.duration_s:.0f}s of data at "
          f"{scenario.speedup:.0f}x ({scenario.duration_s / scenario.speedup:.0f}s wall)")
    summary = emit(scenario, f"127.0.0.1:{edge_port}")
    print(f"session done: {summary.frames_sent}, {summary.bytes_sent} bytes")

    deadline = time.monotonic() + 10
    while time.monotonic() < deadline and len(alerts) < 2:
        time.sleep(0.1)

    print(f"\nalerts delivered to the subscriber ({len(alerts)}):")
    for a in alerts:
        latency = a["t_delivered"] - a["t_detected"]
        what = a["detail"].get("sign") or "fall"
        print(f"  {a['kind']:<18} {what:<6} patient {a['patient_id']}: "
              f"detect->deliver {latency} ms")

    day = time.strftime("%Y-%m-%d", time.gmtime())
    for q in (
        f"What is the current heart rate of patient {scenario.patient_id}?",
        f"Plot patient {scenario.patient_id}'s spo2 today.",
    ):
        out = httpx.post(f"{cloud_url}/chat", json={"question": q}, timeout=30).json()
        print(f"\nQ: {q}\nA: {out['answer_text']}")
finally:
    for child in children:
        child.terminate()
    for child in children:
        try:
            child.wait(timeout=5)
        except subprocess.TimeoutExpired:
            child.kill()
