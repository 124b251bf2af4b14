"""The offline assistant pipeline over a seeded historical day.

A scripted day of vitals and snapshots is streamed through an in-process
edge node into the store; the engine then answers the four standing
question types (instant vitals, historical vitals, image retrieval,
plotting) with the deterministic grammar + template backends. No network,
no external models.

Run: python3 demos/04_assistant.py
"""

import tempfile
from datetime import date, datetime, timezone
from pathlib import Path

from remoni import protocol
from remoni.domain import Patient
from remoni.edge import EdgeNode
from remoni.nlp import Engine
from remoni.store import Store
from remoni.wearable_sim import Event, Scenario, build_frames

DAY_START = int(datetime(2025, 1, 9, 8, 0, tzinfo=timezone.utc).timestamp() * 1000)


class StoreCloud:
    """Routes edge uploads straight into a local store (no HTTP)."""

    def __init__(self, store):
        self.store = store
        self.alerts = []

    def post_alert(self, alert):
        self.alerts.append(alert)
        return True

    def post_batch(self, batch):
        self.store.append(batch)
        return True


store = Store(Path(tempfile.mkdtemp(prefix="remoni-demo-")) / "store")
node = EdgeNode(cloud=StoreCloud(store))

scenario = Scenario(
    patient_id="p7", duration_s=600.0, seed=7,
    vitals_period_s=50.0, snapshot_period_s=120.0,
    idle_activity="reading", t0_ms=DAY_START,
    events=(Event(t_s=200.0, kind="activity", name="drinking", duration_s=60.0, emotion="happy"),),
)
frames = [protocol.Frame.hello("demo-watch", "p7")]
frames += [f for _, f in build_frames(scenario, DAY_START)]
frames.append(protocol.Frame(kind="bye"))
node.handle_session(iter(frames))
print(f"seeded day ingested: frames {node.stats}, alerts {len(node.cloud.alerts)}")

engine = Engine(
    store=store,
    registry={"p7": Patient("p7", "Alex Doe", date(1950, 3, 2), notes="demo patient")},
    edge_fetch=node.get_instant,
)
now = datetime(2025, 1, 10, 9, 0, tzinfo=timezone.utc)

questions = [
    "What is the current heart rate of patient p7?",
    "What was patient p7's heart rate on 2025-01-09?",
    "Show me a picture of patient p7.",
    "What was patient p7 doing on 2025-01-09?",
    "Plot patient p7's heart rate on 2025-01-09.",
]
for q in questions:
    out = engine.answer(q, now=now)
    print(f"\nQ: {q}")
    print(f"A: {out.answer_text}")
    extras = []
    if out.plot:
        extras.append(f"plot: {len(out.plot.series)} series, "
                      f"{sum(len(s['points']) for s in out.plot.series)} points")
    if out.image:
        extras.append(f"image: {out.image.mime}, {len(out.image.media)} bytes")
    stages = ", ".join(f"{k[:-3]} {v:.1f}ms" for k, v in out.timings_ms.items() if k != "total_ms")
    extras.append(f"stages: {stages}")
    print("   " + "; ".join(extras))
