"""Threshold-based vital-sign monitoring with alert deduplication.

The guard fires on the first out-of-range sample of a sign, stays quiet
for 60 s unless the excursion doubles, and re-arms when the sign returns
to its healthy range.

Run: python3 demos/03_vitals_alerts.py
"""

from remoni.domain import VitalRanges, VitalSample
from remoni.vitals_guard import VitalsGuard, check

r = VitalRanges()
print("healthy ranges (inclusive):")
print(f"  temperature  {r.temp[0]}–{r.temp[1]} °C")
print(f"  heart rate   {r.hr[0]:g}–{r.hr[1]:g} beats/min")
print(f"  respiration  {r.rr[0]:g}–{r.rr[1]:g} breaths/min")
print(f"  systolic     {r.sys[0]:g}–{r.sys[1]:g} mmHg")
print(f"  diastolic    {r.dia[0]:g}–{r.dia[1]:g} mmHg")
print(f"  SpO2         >= {r.spo2_min:g} %")


def sample(t_s: float, **overrides) -> VitalSample:
    base = dict(t=int(t_s * 1000), temp=36.8, hr=74.0, rr=16.0, sys=112.0, dia=72.0, spo2=98.0)
    base.update(overrides)
    return VitalSample(**base)


print("\nper-sample check():")
for v in (sample(0), sample(0, hr=120.0), sample(0, spo2=93.0, temp=38.1)):
    out = check(v)
    desc = ", ".join(f"{x.sign}={x.value:g} ({x.direction.value})" for x in out) or "all in range"
    print(f"  hr={v.hr:g} spo2={v.spo2:g} temp={v.temp:g}  ->  {desc}")

print("\nstreaming guard over a tachycardia episode:")
guard = VitalsGuard()
episode = [
    sample(0, hr=120.0),     # first violation -> alert
    sample(30, hr=122.0),    # within cooldown, no doubling -> quiet
    sample(60, hr=145.0),    # excess doubled (20 -> 45) -> escalation alert
    sample(90, hr=96.0),     # back in range -> cooldown resets
    sample(120, hr=118.0),   # fresh violation -> alert
]
for v in episode:
    alerts = guard.observe("p7", v)
    note = " / ".join(f"ALERT {a.detail['sign']}={a.detail['value']:g}" for a in alerts) or "-"
    print(f"  t={v.t // 1000:>3}s hr={v.hr:g}: {note}")
