"""
Grant latency: standard DBA, Fast Intercept, fixed allocation
=============================================================

Runs the shipped ``demo_default`` scenario in the three scheduling modes and
plots the grant latency distribution of each traffic class.
"""

from importlib import resources

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from vpon import Mode, compare, load_config, scenario_from_config

cfg = resources.files("vpon") / "configs" / "demo_default.json"
doc = load_config(cfg)
doc["duration_ns"] = 125_000_000  # 1000 frames is enough for a picture
scenario = scenario_from_config(doc)

report = compare([scenario.with_mode(m) for m in Mode])
for label in report.labels:
    means = report.mean_grant_latency_ns[label]
    print(f"{label:16s}", {k: round(v / 1000, 1) for k, v in means.items()})

fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
bins = np.linspace(0, 450, 91)
for ax, cls in zip(axes, ("LowLatency", "Normal")):
    for label, rep in report.reports.items():
        lat = np.array([s.grant_latency_ns for s in rep.samples if s.tcont_class == cls]) / 1000
        ax.hist(lat, bins=bins, histtype="step", density=True, label=label)
    ax.set_title(f"{cls} T-CONTs")
    ax.set_xlabel("grant latency (us)")
axes[0].legend()
fig.tight_layout()
fig.savefig("latency_comparison.png", dpi=120)
print("wrote latency_comparison.png")
