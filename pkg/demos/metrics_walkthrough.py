"""Confusion matrices, per-class PRF, ROC curves, and report files."""

import tempfile
from pathlib import Path

import numpy as np

from colorvit import metrics as mx
from colorvit.plots import write_plots

rng = np.random.default_rng(11)
names = ("glioma", "healthy", "meningioma", "pituitary")

# synthesize scores for 60 samples: mostly right, deliberately noisy
labels = np.repeat(np.arange(4), 15)
scores = rng.uniform(0.01, 0.3, size=(60, 4))
scores[np.arange(60), labels] += rng.uniform(0.0, 0.6, size=60)
scores /= scores.sum(axis=1, keepdims=True)

report = mx.full_report(scores, labels, names)
print(mx.report_text(report))

cm = report.confusion
print("confusion rows are true classes:")
print(cm)
print("trace", np.trace(cm), "of", labels.size, "=> accuracy", report.accuracy)

# one curve per class, each swept one-vs-rest
for name, curve in zip(names, report.curves):
    print(f"{name}: {len(curve.fpr)} vertices, "
          f"AUC {mx.auc(curve):.4f}")

out = Path(tempfile.mkdtemp(prefix="metrics_demo_"))
mx.write_report(report, out)
write_plots(report, out)
print("wrote", sorted(p.name for p in out.iterdir()), "to", out)
