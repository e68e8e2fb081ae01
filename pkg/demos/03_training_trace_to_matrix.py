"""From a synthetic training run to a communication matrix and heatmap.

Generates the bucketed data-parallel image-classification profile on four
GPUs, runs the full analysis pipeline in process, prints the per-type call
statistics, and writes the combined matrix both as a deterministic SVG
heatmap and as a matplotlib figure.

Outputs land in demos/out/.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from commtrace import analyze_events, render_heatmap, resnet_like_preset
from commtrace.workload import generate_training_trace

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

cfg = resnet_like_preset(4)
events = generate_training_trace(cfg)
result = analyze_events(events)

print(f"{len(events)} events -> {result.stats.instances} collective instances\n")
print(f"{'type':20s} {'calls':>8s} {'payload bytes':>16s} {'wire bytes':>16s}")
for name, st in result.stats.types.items():
    if st.call_count:
        print(f"{name:20s} {st.call_count:8d} {st.payload_bytes:16d} {st.wire_bytes:16d}")

svg_path = OUT / "resnet_combined.svg"
svg_path.write_text(render_heatmap(result.combined))
print(f"\nwrote {svg_path}")

# matplotlib view of the same matrix, log scale like the SVG renderer
cells = result.combined.as_array().astype(float)
fig, ax = plt.subplots(figsize=(5, 4))
im = ax.imshow(np.log10(1 + cells), cmap="plasma")
labels = result.combined.labels()
ax.set_xticks(range(len(labels)), labels)
ax.set_yticks(range(len(labels)), labels)
ax.set_xlabel("destination")
ax.set_ylabel("source")
fig.colorbar(im, label="log10(1 + bytes)")
fig.tight_layout()
png_path = OUT / "resnet_combined.png"
fig.savefig(png_path, dpi=120)
print(f"wrote {png_path}")
