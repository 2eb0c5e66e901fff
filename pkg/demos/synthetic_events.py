"""Walk through the synthetic event generator.

Shows the ground-truth graph, the per-class signatures, how amplitude
decays with hop distance from the epicenter, and how frequency events
arrive later at distant nodes.
"""

import numpy as np

from latentgrid.synth import SynthConfig, generate_event, generate_graph

graph = generate_graph(n_nodes=8, target_edges=12, seed=4)
print(f"ground-truth graph: {graph.n_nodes} nodes, edges {graph.edge_list()}")

cfg = SynthConfig(noise_std=0.0)

for label in ("line_outage", "xfmr_outage", "frequency_event", "normal"):
    sample = generate_event(graph, label, seed=2, noise_std=0.0, config=cfg)
    dist = graph.distances_from(sample.epicenter)
    dev = sample.values - np.array([1.0, 0.0], dtype=np.float32)[None, :, None]
    peak = np.abs(dev).max(axis=(1, 2))
    print(f"\n{label} (epicenter node {sample.epicenter})")
    for d in range(dist.max() + 1):
        nodes = np.flatnonzero(dist == d)
        print(f"  hop {d}: nodes {[int(v) for v in nodes]}, peak deviation "
              f"{peak[nodes].mean():.4f}")

sample = generate_event(graph, "frequency_event", seed=2, noise_std=0.0, config=cfg)
dist = graph.distances_from(sample.epicenter)
print("\nfrequency event onsets (first sample where df/dt > 0):")
for i in np.argsort(dist):
    rocof = sample.values[i, 1]
    onset = int(np.argmax(rocof > 1e-9)) if rocof.max() > 0 else -1
    print(f"  node {i} at hop {dist[i]}: onset sample {onset}")

noisy = generate_event(graph, "frequency_event", seed=2, config=SynthConfig())
print(f"\nwith default noise the same event has per-node ROCOF SNR about "
      f"{SynthConfig().rocof_peak / (SynthConfig().noise_std * SynthConfig().rocof_noise_scale):.1f}, "
      "so classifying single nodes is unreliable and aggregation over the "
      "interaction graph is what makes the task solvable.")
