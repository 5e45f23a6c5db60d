"""Build both hypergraphs a model uses: spatial hyperedges from sensor
distances and temporal hyperedges from DTW similarity of the signals."""

import numpy as np

from sthode.data import synth_generate
from sthode.hypergraph import (
    GeoGraph,
    build_geo_adjacency,
    build_spatial_hyperedges,
    build_temporal_hypergraph,
    dtw_distance,
    normalized_transform,
)

# --- spatial: hop neighborhoods on a thresholded Gaussian kernel ------------
edges = [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 2.5), (3, 4, 1.0), (1, 4, 3.0)]
geo = build_geo_adjacency(edges, n=5, sigma=2.0, eps=0.1)
print("adjacency\n", np.round(geo.adjacency, 3))

spatial = build_spatial_hyperedges(geo, radius=2)
print("spatial incidence (%d nodes, %d hyperedges)" % spatial.incidence.shape)
for j in range(spatial.n_hyperedges):
    members = np.flatnonzero(spatial.incidence[:, j])
    print(f"  e{j}: nodes {list(members)}  weight {spatial.weights[j]:.0f}")

a = normalized_transform(spatial)
print("transform symmetric:", np.allclose(a, a.T),
      " spectrum: [%.3f, %.3f]" % tuple(np.linalg.eigvalsh(a)[[0, -1]]))

# --- temporal: DTW nearest neighbours over training series ------------------
s = synth_generate(8, 600, seed=3)
series = s.dataset.training_series()
print("\nDTW(node0, node1) =", round(dtw_distance(series[0], series[1]), 2))
print("DTW(node0, node7) =", round(dtw_distance(series[0], series[7]), 2))

temporal = build_temporal_hypergraph(series, r=3)
for j in range(temporal.n_hyperedges):
    members = [int(i) for i in np.flatnonzero(temporal.incidence[:, j])]
    print(f"  hyperedge of node {j}: {members}")
print("nodes 0-3 and 4-7 share generative phases, which shapes the hyperedges")

# round-trip through the text format
assert temporal.to_text() == type(temporal).from_text(temporal.to_text()).to_text()
print("text round-trip ok")
