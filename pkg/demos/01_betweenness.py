"""
Exact and approximate betweenness
=================================

Compare the exact scores of a random graph with the two sampling estimators.
"""

import numpy as np

from netbench import brandes_exact, graph, kadabra, largest_component, rk, top_k

# a sparse random graph; the samplers need a connected graph, so keep the largest component
g, _ = largest_component(graph.generate_gnm(2000, 6000, seed=3))
print(g.node_count, "nodes,", g.edge_count, "edges")

exact = brandes_exact(g)
print("top 5 exact:", top_k(exact.scores, 5))

# adaptive sampling stops once the bound certifies the error
est = kadabra(g, epsilon=0.01, delta=0.1, seed=0)
print("kadabra samples:", est.samples_used, "of cap", est.omega)
print("kadabra max error:", np.abs(est.scores - exact.scores).max())

# fixed budget from the vertex diameter
fixed = rk(g, 0.01, 0.1, seed=0)
print("rk samples:", fixed.samples_used)
print("rk max error:", np.abs(fixed.scores - exact.scores).max())
