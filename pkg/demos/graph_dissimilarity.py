"""Tour of the graph dissimilarity measure.

D combines three terms: divergence of the graphs' node distance
distributions, difference in network node dispersion, and divergence of
alpha-centrality distributions (on the graph and its complement). It is
zero only for structurally indistinguishable graphs and needs no node
correspondence.
"""

from latentgrid.metrics import d_measure, distance_distribution, nnd

P4 = [(0, 1), (1, 2), (2, 3)]  # path
K4 = [(i, j) for i in range(4) for j in range(i + 1, 4)]  # complete
C5 = [(i, (i + 1) % 5) for i in range(5)]  # 5-cycle
STAR5 = [(0, i) for i in range(1, 5)]  # star

print("distance distributions, path on 4 nodes:")
for i, row in enumerate(distance_distribution(4, P4)):
    print(f"  node {i}: {row}")

print(f"\nnode dispersion nnd: path {nnd(4, P4):.4f}, complete {nnd(4, K4):.4f}, "
      f"cycle {nnd(5, C5):.4f} (all nodes alike), star {nnd(5, STAR5):.4f}")

print(f"\nD(path, path)       = {d_measure(4, P4, P4):.6f}")
print(f"D(path, complete)   = {d_measure(4, P4, K4):.6f}")
print(f"D(complete, path)   = {d_measure(4, K4, P4):.6f}  (symmetric)")

relabeled = [(3, 2), (2, 1), (1, 0)]  # same path, nodes renamed
print(f"D(path, relabeled path) = {d_measure(4, P4, relabeled):.2e} "
      "(invariant to node labels)")

print(f"\nD(cycle, star)      = {d_measure(5, C5, STAR5):.6f}")
ring_plus = C5 + [(0, 2)]
print(f"D(cycle, cycle+chord) = {d_measure(5, C5, ring_plus):.6f} "
      "(small structural edit, small D)")
