import numpy as np

from freqgcn.graph import SkeletonTopology


def random_connected_topology(rng: np.random.Generator, num_joints: int, extra_edges: int = 0):
    """Random spanning tree plus optional extra edges; always connected."""
    edges = set()
    for j in range(1, num_joints):
        edges.add((int(rng.integers(0, j)), j))
    target = min(num_joints - 1 + extra_edges, num_joints * (num_joints - 1) // 2)
    while len(edges) < target:
        i, j = rng.integers(0, num_joints, size=2)
        if i != j:
            edges.add((min(int(i), int(j)), max(int(i), int(j))))
    return SkeletonTopology(
        num_joints=num_joints,
        edges=tuple(sorted(edges)),
        root=0,
        neck=1 if num_joints > 1 else 0,
    )
