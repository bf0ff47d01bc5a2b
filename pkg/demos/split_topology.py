"""
Walk through cluster growth on a three-slice toy volume with one split.

Run with ``python3 demos/split_topology.py``.
"""

import numpy as np

from rootscc.roi import reconstruct_labeled_volume
from rootscc.scc import scc_cluster
from rootscc.slices import BinarySlice, extract_slice_regions


def toy_masks():
    m = np.zeros((3, 4, 10), dtype=bool)
    m[0, :, 0:2] = m[1, :, 0:2] = True          # a root ending after slice 1
    m[0, :, 5:7] = True
    m[1, :, 5:9] = True                          # widens, then splits
    m[2, :, 5] = m[2, :, 8] = True
    m[2, 2:4, 2:4] = True                        # a new root starting at slice 2
    return m


def main():
    masks = toy_masks()
    regions = [extract_slice_regions(BinarySlice(s, z)) for z, s in enumerate(masks)]
    for z, rs in enumerate(regions):
        print(f"slice {z}: " + ", ".join(f"region {r.region_id[1]} ({r.size} px)" for r in rs))
    cs = scc_cluster(regions)
    print()
    for c in cs.retired:
        print(f"cluster {c.cluster_id}: retired after splitting into "
              f"{[k.cluster_id for k in cs.children_of(c.cluster_id)]}")
    for c in cs:
        path = " -> ".join(f"S{z}.r{i}" for z, i in (r.region_id for r in c.regions))
        origin = f"child {c.split_ordinal} of {c.parent}" if c.parent else "seeded"
        print(f"cluster {c.cluster_id} [{c.status}, {origin}]: {path}")
    lv = reconstruct_labeled_volume(cs, (3, 10, 4))
    print(f"\nvoxels owned by more than one cluster: {len(lv.multi_owner)}")


if __name__ == "__main__":
    main()
