"""Segmentation cleanup: keep the largest component, fill interior holes."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .volume import BinaryMask

_STRUCT26 = np.ones((3, 3, 3), bool)


def largest_component(m: BinaryMask) -> BinaryMask:
    """Keep only the largest 26-connected foreground component.

    An empty mask passes through unchanged.  Size ties go to the component
    containing the smallest flat (x-fastest) voxel index.
    """
    labels, n = ndimage.label(m.data, structure=_STRUCT26)
    if n <= 1:
        return m
    sizes = np.bincount(labels.ravel(order="F"))[1:]  # skip background count
    best = sizes.max()
    tied = np.flatnonzero(sizes == best) + 1
    if len(tied) > 1:
        flat = labels.ravel(order="F")
        first = {int(lab): int(np.flatnonzero(flat == lab)[0]) for lab in tied}
        keep = min(first, key=first.get)
    else:
        keep = int(tied[0])
    return BinaryMask((labels == keep).astype(np.uint8), m.spacing)


def mask_boundary(m: BinaryMask) -> np.ndarray:
    """Bool array of foreground voxels with a background 6-neighbor.

    Voxels on the volume border count as boundary (outside is background).
    """
    fg = m.data.astype(bool)
    core = ndimage.binary_erosion(fg, structure=ndimage.generate_binary_structure(3, 1), border_value=0)
    return fg & ~core


def fill_holes(m: BinaryMask) -> BinaryMask:
    """Turn enclosed background into foreground.

    A background voxel survives only if it reaches the volume border
    through face-adjacent (6-connected) background; tunnels open at both
    ends therefore stay open.
    """
    filled = ndimage.binary_fill_holes(m.data, structure=ndimage.generate_binary_structure(3, 1))
    return BinaryMask(filled.astype(np.uint8), m.spacing)
