"""Geodesic distance maps over binary masks, their fusion and decoding.

A geodesic map holds, per voxel, the length in millimeters of the shortest
grid path from a source landmark that stays on the foreground; background
and unreachable foreground voxels are +infinity.  Per-landmark maps are
fused by pointwise minimum, quantized into 21 classes, and decoded back to
landmark voxels.  Fusion happens in millimeters first; quantizing before
fusing gives different (wrong) results when bin widths are chosen per map.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import ndimage

from .errors import ValidationError
from .postprocess import mask_boundary
from .volume import (
    SPARSE_LANDMARK_NAMES,
    BinaryMask,
    Landmark,
    LandmarkSet,
    Volume,
    canonical_landmark_id,
)

NUM_CLASSES = 21  # quantized classes 0..20
BACKGROUND_CLASS = 255
FUSED_SOURCE = "fused"

_STRUCT26 = np.ones((3, 3, 3), bool)


@dataclass(frozen=True)
class GeodesicMap(Volume):
    """f64 Volume of geodesic millimeter distances from one source (or fused)."""

    source: str = "?"

    def __post_init__(self):
        super().__post_init__()
        if self.data.dtype != np.float64:
            raise ValidationError(f"geodesic map dtype must be f64, got {self.dtype_tag}", field="data")


@dataclass(frozen=True)
class QuantizedGeodesicMap(Volume):
    """u8 Volume of distance classes 0..20; background is exactly 255."""

    s_bin: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        if self.data.dtype != np.uint8:
            raise ValidationError(f"quantized map dtype must be u8, got {self.dtype_tag}", field="data")
        if not (self.s_bin > 0 and np.isfinite(self.s_bin)):
            raise ValidationError(f"must be positive and finite, got {self.s_bin}", field="s_bin")
        stray = (self.data > NUM_CLASSES - 1) & (self.data != BACKGROUND_CLASS)
        if stray.any():
            raise ValidationError(
                f"{int(stray.sum())} voxels hold classes outside 0..20/255", field="data"
            )


# ---------------------------------------------------------------------------
# shortest paths

@njit(cache=True, nogil=True)
def _dijkstra_flat(mask, nx, ny, nz, oi, oj, ok, step, src, src_d, dist):
    """Single/multi-source Dijkstra on the foreground grid graph.

    Binary heap with lazy deletion; equal keys pop in flat-index order.
    ``dist`` must come in prefilled with +inf and is updated in place.
    """
    cap = 1 << 12
    hd = np.empty(cap, np.float64)
    hi = np.empty(cap, np.int64)
    size = 0
    for s in range(src.shape[0]):
        idx = src[s]
        d0 = src_d[s]
        if d0 < dist[idx]:
            dist[idx] = d0
            # push
            if size == cap:
                cap *= 2
                nhd = np.empty(cap, np.float64)
                nhi = np.empty(cap, np.int64)
                nhd[:size] = hd[:size]
                nhi[:size] = hi[:size]
                hd, hi = nhd, nhi
            hd[size] = d0
            hi[size] = idx
            size += 1
            c = size - 1
            while c > 0:
                p = (c - 1) >> 1
                if hd[c] < hd[p] or (hd[c] == hd[p] and hi[c] < hi[p]):
                    hd[c], hd[p] = hd[p], hd[c]
                    hi[c], hi[p] = hi[p], hi[c]
                    c = p
                else:
                    break
    noff = step.shape[0]
    nxy = nx * ny
    while size > 0:
        d = hd[0]
        idx = hi[0]
        size -= 1
        hd[0] = hd[size]
        hi[0] = hi[size]
        # sift down
        c = 0
        while True:
            l = 2 * c + 1
            if l >= size:
                break
            r = l + 1
            m = l
            if r < size and (hd[r] < hd[l] or (hd[r] == hd[l] and hi[r] < hi[l])):
                m = r
            if hd[m] < hd[c] or (hd[m] == hd[c] and hi[m] < hi[c]):
                hd[c], hd[m] = hd[m], hd[c]
                hi[c], hi[m] = hi[m], hi[c]
                c = m
            else:
                break
        if d > dist[idx]:
            continue  # stale heap entry
        i = idx % nx
        j = (idx // nx) % ny
        k = idx // nxy
        for o in range(noff):
            ii = i + oi[o]
            if ii < 0 or ii >= nx:
                continue
            jj = j + oj[o]
            if jj < 0 or jj >= ny:
                continue
            kk = k + ok[o]
            if kk < 0 or kk >= nz:
                continue
            nidx = ii + nx * jj + nxy * kk
            if mask[nidx] == 0:
                continue
            nd = d + step[o]
            if nd < dist[nidx]:
                dist[nidx] = nd
                if size == cap:
                    cap *= 2
                    nhd = np.empty(cap, np.float64)
                    nhi = np.empty(cap, np.int64)
                    nhd[:size] = hd[:size]
                    nhi[:size] = hi[:size]
                    hd, hi = nhd, nhi
                hd[size] = nd
                hi[size] = nidx
                size += 1
                c = size - 1
                while c > 0:
                    p = (c - 1) >> 1
                    if hd[c] < hd[p] or (hd[c] == hd[p] and hi[c] < hi[p]):
                        hd[c], hd[p] = hd[p], hd[c]
                        hi[c], hi[p] = hi[p], hi[c]
                        c = p
                    else:
                        break


def neighbor_offsets(connectivity: int, spacing) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Offsets (di, dj, dk) and mm step lengths for 6- or 26-connectivity."""
    if connectivity not in (6, 26):
        raise ValidationError(f"connectivity must be 6 or 26, got {connectivity}", field="connectivity")
    offs = []
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            for dk in (-1, 0, 1):
                if (di, dj, dk) == (0, 0, 0):
                    continue
                if connectivity == 6 and abs(di) + abs(dj) + abs(dk) != 1:
                    continue
                offs.append((di, dj, dk))
    offs = np.array(offs, np.int64)
    sx, sy, sz = spacing
    step = np.sqrt((offs[:, 0] * sx) ** 2 + (offs[:, 1] * sy) ** 2 + (offs[:, 2] * sz) ** 2)
    return offs[:, 0].copy(), offs[:, 1].copy(), offs[:, 2].copy(), step


def _snap_to_foreground(m: BinaryMask, lm: Landmark, limit_mm: float) -> tuple[int, int, int]:
    """Nearest foreground voxel within ``limit_mm``; error when none."""
    i, j, k = lm.voxel
    nx, ny, nz = m.dims
    sx, sy, sz = m.spacing
    ri, rj, rk = (int(np.ceil(limit_mm / s)) for s in (sx, sy, sz))
    lo = (max(0, i - ri), max(0, j - rj), max(0, k - rk))
    hi = (min(nx, i + ri + 1), min(ny, j + rj + 1), min(nz, k + rk + 1))
    box = m.data[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
    cand = np.argwhere(box)
    if cand.size == 0:
        raise ValidationError(
            f"landmark {lm.name} at {lm.voxel} has no foreground within {limit_mm} mm", field="landmark"
        )
    cand = cand + np.array(lo)
    d = np.sqrt(
        ((cand[:, 0] - i) * sx) ** 2 + ((cand[:, 1] - j) * sy) ** 2 + ((cand[:, 2] - k) * sz) ** 2
    )
    best = int(np.argmin(d))
    if d[best] > limit_mm:
        raise ValidationError(
            f"landmark {lm.name} at {lm.voxel} is {d[best]:.2f} mm from the mask "
            f"(limit {limit_mm} mm)", field="landmark",
        )
    snapped = tuple(int(c) for c in cand[best])
    warnings.warn(f"landmark {lm.name} snapped from {lm.voxel} to {snapped} ({d[best]:.3f} mm)")
    return snapped


def geodesic_map(
    m: BinaryMask,
    lm: Landmark,
    connectivity: int = 26,
    snap_limit_mm: float = 10.0,
) -> GeodesicMap:
    """Shortest foreground-path distance (mm) from ``lm`` to every voxel.

    Off-mask landmarks are snapped to the nearest foreground voxel when it
    lies within ``snap_limit_mm`` (the snap is reported as a warning).
    Background and unreachable foreground voxels stay +infinity.
    """
    if not lm.present:
        raise ValidationError(f"landmark {lm.name} is absent", field="landmark")
    if m.foreground_count == 0:
        raise ValidationError("mask has no foreground", field="mask")
    voxel = lm.voxel
    if m.data[voxel] == 0:
        voxel = _snap_to_foreground(m, lm, snap_limit_mm)
    nx, ny, nz = m.dims
    oi, oj, ok, step = neighbor_offsets(connectivity, m.spacing)
    dist = np.full(nx * ny * nz, np.inf, np.float64)
    src = np.array([voxel[0] + nx * (voxel[1] + ny * voxel[2])], np.int64)
    src_d = np.zeros(1, np.float64)
    flat_mask = np.ascontiguousarray(m.data.ravel(order="F"))
    _dijkstra_flat(flat_mask, nx, ny, nz, oi, oj, ok, step, src, src_d, dist)
    return GeodesicMap(dist.reshape(m.dims, order="F"), m.spacing, lm.name)


def geodesic_maps(
    m: BinaryMask,
    lms: LandmarkSet,
    names=None,
    connectivity: int = 26,
    threads: int = 1,
    snap_limit_mm: float = 10.0,
) -> tuple[GeodesicMap, ...]:
    """One map per requested present landmark, in request order.

    With ``threads > 1`` landmarks run concurrently; the Dijkstra kernel
    releases the GIL, so worker threads overlap for real.
    """
    if names is None:
        names = [e.name for e in lms.present()]
    picked = []
    for name in names:
        lm = lms.get(name)
        if lm is None:
            raise ValidationError(f"landmark {name!r} not in set", field="names")
        if lm.present:
            picked.append(lm)
    if threads <= 1 or len(picked) <= 1:
        return tuple(geodesic_map(m, lm, connectivity, snap_limit_mm) for lm in picked)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futs = [pool.submit(geodesic_map, m, lm, connectivity, snap_limit_mm) for lm in picked]
        return tuple(f.result() for f in futs)


def default_threads() -> int:
    """Thread count from GEOLMK_THREADS, defaulting to 1."""
    raw = os.environ.get("GEOLMK_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError(f"GEOLMK_THREADS must be an integer, got {raw!r}", field="GEOLMK_THREADS")
    if n < 1:
        raise ValidationError(f"GEOLMK_THREADS must be >= 1, got {n}", field="GEOLMK_THREADS")
    return n


# ---------------------------------------------------------------------------
# fusion and quantization

def fuse_maps(maps) -> GeodesicMap:
    """Pointwise minimum of per-landmark maps (hard minimum, in mm)."""
    maps = list(maps)
    if not maps:
        raise ValidationError("need at least one map to fuse", field="maps")
    first = maps[0]
    for g in maps[1:]:
        if g.dims != first.dims:
            raise ValidationError(f"dims mismatch: {g.dims} vs {first.dims}", field="maps")
        if g.spacing != first.spacing:
            raise ValidationError(f"spacing mismatch: {g.spacing} vs {first.spacing}", field="maps")
    fused = maps[0].data
    for g in maps[1:]:
        fused = np.minimum(fused, g.data)
    return GeodesicMap(fused, first.spacing, FUSED_SOURCE)


def auto_s_bin(g: GeodesicMap) -> float:
    """Bin width (max finite distance)/20 so the top class is reached."""
    finite = g.data[np.isfinite(g.data)]
    if finite.size == 0 or float(finite.max()) == 0.0:
        return 1.0
    return float(finite.max()) / (NUM_CLASSES - 1)


def quantize(g: GeodesicMap, s_bin: float | None = None, mask: BinaryMask | None = None) -> QuantizedGeodesicMap:
    """Quantize mm distances into classes min(floor(d/s_bin), 20).

    ``s_bin=None`` selects the automatic width (max finite distance)/20.
    Background becomes 255.  A +inf voxel is background unless ``mask``
    says it is foreground, in which case it is unreachable and becomes 20.
    """
    if (g.data < 0).any():
        raise ValidationError("geodesic map holds negative distances", field="map")
    auto = s_bin is None
    if auto:
        s_bin = auto_s_bin(g)
    s_bin = float(s_bin)
    if not (s_bin > 0 and np.isfinite(s_bin)):
        raise ValidationError(f"must be positive and finite, got {s_bin}", field="s_bin")
    if mask is not None and mask.dims != g.dims:
        raise ValidationError(f"mask dims {mask.dims} do not match map dims {g.dims}", field="mask")
    finite = np.isfinite(g.data)
    cls = np.full(g.dims, BACKGROUND_CLASS, np.uint8)
    clipped = np.minimum(np.floor(g.data[finite] / s_bin), NUM_CLASSES - 1)
    cls[finite] = clipped.astype(np.uint8)
    if auto and finite.any():
        # the max-distance voxel defines the range; pin it to the top class
        cls[g.data == g.data[finite].max()] = NUM_CLASSES - 1
    if mask is not None:
        cls[(~finite) & (mask.data == 1)] = NUM_CLASSES - 1
    return QuantizedGeodesicMap(cls, g.spacing, s_bin)


# ---------------------------------------------------------------------------
# decoding

def _cluster_depth(in_cluster: np.ndarray, rim: np.ndarray, spacing) -> np.ndarray:
    """Geodesic distance (mm) from the cluster rim, walked inside the cluster.

    All +inf when the rim is empty (cluster has no higher-class neighbor).
    """
    box = np.asfortranarray(in_cluster.astype(np.uint8))
    nx, ny, nz = box.shape
    dist = np.full(box.size, np.inf, np.float64)
    rim_coords = np.argwhere(rim)
    if rim_coords.size:
        src = (rim_coords[:, 0] + nx * (rim_coords[:, 1] + ny * rim_coords[:, 2])).astype(np.int64)
        oi, oj, ok, step = neighbor_offsets(26, spacing)
        _dijkstra_flat(
            np.ascontiguousarray(box.ravel(order="F")), nx, ny, nz,
            oi, oj, ok, step, src, np.zeros(len(src), np.float64), dist,
        )
    return dist.reshape(box.shape, order="F")


def decode_landmarks(
    q: QuantizedGeodesicMap | GeodesicMap,
    m: BinaryMask,
    expected=SPARSE_LANDMARK_NAMES,
) -> LandmarkSet:
    """Recover landmark voxels from a fused (quantized) map.

    Minimum-class voxels are clustered (26-connectivity).  Each cluster is a
    geodesic ball around the landmark that produced it, so the landmark is
    the cluster voxel geodesically deepest from the cluster rim (the voxels
    bordering a higher class); candidates are kept to the mask boundary
    because landmarks live on the object surface, and residual ties resolve
    toward the cluster centroid.  Clusters are then named by region:
    inferior -> Me, superior splits into anterior/posterior (Cor/Cd) and
    left/right at the superior part's own centroid.  Regions with no cluster
    come back with present=False.
    """
    expected = tuple(expected)
    unknown = [n for n in expected if n not in SPARSE_LANDMARK_NAMES]
    if unknown:
        raise ValidationError(f"no decode region for {unknown}", field="expected")
    if m.dims != q.dims:
        raise ValidationError(f"mask dims {m.dims} do not match map dims {q.dims}", field="mask")
    if not isinstance(q, QuantizedGeodesicMap):
        q = quantize(q, mask=m)
    valid = (m.data == 1) & (q.data != BACKGROUND_CLASS)
    if not valid.any():
        raise ValidationError("map has no decodable foreground voxels", field="map")
    c_min = q.data[valid].min()
    labels, n_found = ndimage.label(valid & (q.data == c_min), structure=_STRUCT26)
    if n_found > len(expected):
        raise ValidationError(
            f"found {n_found} candidate clusters for {len(expected)} expected landmarks", field="map"
        )
    higher = valid & (q.data != c_min)
    near_higher = ndimage.binary_dilation(higher, structure=_STRUCT26)

    boundary = mask_boundary(m)
    fg_coords = np.argwhere(m.data == 1)
    y_split = fg_coords[:, 1].mean()
    superior = fg_coords[fg_coords[:, 1] <= y_split]
    # with every foreground voxel on one side of y_split the partition
    # degenerates; fall back to the global centroid for the x/z splits
    sup_ref = superior if superior.size else fg_coords
    x_split = sup_ref[:, 0].mean()
    z_split = sup_ref[:, 2].mean()

    found: dict[str, tuple[int, int, int]] = {}
    for lab in range(1, n_found + 1):
        coords = np.argwhere(labels == lab)
        centroid = coords.mean(axis=0)
        lo = coords.min(axis=0)
        hi = coords.max(axis=0) + 1
        crop = tuple(slice(a, b) for a, b in zip(lo, hi))
        in_cluster = labels[crop] == lab
        depth = _cluster_depth(in_cluster, in_cluster & near_higher[crop], m.spacing)
        on_bnd = coords[boundary[coords[:, 0], coords[:, 1], coords[:, 2]]]
        pool = on_bnd if on_bnd.size else coords
        local = pool - lo
        pool_depth = depth[local[:, 0], local[:, 1], local[:, 2]]
        d2 = ((pool - centroid) ** 2).sum(axis=1)
        # deepest first, then nearest the centroid, then the smallest flat
        # (x-fastest) index: sort keys k, j, i
        order = np.lexsort((pool[:, 0], pool[:, 1], pool[:, 2], d2, -pool_depth))
        vx = tuple(int(c) for c in pool[order[0]])
        if vx[1] > y_split:
            name = "Me"
        else:
            side = "L" if vx[0] < x_split else "R"
            name = ("Cd" if vx[2] > z_split else "Cor") + side
        if name in found:
            raise ValidationError(
                f"two candidates decode to {name}: {found[name]} and {vx}", field="map"
            )
        if name not in expected:
            raise ValidationError(f"candidate at {vx} decodes to unexpected {name}", field="map")
        found[name] = vx

    entries = []
    for name in expected:
        if name in found:
            entries.append(Landmark(canonical_landmark_id(name), name, found[name], True))
        else:
            entries.append(Landmark(canonical_landmark_id(name), name, None, False))
    return LandmarkSet(tuple(entries))
