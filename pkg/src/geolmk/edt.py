"""Exact Euclidean distance transforms on anisotropic voxel grids.

``ltdt`` gives every voxel its exact millimeter distance to the nearest
background voxel (zero on background); ``sltdt`` is the signed variant,
positive on foreground and negative on background.

The transform is separable: a first sweep finds per-line distances along x,
then two lower-envelope passes over squared distances (one per remaining
axis) complete the exact 3D result.  Squared distances are kept in float64
throughout, so results are exact integers for unit spacing.
"""

from __future__ import annotations

import warnings

import numpy as np
from numba import njit

from .volume import BinaryMask, Volume, mask_complement

# A Volume of f64 millimeter distances; sign encodes inside/outside for sltdt.
DistanceField = Volume


@njit(cache=True, nogil=True)
def _sweep_x(site: np.ndarray, sx: float) -> np.ndarray:
    """Squared mm distance to the nearest site voxel along each x line."""
    nx, ny, nz = site.shape
    out = np.empty((nx, ny, nz), np.float64)
    big = nx + 2
    for k in range(nz):
        for j in range(ny):
            d = big
            for i in range(nx):
                d = 0 if site[i, j, k] else d + 1
                out[i, j, k] = d
            d = big
            for i in range(nx - 1, -1, -1):
                d = 0 if site[i, j, k] else d + 1
                if d < out[i, j, k]:
                    out[i, j, k] = d
            for i in range(nx):
                d = out[i, j, k]
                out[i, j, k] = np.inf if d >= big else (d * sx) * (d * sx)
    return out


@njit(cache=True, nogil=True)
def _envelope_line(f: np.ndarray, s2: float, v: np.ndarray, z: np.ndarray, out: np.ndarray) -> None:
    """1D lower envelope of parabolas q -> f[q] + s2*(p-q)^2.

    Infinite heights (lines with no reachable site) are skipped; if every
    height is infinite the output line stays infinite.
    """
    n = f.shape[0]
    k = -1
    for q in range(n):
        fq = f[q]
        if fq == np.inf:
            continue
        if k < 0:
            k = 0
            v[0] = q
            z[0] = -np.inf
            z[1] = np.inf
            continue
        while True:
            vk = v[k]
            s = (fq + s2 * q * q - (f[vk] + s2 * vk * vk)) / (2.0 * s2 * (q - vk))
            if s <= z[k]:
                k -= 1
                if k < 0:
                    break
            else:
                break
        k += 1
        v[k] = q
        z[k] = s if k > 0 else -np.inf
        z[k + 1] = np.inf
    if k < 0:
        for p in range(n):
            out[p] = np.inf
        return
    k = 0
    for p in range(n):
        while z[k + 1] < p:
            k += 1
        dq = p - v[k]
        out[p] = s2 * dq * dq + f[v[k]]


@njit(cache=True, nogil=True)
def _envelope_y(sq: np.ndarray, sy: float) -> np.ndarray:
    nx, ny, nz = sq.shape
    out = np.empty((nx, ny, nz), np.float64)
    f = np.empty(ny, np.float64)
    res = np.empty(ny, np.float64)
    v = np.empty(ny, np.int64)
    z = np.empty(ny + 1, np.float64)
    for k in range(nz):
        for i in range(nx):
            for j in range(ny):
                f[j] = sq[i, j, k]
            _envelope_line(f, sy * sy, v, z, res)
            for j in range(ny):
                out[i, j, k] = res[j]
    return out


@njit(cache=True, nogil=True)
def _envelope_z(sq: np.ndarray, sz: float) -> np.ndarray:
    nx, ny, nz = sq.shape
    out = np.empty((nx, ny, nz), np.float64)
    f = np.empty(nz, np.float64)
    res = np.empty(nz, np.float64)
    v = np.empty(nz, np.int64)
    z = np.empty(nz + 1, np.float64)
    for j in range(ny):
        for i in range(nx):
            for k in range(nz):
                f[k] = sq[i, j, k]
            _envelope_line(f, sz * sz, v, z, res)
            for k in range(nz):
                out[i, j, k] = res[k]
    return out


def _edt_sq(site: np.ndarray, spacing) -> np.ndarray:
    """Exact squared mm distance to the nearest nonzero voxel of ``site``."""
    sx, sy, sz = spacing
    sq = _sweep_x(site, sx)
    sq = _envelope_y(sq, sy)
    sq = _envelope_z(sq, sz)
    return sq


def ltdt(m: BinaryMask) -> DistanceField:
    """Exact distance (mm) to the nearest background voxel; 0 on background.

    When the mask has no background at all every voxel is +infinity and a
    warning is emitted.
    """
    sites = (m.data == 0).astype(np.uint8)
    if not sites.any():
        warnings.warn("mask has no background; distance field is +inf everywhere")
        return Volume(np.full(m.dims, np.inf, np.float64), m.spacing)
    return Volume(np.sqrt(_edt_sq(sites, m.spacing)), m.spacing)


def sltdt(m: BinaryMask) -> DistanceField:
    """Signed distance: +ltdt(m) on foreground, -distance-to-foreground on background.

    Degenerate masks keep the sign convention: all-foreground gives +inf
    everywhere, all-background gives -inf everywhere (with a warning).
    """
    if not m.data.any():
        warnings.warn("mask has no foreground; signed distance is -inf everywhere")
        return Volume(np.full(m.dims, -np.inf, np.float64), m.spacing)
    inner = ltdt(m)  # warns and returns +inf everywhere when background is empty
    if not (m.data == 0).any():
        return inner
    outer = ltdt(mask_complement(m))
    return Volume(inner.data - outer.data, m.spacing)
