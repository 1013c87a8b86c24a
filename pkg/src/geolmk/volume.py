"""Core voxel-domain types: volumes, binary masks, landmark sets.

Conventions used across the package:

* A volume has dims ``(nx, ny, nz)`` and a voxel is addressed as
  ``(i, j, k)`` along ``(x, y, z)``.  ``data[i, j, k]`` is the voxel value.
* Flat (linearized) indices run x-fastest: ``flat = i + nx * (j + ny * k)``.
  Arrays are kept Fortran-ordered so the raw buffer matches that order.
* ``x`` is the sagittal-normal axis: "sagittal slice s" means the plane
  ``x == s`` and ``data[s]`` is that slice with in-plane axes ``(y, z)``.
* Anatomical orientation: +y points inferior (down), +z points posterior,
  and "left" structures sit at smaller x.  The phantom generator and the
  landmark decoders both rely on this.
* Spacing is millimeters per voxel step along each axis and may be
  anisotropic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ValidationError

# Serializable dtypes, tag <-> numpy dtype.
DTYPE_TAGS = {
    "u8": np.dtype(np.uint8),
    "i32": np.dtype(np.int32),
    "f32": np.dtype(np.float32),
    "f64": np.dtype(np.float64),
}
_TAG_BY_DTYPE = {v: k for k, v in DTYPE_TAGS.items()}

# Canonical landmark roster, ordered; ids are 1-based positions.
LANDMARK_NAMES = ("Me", "Gn", "Pg", "B", "Id", "CdL", "CdR", "CorL", "CorR")
SPARSE_LANDMARK_NAMES = ("Me", "CdL", "CdR", "CorL", "CorR")
CLOSE_LANDMARK_NAMES = ("Id", "B", "Pg", "Gn", "Me")  # top-to-bottom in y

# Long-form aliases, used only to suggest the canonical spelling.
LANDMARK_LONG_NAMES = {
    "Menton": "Me",
    "Gnathion": "Gn",
    "Pogonion": "Pg",
    "B-point": "B",
    "Infradentale": "Id",
    "Condylion-left": "CdL",
    "Condylion-right": "CdR",
    "Coronoid-left": "CorL",
    "Coronoid-right": "CorR",
}

Vec3 = tuple[int, int, int]


def canonical_landmark_id(name: str) -> int:
    """1-based id of ``name`` in the canonical roster."""
    return LANDMARK_NAMES.index(name) + 1


def _check_spacing(spacing) -> tuple[float, float, float]:
    sp = tuple(float(s) for s in spacing)
    if len(sp) != 3:
        raise ValidationError("expected 3 values", field="spacing")
    if not all(np.isfinite(s) and s > 0 for s in sp):
        raise ValidationError(f"must be positive and finite, got {sp}", field="spacing")
    return sp


@dataclass(frozen=True)
class Volume:
    """A 3D scalar grid with physical voxel spacing.

    Parameters
    ----------
    data : ndarray
        Shape ``(nx, ny, nz)``.  Coerced to Fortran order (x fastest in
        memory) and frozen; dtype must be one of u8/i32/f32/f64.
    spacing : (float, float, float)
        Millimeters per voxel along (x, y, z); strictly positive.
    """

    data: np.ndarray
    spacing: tuple[float, float, float]

    def __post_init__(self):
        arr = np.asfortranarray(self.data)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ValidationError(f"expected a non-empty 3D array, got shape {arr.shape}", field="data")
        if arr.dtype not in _TAG_BY_DTYPE:
            raise ValidationError(f"unsupported dtype {arr.dtype}", field="data")
        arr = arr.copy(order="F") if arr is self.data else arr
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "spacing", _check_spacing(self.spacing))

    @property
    def dims(self) -> Vec3:
        return self.data.shape

    @property
    def dtype_tag(self) -> str:
        return _TAG_BY_DTYPE[self.data.dtype]

    def astype_volume(self, dtype) -> "Volume":
        return Volume(self.data.astype(dtype), self.spacing)


@dataclass(frozen=True)
class BinaryMask(Volume):
    """A Volume restricted to u8 values in {0, 1}; 1 is foreground."""

    def __post_init__(self):
        super().__post_init__()
        if self.data.dtype != np.uint8:
            raise ValidationError(f"mask dtype must be u8, got {self.dtype_tag}", field="data")
        bad = (self.data > 1).sum()
        if bad:
            raise ValidationError(f"{bad} voxels outside {{0, 1}}", field="data")

    @property
    def foreground_count(self) -> int:
        return int(self.data.sum())


def as_mask(data: np.ndarray, spacing) -> BinaryMask:
    """Build a BinaryMask from any array-like of 0/1 (bools accepted)."""
    return BinaryMask(np.asarray(data).astype(np.uint8), spacing)


def mask_complement(m: BinaryMask) -> BinaryMask:
    return BinaryMask((1 - m.data).astype(np.uint8), m.spacing)


def voxel_index(v: Sequence[int], dims: Vec3) -> int:
    """Flat index of voxel (i, j, k): x fastest, then y, then z."""
    i, j, k = (int(c) for c in v)
    nx, ny, nz = dims
    if not (0 <= i < nx and 0 <= j < ny and 0 <= k < nz):
        raise ValidationError(f"voxel {(i, j, k)} outside dims {tuple(dims)}", field="voxel")
    return i + nx * (j + ny * k)


def voxel_coords(flat: int, dims: Vec3) -> Vec3:
    """Inverse of voxel_index."""
    nx, ny, nz = dims
    flat = int(flat)
    if not (0 <= flat < nx * ny * nz):
        raise ValidationError(f"flat index {flat} outside volume of {nx * ny * nz} voxels", field="flat")
    i = flat % nx
    j = (flat // nx) % ny
    k = flat // (nx * ny)
    return (i, j, k)


def euclidean_dist(v: Sequence[float], q: Sequence[float], spacing) -> float:
    """Physical (mm) distance between two voxel coordinates."""
    sx, sy, sz = _check_spacing(spacing)
    return float(
        np.sqrt(
            ((v[0] - q[0]) * sx) ** 2
            + ((v[1] - q[1]) * sy) ** 2
            + ((v[2] - q[2]) * sz) ** 2
        )
    )


# ---------------------------------------------------------------------------
# landmarks

@dataclass(frozen=True)
class Landmark:
    """One named anatomical point; ``present=False`` marks absent anatomy."""

    id: int
    name: str
    voxel: Vec3 | None
    present: bool = True

    def __post_init__(self):
        if self.id < 1:
            raise ValidationError(f"landmark id must be >= 1, got {self.id}", field="id")
        if self.name not in LANDMARK_NAMES:
            hint = _suggest_name(self.name)
            extra = f" (did you mean {hint!r}?)" if hint else ""
            raise ValidationError(f"unknown landmark name {self.name!r}{extra}", field="name")
        if self.present:
            if self.voxel is None:
                raise ValidationError(f"{self.name}: present landmark needs a voxel", field="voxel")
            object.__setattr__(self, "voxel", tuple(int(c) for c in self.voxel))
        elif self.voxel is not None:
            object.__setattr__(self, "voxel", tuple(int(c) for c in self.voxel))


def _suggest_name(name: str) -> str | None:
    import difflib

    if name in LANDMARK_LONG_NAMES:
        return LANDMARK_LONG_NAMES[name]
    pool = list(LANDMARK_NAMES) + list(LANDMARK_LONG_NAMES)
    close = difflib.get_close_matches(name, pool, n=1, cutoff=0.5)
    if close:
        hit = close[0]
        return LANDMARK_LONG_NAMES.get(hit, hit)
    return None


@dataclass(frozen=True)
class LandmarkSet:
    """An ordered collection of landmarks with unique ids and names."""

    entries: tuple[Landmark, ...]

    def __post_init__(self):
        entries = tuple(self.entries)
        ids = [e.id for e in entries]
        names = [e.name for e in entries]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"duplicate landmark ids in {ids}", field="entries")
        if len(set(names)) != len(names):
            raise ValidationError(f"duplicate landmark names in {names}", field="entries")
        object.__setattr__(self, "entries", entries)

    def __iter__(self) -> Iterator[Landmark]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, name: str) -> Landmark | None:
        for e in self.entries:
            if e.name == name:
                return e
        return None

    def __getitem__(self, name: str) -> Landmark:
        lm = self.get(name)
        if lm is None:
            raise ValidationError(f"landmark {name!r} not in set", field="name")
        return lm

    def present(self) -> tuple[Landmark, ...]:
        return tuple(e for e in self.entries if e.present)

    def validate_against(self, dims: Vec3) -> None:
        """Check that every present landmark voxel lies inside dims."""
        for e in self.entries:
            if e.present:
                voxel_index(e.voxel, dims)  # raises when out of range

    def with_entry(self, lm: Landmark) -> "LandmarkSet":
        kept = tuple(e for e in self.entries if e.name != lm.name)
        return LandmarkSet(kept + (lm,))


def landmark_set(items: Iterable[Landmark | tuple]) -> LandmarkSet:
    """Convenience builder; tuples are (name, voxel) or (name, voxel, present)."""
    entries = []
    for it in items:
        if isinstance(it, Landmark):
            entries.append(it)
        else:
            name, voxel = it[0], it[1]
            present = it[2] if len(it) > 2 else True
            entries.append(Landmark(canonical_landmark_id(name), name, voxel, present))
    return LandmarkSet(tuple(entries))
