"""Synthetic jaw-like phantom with known ground-truth landmarks.

The shape is a solid horseshoe tube (the body) in an axial plane, two
vertical rami rising from its ends, and two bumps on each ramus top: a
posterior one (condyle) and an anterior one (coronoid).  It follows the
package-wide axis convention: +y inferior, +z posterior, left at smaller x,
mirror-symmetric about the sagittal plane x == nx//2.

All nine roster landmarks are placed on the foreground boundary by
construction: the five mid-sagittal ones (Id, B, Pg, Gn, Me, top to bottom)
as the anterior-most voxels of chosen rows in the symphysis cross-section,
and the four bump landmarks as the topmost voxels of the bump columns.

Optional degradations: dropping the left condyle, splitting the body into
two parts, carving interior cavities, and adding background noise blobs.
Blobs and cavities are seeded and stay at least 3 voxels away from the
clean surface, so cleanup steps have unambiguous expected results.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .edt import ltdt
from .errors import ValidationError
from .volume import (
    LANDMARK_NAMES,
    BinaryMask,
    Landmark,
    LandmarkSet,
    canonical_landmark_id,
    mask_complement,
)


@dataclass(frozen=True)
class PhantomSpec:
    """Geometry (voxel units), flags, and seed for one phantom."""

    dims: tuple[int, int, int] = (96, 96, 96)
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    seed: int = 0
    arch_radius: float = 30.0
    arch_thickness: float = 8.0      # tube radius of the body
    arch_span_deg: float = 200.0     # total angular span of the arc
    ramus_height: float = 26.0
    ramus_radius: float = 6.0
    condyle_radius: float = 6.0
    coronoid_radius: float = 5.0
    bump_offset: float = 8.0         # z offset of bump centers from the ramus axis
    missing_left_condyle: bool = False
    split_into_two_parts: bool = False
    cavity_count: int = 0
    noise_blob_count: int = 0
    blob_radius: float = 2.0
    cavity_radius: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))
        if len(self.dims) != 3 or min(self.dims) < 24:
            raise ValidationError(f"dims must be 3 values >= 24, got {self.dims}", field="dims")
        if min(self.spacing) <= 0:
            raise ValidationError(f"spacing must be positive, got {self.spacing}", field="spacing")
        for name in ("arch_radius", "arch_thickness", "ramus_height", "ramus_radius",
                     "condyle_radius", "coronoid_radius", "bump_offset", "blob_radius",
                     "cavity_radius"):
            if getattr(self, name) <= 0:
                raise ValidationError("must be positive", field=name)
        if self.arch_thickness < 4:
            raise ValidationError(
                "must be >= 4 so the five mid-sagittal landmark rows stay distinct",
                field="arch_thickness",
            )
        if not (90.0 <= self.arch_span_deg <= 270.0):
            raise ValidationError(f"must be in [90, 270], got {self.arch_span_deg}", field="arch_span_deg")
        if self.cavity_count < 0 or self.noise_blob_count < 0:
            raise ValidationError("counts must be >= 0", field="cavity_count")
        if self.bump_offset <= self.ramus_radius:
            raise ValidationError(
                f"bump_offset {self.bump_offset} must exceed ramus_radius {self.ramus_radius} "
                "so bump tops form clean columns", field="bump_offset",
            )

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @staticmethod
    def from_dict(doc: dict) -> "PhantomSpec":
        known = set(PhantomSpec.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ValidationError(f"unknown fields {sorted(unknown)}", field="phantom_spec")
        try:
            return PhantomSpec(**doc)
        except TypeError as exc:
            raise ValidationError(str(exc), field="phantom_spec")


def _frame(spec: PhantomSpec) -> dict:
    """Derived geometry: centers, endpoints, and landmark anchor rows."""
    nx, ny, nz = spec.dims
    cx = nx // 2
    yb = round(0.65 * ny)            # vertical level of the body
    cz = round(0.55 * nz)            # arc center along z
    theta = np.deg2rad(spec.arch_span_deg) / 2.0
    u = round(spec.arch_radius * np.sin(theta))     # lateral reach of the arc ends
    ez = round(cz - spec.arch_radius * np.cos(theta))
    y_top = round(yb - spec.ramus_height)
    f = {
        "cx": cx, "yb": yb, "cz": cz, "theta": theta,
        "ex_left": cx - u, "ex_right": cx + u, "ez": ez, "y_top": y_top,
    }
    r_big = max(spec.condyle_radius, spec.coronoid_radius)
    lo_y = y_top - r_big
    checks = [
        ("dims", f["ex_left"] - spec.ramus_radius >= 2 and f["ex_right"] + spec.ramus_radius <= nx - 3),
        ("dims", cz - spec.arch_radius - spec.arch_thickness >= 2),
        ("dims", ez + spec.bump_offset + spec.condyle_radius <= nz - 3),
        ("dims", yb + spec.arch_thickness <= ny - 3 and lo_y >= 2),
    ]
    for fieldname, ok in checks:
        if not ok:
            raise ValidationError("phantom geometry does not fit inside dims", field=fieldname)
    return f


def _paint_arch(mask, spec, f, cut: bool):
    nx, ny, nz = spec.dims
    ii = (np.arange(nx) - f["cx"]).astype(np.float64)[:, None, None]
    jj = (np.arange(ny) - f["yb"]).astype(np.float64)[None, :, None]
    kk = (np.arange(nz) - f["cz"]).astype(np.float64)[None, None, :]
    rho = np.hypot(ii, kk)                       # (nx, 1, nz)
    phi = np.arctan2(ii, -kk)                    # 0 at the anterior midline
    band = np.abs(phi) <= f["theta"]
    if cut:
        # wedge removed from the left body; 0.12 rad leaves a gap comfortably
        # wider than a 26-connectivity diagonal, so exactly two parts remain
        theta_cut = -f["theta"] / 2.0
        band &= np.abs(phi - theta_cut) > 0.12
    rt2 = spec.arch_thickness ** 2
    mask |= band & ((rho - spec.arch_radius) ** 2 + jj ** 2 <= rt2)
    # rounded caps at the arc ends (far from any cut wedge)
    for ex in (f["ex_left"], f["ex_right"]):
        mask |= (ii - (ex - f["cx"])) ** 2 + jj ** 2 + (kk - (f["ez"] - f["cz"])) ** 2 <= rt2


def _paint_rami_and_bumps(mask, spec, f):
    nx, ny, nz = spec.dims
    jj = np.arange(ny).astype(np.float64)[None, :, None]
    # distance to the vertical ramus segment: clamp y to [y_top, yb]
    seg_y = np.clip(jj, f["y_top"], f["yb"])
    for ex in (f["ex_left"], f["ex_right"]):
        ii = (np.arange(nx) - ex).astype(np.float64)[:, None, None]
        kk = (np.arange(nz) - f["ez"]).astype(np.float64)[None, None, :]
        mask |= ii ** 2 + (jj - seg_y) ** 2 + kk ** 2 <= spec.ramus_radius ** 2
    for name, ex, dz, r in _bump_table(spec, f):
        if name == "CdL" and spec.missing_left_condyle:
            continue
        ii = (np.arange(nx) - ex).astype(np.float64)[:, None, None]
        kk = (np.arange(nz) - (f["ez"] + dz)).astype(np.float64)[None, None, :]
        jj2 = ((np.arange(ny) - f["y_top"]).astype(np.float64) ** 2)[None, :, None]
        mask |= ii ** 2 + jj2 + kk ** 2 <= r ** 2


def _bump_table(spec: PhantomSpec, f: dict):
    # z offsets are rounded so each bump apex sits on an exact voxel column
    dz = round(spec.bump_offset)
    return (
        ("CdL", f["ex_left"], +dz, spec.condyle_radius),
        ("CdR", f["ex_right"], +dz, spec.condyle_radius),
        ("CorL", f["ex_left"], -dz, spec.coronoid_radius),
        ("CorR", f["ex_right"], -dz, spec.coronoid_radius),
    )


def _place_landmarks(mask: np.ndarray, spec: PhantomSpec, f: dict) -> LandmarkSet:
    cx, yb = f["cx"], f["yb"]
    rt = spec.arch_thickness
    offsets = {"Id": -0.8, "B": -0.4, "Pg": 0.0, "Gn": 0.4, "Me": 0.8}
    entries: dict[str, Landmark] = {}
    for name, frac in offsets.items():
        j = yb + round(frac * (rt - 1))
        row = np.flatnonzero(mask[cx, j, :])
        if row.size == 0:
            raise ValidationError(f"no symphysis voxels in row y={j}", field="dims")
        entries[name] = Landmark(canonical_landmark_id(name), name, (cx, j, int(row[0])), True)
    for name, ex, dz, r in _bump_table(spec, f):
        if name == "CdL" and spec.missing_left_condyle:
            entries[name] = Landmark(canonical_landmark_id(name), name, None, False)
            continue
        col = np.flatnonzero(mask[ex, :, f["ez"] + dz])
        if col.size == 0:
            raise ValidationError(f"no bump voxels in column for {name}", field="dims")
        entries[name] = Landmark(canonical_landmark_id(name), name, (ex, int(col[0]), f["ez"] + dz), True)
    return LandmarkSet(tuple(entries[n] for n in LANDMARK_NAMES))


def _carve_and_sprinkle(mask: np.ndarray, spec: PhantomSpec) -> np.ndarray:
    """Seeded cavities (interior) and noise blobs (background), >= 3 voxels
    from the clean surface."""
    rng = np.random.default_rng(spec.seed)
    clean = BinaryMask(mask.astype(np.uint8), spec.spacing)
    out = mask.copy()
    if spec.cavity_count:
        depth = ltdt(clean).data  # mm distance to background
        cand = np.argwhere(depth >= (spec.cavity_radius + 4.0) * max(spec.spacing))
        if len(cand) < spec.cavity_count:
            raise ValidationError(
                f"phantom interior too thin for {spec.cavity_count} cavities", field="cavity_count"
            )
        picks = cand[rng.choice(len(cand), spec.cavity_count, replace=False)]
        _remove_spheres(out, picks, spec.cavity_radius)
    if spec.noise_blob_count:
        away = ltdt(mask_complement(clean)).data  # mm distance to foreground
        cand = np.argwhere(away >= (spec.blob_radius + 4.0) * max(spec.spacing))
        margin = spec.blob_radius + 1
        nx, ny, nz = spec.dims
        inside = (
            (cand[:, 0] >= margin) & (cand[:, 0] < nx - margin)
            & (cand[:, 1] >= margin) & (cand[:, 1] < ny - margin)
            & (cand[:, 2] >= margin) & (cand[:, 2] < nz - margin)
        )
        cand = cand[inside]
        if len(cand) < spec.noise_blob_count:
            raise ValidationError(
                f"not enough clear background for {spec.noise_blob_count} blobs", field="noise_blob_count"
            )
        picks = cand[rng.choice(len(cand), spec.noise_blob_count, replace=False)]
        _add_spheres(out, picks, spec.blob_radius)
    return out


def _sphere_slices(center, r, dims):
    lo = [max(0, int(np.floor(c - r))) for c in center]
    hi = [min(d, int(np.ceil(c + r)) + 1) for c, d in zip(center, dims)]
    grids = np.ogrid[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
    inside = sum((g - c) ** 2 for g, c in zip(grids, center)) <= r ** 2
    return (slice(lo[0], hi[0]), slice(lo[1], hi[1]), slice(lo[2], hi[2])), inside


def _add_spheres(mask, centers, r):
    for c in centers:
        sl, inside = _sphere_slices(c, r, mask.shape)
        mask[sl] |= inside


def _remove_spheres(mask, centers, r):
    for c in centers:
        sl, inside = _sphere_slices(c, r, mask.shape)
        mask[sl] &= ~inside


def generate(spec: PhantomSpec) -> tuple[BinaryMask, LandmarkSet]:
    """Deterministic phantom mask plus its 9 ground-truth landmarks."""
    f = _frame(spec)
    mask = np.zeros(spec.dims, bool, order="F")
    _paint_arch(mask, spec, f, cut=spec.split_into_two_parts)
    _paint_rami_and_bumps(mask, spec, f)
    landmarks = _place_landmarks(mask, spec, f)
    if spec.cavity_count or spec.noise_blob_count:
        mask = _carve_and_sprinkle(mask, spec)
    return BinaryMask(mask.astype(np.uint8), spec.spacing), landmarks
