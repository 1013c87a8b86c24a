"""Closely-spaced landmark sequences on the mid-sagittal boundary.

The five chin landmarks (Id, B, Pg, Gn, Me, top to bottom) sit within a
couple of voxels of each other on the anterior symphysis boundary, too
close for volumetric map decoding.  They are handled in 2D instead: the
sagittal slice through Menton is cropped to its foreground (plus a 2-voxel
margin), its in-plane 4-neighbor boundary is resampled to a fixed 64x64
grid, and each row keeps only its anterior-most boundary column.  A 64-bit
label vector flags the rows holding landmarks.

Decoding anchors Me to the bottom-most flagged row and fills names upward,
so a sequence with fewer than five flags leaves the topmost names absent.

``pca_augment`` builds a linear shape model over (profile columns +
landmark rows) and samples new plausible sequences with uniform
coefficients bounded per component by a multiple of its standard
deviation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ValidationError
from .volume import (
    CLOSE_LANDMARK_NAMES,
    BinaryMask,
    Landmark,
    LandmarkSet,
    canonical_landmark_id,
)

SEQ_SIZE = 64
EMPTY = -1  # profile sentinel for rows with no boundary pixel


@dataclass(frozen=True)
class BoundarySequence:
    """64-row boundary profile of one sagittal slice plus landmark flags."""

    profile: np.ndarray        # (64,) int16, anterior-most column or EMPTY
    labels: np.ndarray         # (64,) uint8 in {0, 1}, at most five ones
    source_slice: int          # sagittal x index the slice came from
    crop_origin: tuple[int, int]  # (y0, z0) of the crop in volume coordinates
    crop_size: tuple[int, int]    # (height, width) of the crop

    def __post_init__(self):
        prof = np.asarray(self.profile, np.int16).copy()
        lab = np.asarray(self.labels, np.uint8).copy()
        if prof.shape != (SEQ_SIZE,) or lab.shape != (SEQ_SIZE,):
            raise ValidationError(f"profile/labels must have shape ({SEQ_SIZE},)", field="profile")
        if ((prof < EMPTY) | (prof >= SEQ_SIZE)).any():
            raise ValidationError(f"profile values must be {EMPTY} or in [0, {SEQ_SIZE})", field="profile")
        if ((lab != 0) & (lab != 1)).any():
            raise ValidationError("labels must be 0/1", field="labels")
        if int(lab.sum()) > len(CLOSE_LANDMARK_NAMES):
            raise ValidationError(f"at most {len(CLOSE_LANDMARK_NAMES)} rows may be flagged", field="labels")
        if (lab.astype(bool) & (prof == EMPTY)).any():
            raise ValidationError("flagged rows must have a boundary column", field="labels")
        h, w = (int(v) for v in self.crop_size)
        if h < 1 or w < 1:
            raise ValidationError(f"crop_size must be positive, got {self.crop_size}", field="crop_size")
        prof.flags.writeable = False
        lab.flags.writeable = False
        object.__setattr__(self, "profile", prof)
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "source_slice", int(self.source_slice))
        object.__setattr__(self, "crop_origin", tuple(int(v) for v in self.crop_origin))
        object.__setattr__(self, "crop_size", (h, w))


def _to_grid(src: int, size: int) -> int:
    """Source index -> 64-grid row/column under nearest-neighbor resampling."""
    return int(np.floor((src + 0.5) * SEQ_SIZE / size))


def _from_grid(dst: int, size: int) -> int:
    """64-grid row/column -> the source index it samples."""
    return int(np.floor((dst + 0.5) * size / SEQ_SIZE))


def _grid_rows_for(src: int, size: int) -> list[int]:
    """All 64-grid rows that sample source row ``src`` (may be empty)."""
    return [r for r in range(SEQ_SIZE) if _from_grid(r, size) == src]


def anchored_names(count: int) -> tuple[str, ...]:
    """Names for ``count`` flagged rows: Me at the bottom, filling upward."""
    if not (1 <= count <= len(CLOSE_LANDMARK_NAMES)):
        raise ValidationError(f"count must be 1..{len(CLOSE_LANDMARK_NAMES)}, got {count}", field="count")
    return CLOSE_LANDMARK_NAMES[-count:]


def extract_boundary_sequence(m: BinaryMask, lms: LandmarkSet) -> BoundarySequence:
    """Encode the sagittal slice through Menton as a boundary sequence."""
    me = lms.get("Me")
    if me is None or not me.present:
        raise ValidationError("Menton (Me) must be present to pick the slice", field="landmarks")
    s = me.voxel[0]
    nx = m.dims[0]
    if not (0 <= s < nx):
        raise ValidationError(f"Menton slice {s} outside volume", field="landmarks")
    sl = m.data[s].astype(bool)  # (ny, nz), in-plane axes (y, z)
    if not sl.any():
        raise ValidationError(f"sagittal slice x={s} has no foreground", field="mask")
    ys, zs = np.nonzero(sl)
    y0 = max(0, int(ys.min()) - 2)
    y1 = min(sl.shape[0], int(ys.max()) + 3)
    z0 = max(0, int(zs.min()) - 2)
    z1 = min(sl.shape[1], int(zs.max()) + 3)
    crop = sl[y0:y1, z0:z1]
    h, w = crop.shape
    core = ndimage.binary_erosion(crop, structure=ndimage.generate_binary_structure(2, 1), border_value=0)
    boundary = crop & ~core
    rows = np.array([_from_grid(r, h) for r in range(SEQ_SIZE)])
    cols = np.array([_from_grid(c, w) for c in range(SEQ_SIZE)])
    img = boundary[np.ix_(rows, cols)]
    profile = np.full(SEQ_SIZE, EMPTY, np.int16)
    for r in range(SEQ_SIZE):
        hit = np.flatnonzero(img[r])
        if hit.size:
            profile[r] = hit[0]  # anterior-most (smallest z) boundary column

    labels = np.zeros(SEQ_SIZE, np.uint8)
    taken: dict[int, str] = {}
    for name in CLOSE_LANDMARK_NAMES:
        lm = lms.get(name)
        if lm is None or not lm.present:
            continue
        if lm.voxel[0] != s:
            warnings.warn(f"{name} lies on slice x={lm.voxel[0]}, not Menton's x={s}; skipped")
            continue
        grid_rows = _grid_rows_for(lm.voxel[1] - y0, h)
        if not grid_rows:
            raise ValidationError(f"{name}'s row was lost in the 64-grid rescale", field="landmarks")
        r = grid_rows[len(grid_rows) // 2]
        if r in taken:
            raise ValidationError(
                f"{taken[r]} and {name} collapse onto grid row {r} after rescaling", field="landmarks"
            )
        if profile[r] == EMPTY:
            raise ValidationError(f"{name}'s grid row {r} has no boundary pixel", field="landmarks")
        taken[r] = name
        labels[r] = 1
    return BoundarySequence(profile, labels, s, (y0, z0), (h, w))


def decode_sequence(seq: BoundarySequence) -> LandmarkSet:
    """Name the flagged rows and map them back to volume voxels.

    Returns all five closely-spaced landmarks; names above the flagged
    count come back with present=False.
    """
    rows = np.flatnonzero(seq.labels)
    if rows.size == 0:
        raise ValidationError("no rows are flagged", field="labels")
    names = anchored_names(int(rows.size))
    h, w = seq.crop_size
    y0, z0 = seq.crop_origin
    found = {}
    for name, r in zip(names, rows):
        col = int(seq.profile[r])
        voxel = (seq.source_slice, y0 + _from_grid(int(r), h), z0 + _from_grid(col, w))
        found[name] = voxel
    entries = []
    for name in CLOSE_LANDMARK_NAMES:
        if name in found:
            entries.append(Landmark(canonical_landmark_id(name), name, found[name], True))
        else:
            entries.append(Landmark(canonical_landmark_id(name), name, None, False))
    return LandmarkSet(tuple(entries))


# ---------------------------------------------------------------------------
# shape model

def _filled_profile(prof: np.ndarray) -> np.ndarray:
    """Empty rows carried as the nearest non-empty row's column value."""
    idx = np.flatnonzero(prof != EMPTY)
    if idx.size == 0:
        raise ValidationError("profile has no boundary pixels", field="profile")
    out = prof.astype(np.float64)
    for r in range(SEQ_SIZE):
        if prof[r] == EMPTY:
            near = idx[np.argmin(np.abs(idx - r))]  # tie -> the upper row
            out[r] = prof[near]
    return out


def _slot_rows(seq: BoundarySequence) -> dict[str, int]:
    rows = np.flatnonzero(seq.labels)
    if rows.size == 0:
        return {}
    return dict(zip(anchored_names(int(rows.size)), (int(r) for r in rows)))


def _vectorize(seqs) -> tuple[np.ndarray, list[str], np.ndarray]:
    """Feature matrix (profile columns + landmark slot rows) and metadata."""
    slot_values: dict[str, list[float]] = {n: [] for n in CLOSE_LANDMARK_NAMES}
    per_seq_rows = []
    profs = []
    for seq in seqs:
        profs.append(_filled_profile(seq.profile))
        rows = _slot_rows(seq)
        per_seq_rows.append(rows)
        for n, r in rows.items():
            slot_values[n].append(float(r))
    slots = [n for n in CLOSE_LANDMARK_NAMES if slot_values[n]]
    slot_means = {n: float(np.mean(slot_values[n])) for n in slots}
    rows_mat = np.empty((len(seqs), len(slots)))
    for i, rows in enumerate(per_seq_rows):
        for j, n in enumerate(slots):
            rows_mat[i, j] = rows.get(n, slot_means[n])
    X = np.hstack([np.vstack(profs), rows_mat])
    empties = np.vstack([(seq.profile == EMPTY) for seq in seqs])
    return X, slots, empties


def _shape_basis(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean, principal directions (columns), and per-component sigmas."""
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / max(1, X.shape[0] - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    vals = np.clip(vals[order], 0.0, None)
    vecs = vecs[:, order]
    keep = vals > 1e-10
    return mean, vecs[:, keep], np.sqrt(vals[keep])


def _devectorize(x: np.ndarray, slots: list[str], empty_rows: np.ndarray, frame: BoundarySequence) -> BoundarySequence:
    prof = np.rint(x[:SEQ_SIZE]).astype(np.int64)
    np.clip(prof, 0, SEQ_SIZE - 1, out=prof)
    prof = prof.astype(np.int16)
    re_empty = empty_rows.copy()
    if re_empty.all():
        warnings.warn("consensus would empty every row; keeping filled profile")
        re_empty[:] = False
    prof[re_empty] = EMPTY
    labels = np.zeros(SEQ_SIZE, np.uint8)
    nonempty = np.flatnonzero(prof != EMPTY)
    for j, _name in enumerate(slots):
        r = int(np.clip(np.rint(x[SEQ_SIZE + j]), 0, SEQ_SIZE - 1))
        if prof[r] == EMPTY:
            r = int(nonempty[np.argmin(np.abs(nonempty - r))])
        labels[r] = 1
    return BoundarySequence(prof, labels, frame.source_slice, frame.crop_origin, frame.crop_size)


def sample_coefficients(rng: np.random.Generator, sigmas: np.ndarray, sigma_cap: float, count: int) -> np.ndarray:
    """Uniform coefficients in [-sigma_cap*sigma_i, +sigma_cap*sigma_i]."""
    lo = -sigma_cap * sigmas
    hi = sigma_cap * sigmas
    return rng.uniform(lo, hi, size=(count, len(sigmas)))


def pca_augment(seqs, count: int, sigma_cap: float = 3.0, seed: int = 0) -> list[BoundarySequence]:
    """Sample ``count`` synthetic sequences from a linear shape model.

    Needs at least three training sequences.  With ``sigma_cap=0`` every
    sample is exactly the mean shape.  When the inputs are all identical
    the model is degenerate: jittered copies of the mean are returned with
    a warning.  Deterministic for a fixed seed.
    """
    seqs = list(seqs)
    if len(seqs) < 3:
        raise ValidationError(f"need >= 3 training sequences, got {len(seqs)}", field="seqs")
    if count < 1:
        raise ValidationError(f"count must be >= 1, got {count}", field="count")
    if sigma_cap < 0:
        raise ValidationError(f"sigma_cap must be >= 0, got {sigma_cap}", field="sigma_cap")
    X, slots, empties = _vectorize(seqs)
    # a grid row is re-emptied in outputs when most training inputs leave it empty
    consensus_empty = empties.sum(axis=0) * 2 > len(seqs)
    mean, basis, sigmas = _shape_basis(X)
    rng = np.random.default_rng(seed)
    frame = seqs[0]
    out = []
    if sigmas.size == 0:
        warnings.warn("training sequences are identical; returning jittered copies")
        for _ in range(count):
            x = mean.copy()
            jitter = rng.integers(-1, 2, size=SEQ_SIZE)
            x[:SEQ_SIZE] = np.clip(x[:SEQ_SIZE] + jitter, 0, SEQ_SIZE - 1)
            out.append(_devectorize(x, slots, consensus_empty, frame))
        return out
    coeffs = sample_coefficients(rng, sigmas, float(sigma_cap), count)
    for c in coeffs:
        x = mean + basis @ c
        out.append(_devectorize(x, slots, consensus_empty, frame))
    return out
