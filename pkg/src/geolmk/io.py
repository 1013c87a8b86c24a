"""File formats: raw volumes with JSON sidecar headers, landmark documents,
boundary sequences, phantom specs, and evaluation reports.

A volume is stored as a raw little-endian payload at ``path`` with a JSON
header at ``path + ".json"``.  The payload is laid out x-fastest, matching
the in-memory flat-index convention, so write/read round-trips are
byte-identical.  All malformed input is reported as FormatError naming the
offending field; reader code never lets foreign exceptions escape.
"""

from __future__ import annotations

import csv
import json
import warnings
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import FormatError, ValidationError
from .geodesic import GeodesicMap, QuantizedGeodesicMap
from .metrics import LandmarkErrors, SegScores
from .phantom import PhantomSpec
from .seqlmk import BoundarySequence
from .volume import (
    DTYPE_TAGS,
    LANDMARK_NAMES,
    BinaryMask,
    Landmark,
    LandmarkSet,
    Volume,
)

MAGIC = "GVOL1"
_MAX_VOXELS = 1 << 34  # refuse absurd headers before touching the payload

_STRUCT26 = np.ones((3, 3, 3), bool)


# ---------------------------------------------------------------------------
# volumes

def write_volume(v: Volume, path) -> None:
    """Raw payload at ``path``, JSON header at ``path + ".json"``."""
    path = Path(path)
    header = {
        "magic": MAGIC,
        "dims": list(v.dims),
        "spacing": list(v.spacing),
        "dtype": v.dtype_tag,
        "byte_order": "little",
        "layout": "x-fastest",
    }
    if isinstance(v, QuantizedGeodesicMap):
        header["kind"] = "quantized"
        header["s_bin"] = v.s_bin
    elif isinstance(v, GeodesicMap):
        header["kind"] = "geodesic"
        header["source"] = v.source
    elif isinstance(v, BinaryMask):
        header["kind"] = "mask"
    payload = np.ascontiguousarray(v.data.ravel(order="F"))
    if payload.dtype.byteorder == ">":
        payload = payload.byteswap()
    path.write_bytes(payload.tobytes())
    path.with_name(path.name + ".json").write_text(json.dumps(header, indent=2, sort_keys=True))


_OPTIONAL_KEYS = {"kind", "s_bin", "source"}
_REQUIRED_KEYS = {"magic", "dims", "spacing", "dtype", "byte_order", "layout"}


def _load_header(path: Path) -> dict:
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(str(exc), field="header")
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"header is not valid JSON: {exc}", field="header")
    if not isinstance(doc, dict):
        raise FormatError(f"header must be a JSON object, got {type(doc).__name__}", field="header")
    return doc


def _header_dims(doc: dict) -> tuple[int, int, int]:
    dims = doc.get("dims")
    if (
        not isinstance(dims, list)
        or len(dims) != 3
        or not all(isinstance(d, int) and not isinstance(d, bool) and d >= 1 for d in dims)
    ):
        raise FormatError(f"dims must be 3 positive integers, got {dims!r}", field="dims")
    if dims[0] * dims[1] * dims[2] > _MAX_VOXELS:
        raise FormatError(f"dims {dims} exceed the supported volume size", field="dims")
    return tuple(dims)


def read_volume(path) -> Volume:
    """Read a volume written by write_volume, restoring its concrete type."""
    path = Path(path)
    doc = _load_header(path.with_name(path.name + ".json"))
    unknown = set(doc) - _REQUIRED_KEYS - _OPTIONAL_KEYS
    if unknown:
        raise FormatError(f"unknown header fields {sorted(unknown)}", field="header")
    missing = _REQUIRED_KEYS - set(doc)
    if missing:
        raise FormatError(f"missing header fields {sorted(missing)}", field="header")
    if doc["magic"] != MAGIC:
        raise FormatError(f"expected {MAGIC!r}, got {doc['magic']!r}", field="magic")
    dims = _header_dims(doc)
    spacing = doc["spacing"]
    if (
        not isinstance(spacing, list)
        or len(spacing) != 3
        or not all(isinstance(s, (int, float)) and not isinstance(s, bool) for s in spacing)
        or not all(np.isfinite(s) and s > 0 for s in spacing)
    ):
        raise FormatError(f"spacing must be 3 positive numbers, got {spacing!r}", field="spacing")
    if not isinstance(doc["dtype"], str) or doc["dtype"] not in DTYPE_TAGS:
        raise FormatError(
            f"unknown dtype {doc['dtype']!r}; expected one of {sorted(DTYPE_TAGS)}", field="dtype"
        )
    if doc["byte_order"] != "little":
        raise FormatError(f"byte_order must be 'little', got {doc['byte_order']!r}", field="byte_order")
    if doc["layout"] != "x-fastest":
        raise FormatError(f"layout must be 'x-fastest', got {doc['layout']!r}", field="layout")
    dtype = DTYPE_TAGS[doc["dtype"]].newbyteorder("<")
    try:
        payload = path.read_bytes()
    except OSError as exc:
        raise FormatError(str(exc), field="payload")
    expected = dims[0] * dims[1] * dims[2] * dtype.itemsize
    if len(payload) != expected:
        raise FormatError(
            f"payload holds {len(payload)} bytes, header implies {expected}", field="payload"
        )
    data = np.frombuffer(payload, dtype=dtype).astype(DTYPE_TAGS[doc["dtype"]]).reshape(dims, order="F")
    kind = doc.get("kind", "plain")
    try:
        if kind == "mask":
            return BinaryMask(data, spacing)
        if kind == "geodesic":
            source = doc.get("source", "?")
            if not isinstance(source, str):
                raise FormatError(f"source must be a string, got {source!r}", field="source")
            return GeodesicMap(data, spacing, source)
        if kind == "quantized":
            s_bin = doc.get("s_bin")
            if not isinstance(s_bin, (int, float)) or isinstance(s_bin, bool):
                raise FormatError(f"quantized volumes need a numeric s_bin, got {s_bin!r}", field="s_bin")
            return QuantizedGeodesicMap(data, spacing, float(s_bin))
        if kind == "plain":
            return Volume(data, spacing)
    except FormatError:
        raise
    except ValidationError as exc:
        raise FormatError(f"payload does not satisfy kind={kind!r}: {exc}", field="kind")
    raise FormatError(f"unknown volume kind {kind!r}", field="kind")


def read_mask(path) -> BinaryMask:
    """Read a volume and require it to be a binary mask."""
    v = read_volume(path)
    if isinstance(v, BinaryMask):
        return v
    try:
        return BinaryMask(v.data, v.spacing)
    except ValidationError as exc:
        raise FormatError(f"volume at {path} is not a binary mask: {exc}", field="payload")


# ---------------------------------------------------------------------------
# landmarks

def write_landmarks_json(lms: LandmarkSet, path) -> None:
    doc = [
        {
            "id": e.id,
            "name": e.name,
            "voxel": list(e.voxel) if e.voxel is not None else None,
            "present": e.present,
        }
        for e in lms
    ]
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True))


def read_landmarks_json(path) -> LandmarkSet:
    doc = _load_json(path)
    if not isinstance(doc, list):
        raise FormatError(f"landmark document must be a JSON array, got {type(doc).__name__}", field="landmarks")
    entries = []
    for i, item in enumerate(doc):
        if not isinstance(item, dict):
            raise FormatError(f"entry {i} must be an object", field="landmarks")
        missing = {"id", "name", "voxel", "present"} - set(item)
        if missing:
            raise FormatError(f"entry {i} is missing {sorted(missing)}", field="landmarks")
        lm_id, name, voxel, present = item["id"], item["name"], item["voxel"], item["present"]
        if not isinstance(lm_id, int) or isinstance(lm_id, bool) or lm_id < 1:
            raise FormatError(f"entry {i}: id must be a positive integer, got {lm_id!r}", field="id")
        if not isinstance(present, bool):
            raise FormatError(f"entry {i}: present must be a boolean, got {present!r}", field="present")
        if voxel is not None:
            if (
                not isinstance(voxel, list)
                or len(voxel) != 3
                or not all(isinstance(c, int) and not isinstance(c, bool) for c in voxel)
            ):
                raise FormatError(f"entry {i}: voxel must be null or 3 integers, got {voxel!r}", field="voxel")
            voxel = tuple(voxel)
        try:
            entries.append(Landmark(lm_id, name, voxel, present))
        except ValidationError as exc:
            raise FormatError(str(exc), field="landmarks")
    try:
        return LandmarkSet(tuple(entries))
    except ValidationError as exc:
        raise FormatError(str(exc), field="landmarks")


def _load_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(str(exc), field="path")
    try:
        return json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"not valid JSON: {exc}", field="path")


def write_landmarks_labeled_volume(lms: LandmarkSet, dims, spacing) -> Volume:
    """Paint each present landmark as a 3x3x3 block of its id (clipped at borders)."""
    dims = tuple(int(d) for d in dims)
    data = np.zeros(dims, np.uint8, order="F")
    for e in lms.present():
        if e.id > 255:
            raise ValidationError(f"id {e.id} does not fit the u8 labeled volume", field="id")
        i, j, k = e.voxel
        sl = tuple(slice(max(0, c - 1), min(d, c + 2)) for c, d in zip((i, j, k), dims))
        region = data[sl]
        if (region != 0).any():
            raise ValidationError(f"landmark {e.name} overlaps another marked block", field="landmarks")
        data[sl] = e.id
    return Volume(data, spacing)


def read_landmarks_labeled_volume(v: Volume) -> LandmarkSet:
    """Recover landmarks from an id-labeled volume.

    Each nonzero id must form one 26-connected cluster; its voxel is the
    cluster centroid rounded to the nearest labeled voxel.  Clusters larger
    than 3x3x3 in any direction only warn.
    """
    if v.data.dtype not in (np.uint8, np.int32):
        raise ValidationError(f"labeled volume must be u8 or i32, got {v.dtype_tag}", field="data")
    ids = np.unique(v.data)
    ids = ids[ids > 0]
    entries = []
    for lm_id in ids:
        lm_id = int(lm_id)
        if lm_id > len(LANDMARK_NAMES):
            raise ValidationError(
                f"label {lm_id} has no roster name (expected 1..{len(LANDMARK_NAMES)})", field="data"
            )
        where = v.data == lm_id
        _, n = ndimage.label(where, structure=_STRUCT26)
        if n != 1:
            raise ValidationError(f"label {lm_id} splits into {n} disconnected clusters", field="data")
        coords = np.argwhere(where)
        extent = coords.max(axis=0) - coords.min(axis=0) + 1
        if (extent > 3).any():
            warnings.warn(f"label {lm_id} cluster spans {tuple(extent)}, larger than 3x3x3")
        centroid = coords.mean(axis=0)
        d2 = ((coords - centroid) ** 2).sum(axis=1)
        order = np.lexsort((coords[:, 0], coords[:, 1], coords[:, 2], d2))
        voxel = tuple(int(c) for c in coords[order[0]])
        name = LANDMARK_NAMES[lm_id - 1]
        entries.append(Landmark(lm_id, name, voxel, True))
    return LandmarkSet(tuple(entries))


# ---------------------------------------------------------------------------
# boundary sequences

def write_sequence_json(seq: BoundarySequence, path) -> None:
    doc = {
        "profile": [int(c) for c in seq.profile],
        "labels": [int(b) for b in seq.labels],
        "source_slice": seq.source_slice,
        "crop_origin": list(seq.crop_origin),
        "crop_size": list(seq.crop_size),
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True))


def read_sequence_json(path) -> BoundarySequence:
    doc = _load_json(path)
    if not isinstance(doc, dict):
        raise FormatError("sequence document must be a JSON object", field="path")
    missing = {"profile", "labels", "source_slice", "crop_origin", "crop_size"} - set(doc)
    if missing:
        raise FormatError(f"missing fields {sorted(missing)}", field="sequence")
    try:
        return BoundarySequence(
            np.asarray(doc["profile"], np.int16),
            np.asarray(doc["labels"], np.uint8),
            doc["source_slice"],
            tuple(doc["crop_origin"]),
            tuple(doc["crop_size"]),
        )
    except (ValidationError, TypeError, ValueError) as exc:
        raise FormatError(f"bad sequence document: {exc}", field="sequence")


# ---------------------------------------------------------------------------
# phantom specs

def read_phantom_spec(path) -> PhantomSpec:
    doc = _load_json(path)
    if not isinstance(doc, dict):
        raise FormatError("phantom spec must be a JSON object", field="path")
    for key in ("dims", "spacing"):
        if key in doc:
            doc[key] = tuple(doc[key])
    try:
        return PhantomSpec.from_dict(doc)
    except ValidationError as exc:
        raise FormatError(str(exc), field="phantom_spec")


def write_phantom_spec(spec: PhantomSpec, path) -> None:
    Path(path).write_text(spec.to_json())


# ---------------------------------------------------------------------------
# reports

REPORT_SEG_COLUMNS = ("dsc", "iou", "sensitivity", "specificity", "hd_mm")


def _case_row(case_id: str, seg: SegScores | None, lme: LandmarkErrors | None) -> dict:
    row: dict = {"case_id": case_id}
    for col in REPORT_SEG_COLUMNS:
        row[col] = getattr(seg, col) if seg is not None else ""
    for name in LANDMARK_NAMES:
        rec = lme.get(name) if lme is not None else None
        row[f"{name}_mm"] = rec.mm_error if rec else ""
        row[f"{name}_in_box"] = int(rec.in_box) if rec else ""
    return row


def write_report_csv(cases, path) -> None:
    """``cases``: iterable of (case_id, SegScores | None, LandmarkErrors | None)."""
    fieldnames = ["case_id", *REPORT_SEG_COLUMNS]
    for name in LANDMARK_NAMES:
        fieldnames += [f"{name}_mm", f"{name}_in_box"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for case_id, seg, lme in cases:
            writer.writerow(_case_row(case_id, seg, lme))


def write_report_json(cases, path) -> None:
    rows = [_case_row(case_id, seg, lme) for case_id, seg, lme in cases]
    Path(path).write_text(json.dumps(rows, indent=2, sort_keys=True))
