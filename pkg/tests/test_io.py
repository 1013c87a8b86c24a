import json

import numpy as np
import pytest

import geolmk
from geolmk import io
from geolmk.errors import FormatError, ValidationError
from geolmk.geodesic import GeodesicMap, QuantizedGeodesicMap
from geolmk.metrics import LandmarkError, LandmarkErrors, SegScores
from geolmk.volume import LANDMARK_NAMES, BinaryMask, Landmark, LandmarkSet, Volume


def _vol(dtype, shape=(4, 5, 6), spacing=(0.5, 0.5, 1.0), seed=0):
    rng = np.random.default_rng(seed)
    if np.dtype(dtype).kind == "f":
        data = rng.random(shape).astype(dtype)
    else:
        data = rng.integers(0, 100, shape).astype(dtype)
    return Volume(np.asfortranarray(data), spacing)


def _header(path):
    return json.loads((path.parent / (path.name + ".json")).read_text())


def _rewrite_header(path, mutate):
    hp = path.parent / (path.name + ".json")
    doc = json.loads(hp.read_text())
    mutate(doc)
    hp.write_text(json.dumps(doc))


# ---------------------------------------------------------------------------
# volumes

@pytest.mark.parametrize("dtype", [np.uint8, np.int32, np.float32, np.float64])
def test_volume_roundtrip_all_dtypes(tmp_path, dtype):
    v = _vol(dtype)
    p = tmp_path / "v.gvol"
    io.write_volume(v, p)
    back = io.read_volume(p)
    assert type(back) is Volume
    assert back.dims == v.dims
    assert back.spacing == v.spacing
    assert np.array_equal(back.data, v.data)
    assert back.data.dtype == v.data.dtype


def test_volume_roundtrip_is_byte_identical(tmp_path):
    v = _vol(np.float64, seed=3)
    p1, p2 = tmp_path / "a.gvol", tmp_path / "b.gvol"
    io.write_volume(v, p1)
    io.write_volume(io.read_volume(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert _header(p1) == _header(p2)


def test_payload_layout_is_x_fastest(tmp_path):
    data = np.arange(8, dtype=np.uint8).reshape((2, 2, 2), order="F")
    p = tmp_path / "v.gvol"
    io.write_volume(Volume(data, (1, 1, 1)), p)
    assert list(p.read_bytes()) == list(range(8))


def test_mask_roundtrip_restores_type(tmp_path):
    m = BinaryMask(np.asfortranarray(np.eye(4, dtype=np.uint8)[:, :, None] * np.ones((1, 1, 3), np.uint8)), (1, 1, 1))
    p = tmp_path / "m.gvol"
    io.write_volume(m, p)
    back = io.read_volume(p)
    assert isinstance(back, BinaryMask)
    assert _header(p)["kind"] == "mask"
    assert np.array_equal(back.data, m.data)


def test_geodesic_roundtrip_keeps_source(tmp_path):
    data = np.full((3, 3, 3), np.inf, order="F")
    data[1, 1, 1] = 0.0
    g = GeodesicMap(data, (1, 1, 1), "CdL")
    p = tmp_path / "g.gvol"
    io.write_volume(g, p)
    back = io.read_volume(p)
    assert isinstance(back, GeodesicMap)
    assert back.source == "CdL"
    assert np.array_equal(back.data, g.data)


def test_quantized_roundtrip_keeps_sbin(tmp_path):
    data = np.full((3, 3, 3), 255, np.uint8, order="F")
    data[0, 0, 0] = 7
    q = QuantizedGeodesicMap(np.asfortranarray(data), (1, 1, 1), 2.5)
    p = tmp_path / "q.gvol"
    io.write_volume(q, p)
    back = io.read_volume(p)
    assert isinstance(back, QuantizedGeodesicMap)
    assert back.s_bin == 2.5


def test_read_mask_coerces_plain_binary_volume(tmp_path):
    v = Volume(np.ones((2, 2, 2), np.uint8, order="F"), (1, 1, 1))
    p = tmp_path / "v.gvol"
    io.write_volume(v, p)
    assert isinstance(io.read_mask(p), BinaryMask)
    bad = Volume(np.full((2, 2, 2), 3, np.uint8, order="F"), (1, 1, 1))
    io.write_volume(bad, p)
    with pytest.raises(FormatError):
        io.read_mask(p)


# ---------------------------------------------------------------------------
# malformed headers

def _written(tmp_path):
    p = tmp_path / "v.gvol"
    io.write_volume(_vol(np.uint8), p)
    return p


def test_missing_header_file(tmp_path):
    p = tmp_path / "v.gvol"
    p.write_bytes(b"\x00" * 8)
    with pytest.raises(FormatError, match="header"):
        io.read_volume(p)


def test_header_not_json(tmp_path):
    p = _written(tmp_path)
    (tmp_path / "v.gvol.json").write_text("{not json")
    with pytest.raises(FormatError, match="JSON"):
        io.read_volume(p)


def test_header_not_an_object(tmp_path):
    p = _written(tmp_path)
    (tmp_path / "v.gvol.json").write_text("[1, 2]")
    with pytest.raises(FormatError, match="object"):
        io.read_volume(p)


@pytest.mark.parametrize(
    "mutate, field",
    [
        (lambda d: d.update(extra=1), "header"),
        (lambda d: d.pop("dims"), "header"),
        (lambda d: d.update(magic="GVOL2"), "magic"),
        (lambda d: d.update(dims=[4, 5]), "dims"),
        (lambda d: d.update(dims=[4, 5, 0]), "dims"),
        (lambda d: d.update(dims=[4, 5, "6"]), "dims"),
        (lambda d: d.update(dims=[4, 5, True]), "dims"),
        (lambda d: d.update(dims=[100000, 100000, 100000]), "dims"),
        (lambda d: d.update(spacing=[1.0, 1.0]), "spacing"),
        (lambda d: d.update(spacing=[1.0, 0.0, 1.0]), "spacing"),
        (lambda d: d.update(spacing=[1.0, -2.0, 1.0]), "spacing"),
        (lambda d: d.update(spacing=[1.0, None, 1.0]), "spacing"),
        (lambda d: d.update(dtype="f16"), "dtype"),
        (lambda d: d.update(byte_order="big"), "byte_order"),
        (lambda d: d.update(layout="z-fastest"), "layout"),
        (lambda d: d.update(kind="tensor"), "kind"),
    ],
)
def test_malformed_header_fields(tmp_path, mutate, field):
    p = _written(tmp_path)
    _rewrite_header(p, mutate)
    with pytest.raises(FormatError) as exc:
        io.read_volume(p)
    assert exc.value.field == field


def test_nan_spacing_rejected(tmp_path):
    p = _written(tmp_path)
    hp = tmp_path / "v.gvol.json"
    doc = json.loads(hp.read_text())
    doc["spacing"] = [1.0, float("nan"), 1.0]
    hp.write_text(json.dumps(doc).replace("NaN", "NaN"))
    with pytest.raises(FormatError):
        io.read_volume(p)


def test_payload_length_mismatch(tmp_path):
    p = _written(tmp_path)
    p.write_bytes(p.read_bytes()[:-1])
    with pytest.raises(FormatError, match="payload"):
        io.read_volume(p)
    p.write_bytes(b"\x00" * 1000)
    with pytest.raises(FormatError, match="payload"):
        io.read_volume(p)


def test_huge_dims_rejected_before_allocation(tmp_path):
    p = _written(tmp_path)
    _rewrite_header(p, lambda d: d.update(dims=[1 << 20, 1 << 20, 1 << 20]))
    with pytest.raises(FormatError, match="dims"):
        io.read_volume(p)


def test_mask_kind_with_nonbinary_payload(tmp_path):
    p = tmp_path / "v.gvol"
    io.write_volume(Volume(np.full((2, 2, 2), 9, np.uint8, order="F"), (1, 1, 1)), p)
    _rewrite_header(p, lambda d: d.update(kind="mask"))
    with pytest.raises(FormatError) as exc:
        io.read_volume(p)
    assert exc.value.field == "kind"


def test_quantized_kind_requires_sbin(tmp_path):
    p = tmp_path / "v.gvol"
    io.write_volume(Volume(np.zeros((2, 2, 2), np.uint8, order="F"), (1, 1, 1)), p)
    _rewrite_header(p, lambda d: d.update(kind="quantized"))
    with pytest.raises(FormatError) as exc:
        io.read_volume(p)
    assert exc.value.field == "s_bin"


def test_geodesic_kind_rejects_nonstring_source(tmp_path):
    p = tmp_path / "v.gvol"
    io.write_volume(Volume(np.zeros((2, 2, 2), np.float64, order="F"), (1, 1, 1)), p)
    _rewrite_header(p, lambda d: d.update(kind="geodesic", source=7))
    with pytest.raises(FormatError) as exc:
        io.read_volume(p)
    assert exc.value.field == "source"


# ---------------------------------------------------------------------------
# landmark documents

def test_landmarks_json_roundtrip(tmp_path, default_phantom):
    _, lms = default_phantom
    partial = lms.with_entry(Landmark(lms["CdL"].id, "CdL", None, False))
    p = tmp_path / "lm.json"
    io.write_landmarks_json(partial, p)
    back = io.read_landmarks_json(p)
    assert len(back) == len(partial)
    for a, b in zip(back, partial):
        assert (a.id, a.name, a.voxel, a.present) == (b.id, b.name, b.voxel, b.present)
    assert not back["CdL"].present and back["CdL"].voxel is None


def test_landmarks_json_rejects_malformed(tmp_path):
    p = tmp_path / "lm.json"
    cases = [
        '{"id": 1}',
        "[1, 2]",
        '[{"id": 1, "name": "Me", "voxel": [0, 0, 0]}]',
        '[{"id": 0, "name": "Me", "voxel": [0, 0, 0], "present": true}]',
        '[{"id": 1, "name": "Me", "voxel": [0, 0], "present": true}]',
        '[{"id": 1, "name": "Me", "voxel": [0, 0, 0.5], "present": true}]',
        '[{"id": 1, "name": "Me", "voxel": [0, 0, 0], "present": 1}]',
        '[{"id": 1, "name": "Menton", "voxel": [0, 0, 0], "present": true}]',
    ]
    for text in cases:
        p.write_text(text)
        with pytest.raises(FormatError):
            io.read_landmarks_json(p)


def test_landmarks_json_rejects_duplicates(tmp_path):
    p = tmp_path / "lm.json"
    entry = '{"id": 1, "name": "Me", "voxel": [0, 0, 0], "present": true}'
    p.write_text(f"[{entry}, {entry}]")
    with pytest.raises(FormatError):
        io.read_landmarks_json(p)


def test_landmarks_json_unknown_name_suggests(tmp_path):
    p = tmp_path / "lm.json"
    p.write_text('[{"id": 1, "name": "me", "voxel": [0, 0, 0], "present": true}]')
    with pytest.raises(FormatError, match="Me"):
        io.read_landmarks_json(p)


# ---------------------------------------------------------------------------
# labeled volumes

def test_labeled_volume_roundtrip(default_phantom):
    _, lms = default_phantom
    v = io.write_landmarks_labeled_volume(lms, (96, 96, 96), (0.5, 0.5, 0.5))
    back = io.read_landmarks_labeled_volume(v)
    for e in lms:
        assert back[e.name].voxel == e.voxel


def test_labeled_volume_corner_clipping():
    # exact recovery is only promised >= 1 voxel from the border; clipped
    # border blocks must still come back within 1 voxel per axis
    lms = LandmarkSet((Landmark(1, "Me", (0, 0, 0), True), Landmark(6, "CdL", (9, 0, 5), True)))
    v = io.write_landmarks_labeled_volume(lms, (10, 10, 10), (1, 1, 1))
    assert (v.data == 1).sum() == 8  # corner block clipped to 2x2x2
    assert (v.data == 6).sum() == 12  # two faces clipped
    back = io.read_landmarks_labeled_volume(v)
    for name in ("Me", "CdL"):
        delta = np.abs(np.subtract(back[name].voxel, lms[name].voxel))
        assert delta.max() <= 1


def test_labeled_volume_exact_one_voxel_from_border():
    lms = LandmarkSet((Landmark(1, "Me", (1, 1, 1), True), Landmark(6, "CdL", (8, 1, 5), True)))
    v = io.write_landmarks_labeled_volume(lms, (10, 10, 10), (1, 1, 1))
    back = io.read_landmarks_labeled_volume(v)
    assert back["Me"].voxel == (1, 1, 1)
    assert back["CdL"].voxel == (8, 1, 5)


def test_labeled_volume_overlap_rejected():
    lms = LandmarkSet((Landmark(1, "Me", (5, 5, 5), True), Landmark(2, "Gn", (6, 5, 5), True)))
    with pytest.raises(ValidationError, match="overlap"):
        io.write_landmarks_labeled_volume(lms, (12, 12, 12), (1, 1, 1))


def test_labeled_volume_disconnected_label_rejected():
    data = np.zeros((10, 10, 10), np.uint8, order="F")
    data[1, 1, 1] = 1
    data[8, 8, 8] = 1
    with pytest.raises(ValidationError, match="disconnected"):
        io.read_landmarks_labeled_volume(Volume(data, (1, 1, 1)))


def test_labeled_volume_oversized_cluster_warns():
    data = np.zeros((10, 10, 10), np.uint8, order="F")
    data[2, 2, 2:8] = 2
    with pytest.warns(UserWarning, match="larger"):
        back = io.read_landmarks_labeled_volume(Volume(data, (1, 1, 1)))
    assert back["Gn"].voxel[2] in (4, 5)  # centroid of the 6-run, snapped


def test_labeled_volume_unknown_label_rejected():
    data = np.zeros((5, 5, 5), np.uint8, order="F")
    data[2, 2, 2] = 42
    with pytest.raises(ValidationError, match="42"):
        io.read_landmarks_labeled_volume(Volume(data, (1, 1, 1)))


def test_labeled_volume_rejects_float_data():
    data = np.zeros((5, 5, 5), np.float64, order="F")
    with pytest.raises(ValidationError):
        io.read_landmarks_labeled_volume(Volume(data, (1, 1, 1)))


# ---------------------------------------------------------------------------
# sequences and phantom specs

def test_sequence_json_roundtrip(tmp_path, default_phantom):
    mask, lms = default_phantom
    seq = geolmk.extract_boundary_sequence(mask, lms)
    p = tmp_path / "seq.json"
    io.write_sequence_json(seq, p)
    back = io.read_sequence_json(p)
    assert np.array_equal(back.profile, seq.profile)
    assert np.array_equal(back.labels, seq.labels)
    assert back.source_slice == seq.source_slice
    assert back.crop_origin == seq.crop_origin
    assert back.crop_size == seq.crop_size


def test_sequence_json_rejects_malformed(tmp_path):
    p = tmp_path / "seq.json"
    p.write_text('{"profile": [1, 2]}')
    with pytest.raises(FormatError, match="missing"):
        io.read_sequence_json(p)
    doc = {
        "profile": [999] * 64,
        "labels": [0] * 64,
        "source_slice": 0,
        "crop_origin": [0, 0],
        "crop_size": [10, 10],
    }
    p.write_text(json.dumps(doc))
    with pytest.raises(FormatError):
        io.read_sequence_json(p)


def test_phantom_spec_roundtrip(tmp_path):
    spec = geolmk.PhantomSpec(dims=(64, 64, 64), arch_radius=20.0, noise_blob_count=3, seed=9)
    p = tmp_path / "spec.json"
    io.write_phantom_spec(spec, p)
    back = io.read_phantom_spec(p)
    assert back == spec


def test_phantom_spec_rejects_unknown_field(tmp_path):
    p = tmp_path / "spec.json"
    doc = json.loads(geolmk.PhantomSpec().to_json())
    doc["wobble"] = 3
    p.write_text(json.dumps(doc))
    with pytest.raises(FormatError, match="wobble"):
        io.read_phantom_spec(p)


# ---------------------------------------------------------------------------
# reports

def _cases():
    seg = SegScores(dsc=0.9, iou=0.8, sensitivity=0.95, specificity=0.99, hd_mm=1.5)
    lme = LandmarkErrors(
        per_landmark=(
            LandmarkError("Me", 1.0, 0.5, 1, True),
            LandmarkError("CdL", 4.0, 2.0, 4, False),
        ),
        false_positives=(),
        false_negatives=("CdR",),
        mean_mm=1.25,
        median_mm=1.25,
    )
    return [("case_a", seg, None), ("case_b", None, lme), ("case_c", seg, lme)]


def test_report_csv(tmp_path):
    import csv as csv_mod

    p = tmp_path / "report.csv"
    io.write_report_csv(_cases(), p)
    with open(p, newline="") as fh:
        rows = list(csv_mod.DictReader(fh))
    assert [r["case_id"] for r in rows] == ["case_a", "case_b", "case_c"]
    assert rows[0]["dsc"] == "0.9"
    assert rows[0]["Me_mm"] == ""  # no landmark eval for this case
    assert rows[1]["dsc"] == ""
    assert rows[1]["Me_mm"] == "0.5"
    assert rows[1]["Me_in_box"] == "1"
    assert rows[1]["CdL_in_box"] == "0"
    assert rows[2]["hd_mm"] == "1.5"
    header = open(p).readline().strip().split(",")
    assert header[:6] == ["case_id", "dsc", "iou", "sensitivity", "specificity", "hd_mm"]
    for name in LANDMARK_NAMES:
        assert f"{name}_mm" in header and f"{name}_in_box" in header


def test_report_json(tmp_path):
    p = tmp_path / "report.json"
    io.write_report_json(_cases(), p)
    rows = json.loads(p.read_text())
    assert len(rows) == 3
    assert rows[0]["dsc"] == 0.9
    assert rows[1]["Me_mm"] == 0.5
    assert rows[1]["CdR_mm"] == ""
