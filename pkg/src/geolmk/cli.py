"""Command-line front end.

Every subcommand reads and writes the formats in geolmk.io, so outputs are
deterministic byte-for-byte given the same inputs.  Exit codes: 0 on
success, 2 when input fails validation, 1 on internal errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

from . import edt, geodesic, io, metrics, netspec, phantom, postprocess, seqlmk
from .errors import GeolmkError, ValidationError
from .volume import SPARSE_LANDMARK_NAMES


def _parse_names(text: str) -> tuple[str, ...]:
    names = tuple(n.strip() for n in text.split(",") if n.strip())
    if not names:
        raise ValidationError("no landmark names given", field="names")
    return names


def _cmd_phantom(args) -> int:
    if args.spec:
        spec = io.read_phantom_spec(args.spec)
    else:
        spec = phantom.PhantomSpec()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.dims is not None:
        overrides["dims"] = tuple(args.dims)
    for flag in args.flags:
        if flag not in ("missing_left_condyle", "split_into_two_parts"):
            raise ValidationError(f"unknown phantom flag {flag!r}", field="flag")
        overrides[flag] = True
    if overrides:
        base = json.loads(spec.to_json())
        base["dims"] = tuple(base["dims"])
        base["spacing"] = tuple(base["spacing"])
        spec = phantom.PhantomSpec.from_dict({**base, **overrides})
    mask, lms = phantom.generate(spec)
    io.write_volume(mask, args.out)
    if args.landmarks:
        io.write_landmarks_json(lms, args.landmarks)
    return 0


def _cmd_edt(args) -> int:
    m = io.read_mask(args.mask)
    field = edt.sltdt(m) if args.signed else edt.ltdt(m)
    io.write_volume(field, args.out)
    return 0


def _cmd_geodesic(args) -> int:
    m = io.read_mask(args.mask)
    lms = io.read_landmarks_json(args.landmarks)
    names = _parse_names(args.names) if args.names else tuple(
        e.name for e in lms.present() if e.name in SPARSE_LANDMARK_NAMES
    )
    if not names:
        raise ValidationError("no present landmarks to map", field="landmarks")
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    threads = args.threads if args.threads is not None else geodesic.default_threads()
    maps = geodesic.geodesic_maps(
        m, lms, names, connectivity=args.connectivity, threads=threads
    )
    for g in maps:
        io.write_volume(g, outdir / f"geo_{g.source}.gvol")
    return 0


def _cmd_fuse(args) -> int:
    maps = []
    for p in args.inputs:
        v = io.read_volume(p)
        if not isinstance(v, geodesic.GeodesicMap):
            raise ValidationError(f"{p} is not a geodesic map", field="inputs")
        maps.append(v)
    io.write_volume(geodesic.fuse_maps(maps), args.out)
    return 0


def _cmd_quantize(args) -> int:
    v = io.read_volume(args.input)
    if not isinstance(v, geodesic.GeodesicMap):
        raise ValidationError(f"{args.input} is not a geodesic map", field="input")
    mask = io.read_mask(args.mask) if args.mask else None
    s_bin = None if args.auto_sbin else args.sbin
    io.write_volume(geodesic.quantize(v, s_bin=s_bin, mask=mask), args.out)
    return 0


def _cmd_decode_landmarks(args) -> int:
    q = io.read_volume(args.quantized)
    if not isinstance(q, geodesic.QuantizedGeodesicMap):
        raise ValidationError(f"{args.quantized} is not a quantized map", field="quantized")
    m = io.read_mask(args.mask)
    expected = _parse_names(args.expected) if args.expected else SPARSE_LANDMARK_NAMES
    lms = geodesic.decode_landmarks(q, m, expected=expected)
    io.write_landmarks_json(lms, args.out)
    return 0


def _cmd_extract_seq(args) -> int:
    m = io.read_mask(args.mask)
    lms = io.read_landmarks_json(args.landmarks)
    seq = seqlmk.extract_boundary_sequence(m, lms)
    io.write_sequence_json(seq, args.out)
    return 0


def _cmd_decode_seq(args) -> int:
    seq = io.read_sequence_json(args.sequence)
    io.write_landmarks_json(seqlmk.decode_sequence(seq), args.out)
    return 0


def _cmd_pca_augment(args) -> int:
    seqs = [io.read_sequence_json(p) for p in args.inputs]
    out = seqlmk.pca_augment(seqs, args.count, sigma_cap=args.sigma_cap, seed=args.seed)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for i, seq in enumerate(out):
        io.write_sequence_json(seq, outdir / f"aug_{i:03d}.json")
    return 0


def _cmd_postprocess(args) -> int:
    if not (args.largest_cc or args.fill):
        raise ValidationError("nothing to do: pass --largest-cc and/or --fill", field="args")
    m = io.read_mask(args.mask)
    if args.largest_cc:
        m = postprocess.largest_component(m)
    if args.fill:
        m = postprocess.fill_holes(m)
    io.write_volume(m, args.out)
    return 0


def _cmd_eval_seg(args) -> int:
    pred = io.read_mask(args.pred)
    gt = io.read_mask(args.gt)
    scores = metrics.seg_scores(pred, gt, hd_percentile=args.hd_percentile)
    if args.json:
        print(json.dumps(scores.as_dict(), indent=2, sort_keys=True))
    else:
        for key, value in scores.as_dict().items():
            print(f"{key}: {value:.6f}")
    return 0


def _cmd_eval_landmarks(args) -> int:
    pred = io.read_landmarks_json(args.pred)
    gt = io.read_landmarks_json(args.gt)
    errs = metrics.landmark_errors(pred, gt, tuple(args.spacing))
    if args.json:
        doc = {
            "per_landmark": [
                {
                    "name": r.name,
                    "pixel_error": r.pixel_error,
                    "mm_error": r.mm_error,
                    "axis_error": r.axis_error,
                    "in_box": r.in_box,
                }
                for r in errs.per_landmark
            ],
            "false_positives": list(errs.false_positives),
            "false_negatives": list(errs.false_negatives),
            "mean_mm": errs.mean_mm,
            "median_mm": errs.median_mm,
        }
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        for r in errs.per_landmark:
            box = "in" if r.in_box else "out"
            print(f"{r.name}: {r.mm_error:.6f} mm, {r.pixel_error:.6f} px, {box}")
        if errs.false_positives:
            print(f"false positives: {', '.join(errs.false_positives)}")
        if errs.false_negatives:
            print(f"false negatives: {', '.join(errs.false_negatives)}")
        print(f"mean_mm: {errs.mean_mm:.6f}")
        print(f"median_mm: {errs.median_mm:.6f}")
    return 0


def _cmd_netspec(args) -> int:
    if args.arch == "tiramisu":
        ledger = netspec.tiramisu_ledger(growth_rate=args.growth_rate)
    elif args.arch == "unet":
        ledger = netspec.unet_ledger()
    else:
        ledger = netspec.lstm_ledger()
    if args.json:
        print(json.dumps(ledger.as_dict(), indent=2, sort_keys=True))
    else:
        print(ledger.to_text())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geolmk", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate a synthetic mandible mask")
    p.add_argument("--spec", help="phantom spec JSON (defaults used when omitted)")
    p.add_argument("--out", required=True, help="output mask volume")
    p.add_argument("--landmarks", help="output landmark JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--dims", type=int, nargs=3, metavar=("NX", "NY", "NZ"))
    p.add_argument("--flag", dest="flags", action="append", default=[])
    p.set_defaults(func=_cmd_phantom)

    p = sub.add_parser("edt", help="Euclidean distance transform of a mask")
    p.add_argument("mask")
    p.add_argument("out")
    p.add_argument("--signed", action="store_true", help="signed variant (negative outside)")
    p.set_defaults(func=_cmd_edt)

    p = sub.add_parser("geodesic", help="per-landmark geodesic distance maps")
    p.add_argument("mask")
    p.add_argument("landmarks")
    p.add_argument("outdir")
    p.add_argument("--connectivity", type=int, choices=(6, 26), default=26)
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: GEOLMK_THREADS or 1)")
    p.add_argument("--names", help="comma-separated landmark names (default: sparse set)")
    p.set_defaults(func=_cmd_geodesic)

    p = sub.add_parser("fuse", help="voxelwise minimum of geodesic maps")
    p.add_argument("out")
    p.add_argument("inputs", nargs="+")
    p.set_defaults(func=_cmd_fuse)

    p = sub.add_parser("quantize", help="bin a geodesic map into 21 classes")
    p.add_argument("input")
    p.add_argument("out")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--sbin", type=float, help="bin width in mm")
    group.add_argument("--auto-sbin", action="store_true",
                       help="bin width = max finite distance / 20")
    p.add_argument("--mask", help="mask separating unreachable foreground from background")
    p.set_defaults(func=_cmd_quantize)

    p = sub.add_parser("decode-landmarks", help="recover landmarks from a quantized map")
    p.add_argument("quantized")
    p.add_argument("mask")
    p.add_argument("out")
    p.add_argument("--expected", help="comma-separated names (default: sparse set)")
    p.set_defaults(func=_cmd_decode_landmarks)

    p = sub.add_parser("extract-seq", help="boundary profile of the mid-sagittal chin slice")
    p.add_argument("mask")
    p.add_argument("landmarks")
    p.add_argument("out")
    p.set_defaults(func=_cmd_extract_seq)

    p = sub.add_parser("decode-seq", help="landmarks from a boundary sequence")
    p.add_argument("sequence")
    p.add_argument("out")
    p.set_defaults(func=_cmd_decode_seq)

    p = sub.add_parser("pca-augment", help="sample synthetic boundary sequences")
    p.add_argument("outdir")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--sigma-cap", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_pca_augment)

    p = sub.add_parser("postprocess", help="clean up a predicted mask")
    p.add_argument("mask")
    p.add_argument("out")
    p.add_argument("--largest-cc", action="store_true")
    p.add_argument("--fill", action="store_true")
    p.set_defaults(func=_cmd_postprocess)

    p = sub.add_parser("eval-seg", help="overlap and surface-distance scores")
    p.add_argument("pred")
    p.add_argument("gt")
    p.add_argument("--hd-percentile", type=float, default=100.0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_eval_seg)

    p = sub.add_parser("eval-landmarks", help="landmark localization errors")
    p.add_argument("pred")
    p.add_argument("gt")
    p.add_argument("--spacing", type=float, nargs=3, default=(1.0, 1.0, 1.0),
                   metavar=("SX", "SY", "SZ"))
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_eval_landmarks)

    p = sub.add_parser("netspec", help="architecture layer/parameter ledgers")
    p.add_argument("--arch", choices=("tiramisu", "unet", "lstm"), required=True)
    p.add_argument("--growth-rate", type=int, default=16)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_netspec)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GeolmkError as exc:
        print(f"geolmk {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
