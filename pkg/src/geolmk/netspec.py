"""Architecture ledgers: feature-map and parameter bookkeeping.

These are calculators, not model builders.  Each ledger walks a fixed
topology, records per-stage output feature counts and parameter counts,
and totals them.  Counting conventions, stated once and used throughout:
convolutions carry a bias; every learned conv/deconv stage is paired with
a normalization counted as 2 parameters per output feature; pooling,
upsampling, copies, and softmax are parameter-free.

The segmentation network ledger is parameterized by the dense growth rate
``k``.  With ``k=16`` the computed feature column reproduces the reference
column below except for one entry (computed 576 where the reference says
578); any such mismatch is machine-flagged in ``discrepancies`` rather
than silently absorbed.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from .errors import ValidationError


@dataclass(frozen=True)
class LayerEntry:
    name: str
    out_features: int
    params: int
    spatial: str = ""
    note: str = ""


@dataclass(frozen=True)
class ArchitectureLedger:
    arch: str
    entries: tuple[LayerEntry, ...]
    total_params: int
    meta: dict = field(default_factory=dict)
    discrepancies: tuple[dict, ...] = ()

    def as_dict(self) -> dict:
        return {
            "arch": self.arch,
            "entries": [asdict(e) for e in self.entries],
            "total_params": self.total_params,
            "meta": dict(self.meta),
            "discrepancies": [dict(d) for d in self.discrepancies],
        }

    def to_text(self) -> str:
        lines = [f"{self.arch}  (total params: {self.total_params:,})"]
        name_w = max(len(e.name) for e in self.entries)
        sp_w = max(len(e.spatial) for e in self.entries)
        for e in self.entries:
            line = f"  {e.name:<{name_w}}  {e.spatial:<{sp_w}}  {e.out_features:>6}  {e.params:>12,}"
            if e.note:
                line += f"  {e.note}"
            lines.append(line)
        for d in self.discrepancies:
            lines.append(
                f"  ! {d['entry']}: computed {d['computed']} differs from reference {d['reference']}"
            )
        return "\n".join(lines)


def _norm(features: int) -> int:
    return 2 * features


def _conv(kernel: int, cin: int, cout: int) -> int:
    return kernel * cin * cout + cout


# Reference output-feature column for the growth-rate-16 configuration.
_SEG_REFERENCE = (48, 112, 192, 304, 464, 656, 896, 1088, 816, 578, 384, 256, 2)
_SEG_BLOCKS_DOWN = (4, 5, 7, 10, 12)
_SEG_BOTTLENECK = 15


def tiramisu_ledger(
    growth_rate: int = 16,
    blocks_down: tuple[int, ...] = _SEG_BLOCKS_DOWN,
    bottleneck_layers: int = _SEG_BOTTLENECK,
    stem_features: int = 48,
    input_channels: int = 1,
    num_classes: int = 2,
) -> ArchitectureLedger:
    """Densely connected encoder-decoder segmentation network ledger.

    Feature bookkeeping: a dense block of n layers adds n*k features to its
    input; a transition down keeps the width (1x1 conv); a transition up
    carries only the previous block's new n_prev*k features (3x3 transposed
    conv), which are concatenated with the skip at the same depth before
    the next dense block.
    """
    k = int(growth_rate)
    if k < 1:
        raise ValidationError(f"growth rate must be >= 1, got {k}", field="growth_rate")
    entries = []
    entries.append(LayerEntry("input", input_channels, 0))
    stem_p = _conv(9, input_channels, stem_features)
    entries.append(LayerEntry("conv 3x3", stem_features, stem_p))

    def dense_params(cin: int, n: int) -> int:
        total = 0
        for j in range(n):
            width = cin + j * k
            total += _norm(width) + _conv(9, width, k)
        return total

    feats = stem_features
    skips = []
    for n in blocks_down:
        p = dense_params(feats, n)
        feats += n * k
        skips.append(feats)
        p += _norm(feats) + _conv(1, feats, feats)  # transition down, width kept
        entries.append(LayerEntry(f"dense block ({n}) + transition down", feats, p))

    p = dense_params(feats, bottleneck_layers)
    feats = feats + bottleneck_layers * k
    entries.append(LayerEntry(f"dense block ({bottleneck_layers})", feats, p, note="bottleneck"))

    n_prev = bottleneck_layers
    blocks_up = tuple(reversed(blocks_down))
    for n, skip in zip(blocks_up, reversed(skips)):
        carried = n_prev * k
        p = _conv(9, carried, carried)  # 3x3 transposed conv on the new features
        entry_in = skip + carried
        p += dense_params(entry_in, n)
        feats = entry_in + n * k
        entries.append(LayerEntry(f"transition up + dense block ({n})", feats, p))
        n_prev = n

    entries.append(LayerEntry("conv 1x1", num_classes, _conv(1, feats, num_classes)))
    entries.append(LayerEntry("softmax", num_classes, 0))

    discrepancies = []
    canonical = (
        k == 16
        and tuple(blocks_down) == _SEG_BLOCKS_DOWN
        and bottleneck_layers == _SEG_BOTTLENECK
        and stem_features == 48
        and num_classes == 2
    )
    if canonical:
        computed = [e.out_features for e in entries[1:-1]]  # conv stem .. final conv
        for e, got, ref in zip(entries[1:-1], computed, _SEG_REFERENCE):
            if got != ref:
                discrepancies.append({"entry": e.name, "computed": got, "reference": ref})
    total = sum(e.params for e in entries)
    meta = {
        "growth_rate": k,
        "blocks_down": list(blocks_down),
        "bottleneck_layers": bottleneck_layers,
        "reference_checked": canonical,
    }
    return ArchitectureLedger("tiramisu", tuple(entries), total, meta, tuple(discrepancies))


def unet_ledger(input_size: tuple[int, int] = (256, 256), input_channels: int = 1, num_classes: int = 21) -> ArchitectureLedger:
    """Slice-classification network ledger: 2D U-Net over 21 distance classes."""
    h, w = (int(v) for v in input_size)
    if h < 4 or w < 4 or h % 4 or w % 4:
        raise ValidationError(f"input size must be divisible by 4, got {input_size}", field="input_size")
    entries = [LayerEntry("input", input_channels, 0, f"{h}x{w}")]
    feats = input_channels
    half = f"{h // 2}x{w // 2}"
    quarter = f"{h // 4}x{w // 4}"
    full = f"{h}x{w}"

    def conv(name, spatial, cout, note=""):
        nonlocal feats
        p = _conv(25, feats, cout) + _norm(cout)
        feats = cout
        entries.append(LayerEntry(name, cout, p, spatial, note))

    conv("conv 5x5", full, 32)
    conv("conv 5x5", full, 32)
    entries.append(LayerEntry("max pool", 32, 0, half))
    conv("conv 5x5", half, 64)
    conv("conv 5x5", half, 64)
    entries.append(LayerEntry("max pool", 64, 0, quarter))
    conv("conv 5x5", quarter, 128)
    conv("deconv 5x5", quarter, 64)
    feats = 64 + 64  # upsampled decoder features + copied encoder features
    entries.append(LayerEntry("upsample + copy", feats, 0, half))
    conv("deconv 5x5", half, 64)
    conv("deconv 5x5", half, 32)
    feats = 32 + 32
    entries.append(LayerEntry("upsample + copy", feats, 0, full))
    conv("deconv 5x5", full, 32)
    conv("deconv 5x5", full, 32)
    conv("deconv 5x5", full, num_classes)
    entries.append(LayerEntry("softmax", num_classes, 0, full))
    total = sum(e.params for e in entries)
    return ArchitectureLedger("unet", tuple(entries), total, {"input_size": [h, w]})


def lstm_ledger(steps: int = 64, input_features: int = 64, hidden: int = 512, num_classes: int = 2) -> ArchitectureLedger:
    """Row-sequence labeling network ledger: one LSTM step per profile row.

    Cell parameters follow the standard four-gate count
    4*((input + hidden)*hidden + hidden); the per-step output head
    (hidden -> classes, weights shared across steps) adds
    hidden*classes + classes.
    """
    if min(steps, input_features, hidden, num_classes) < 1:
        raise ValidationError("all sizes must be >= 1", field="steps")
    cell = 4 * ((input_features + hidden) * hidden + hidden)
    head = hidden * num_classes + num_classes
    entries = (
        LayerEntry("input", input_features, 0, f"{steps} steps"),
        LayerEntry("lstm", hidden, cell, f"{steps} steps", note="unrolled, shared weights"),
        LayerEntry("output head", num_classes, head, f"{steps} steps", note="shared across steps"),
        LayerEntry("softmax", num_classes, 0, f"{steps} steps"),
    )
    total = cell + head
    meta = {"steps": steps, "hidden": hidden}
    return ArchitectureLedger("lstm", entries, total, meta)
