"""Geodesic landmark maps on binary masks: distance transforms, per-landmark
geodesic fields with fusion and quantization, boundary-sequence encoding of
chin landmarks, mask cleanup, evaluation metrics, a synthetic mandible
phantom, and architecture parameter ledgers.
"""

from .edt import ltdt, sltdt
from .errors import FormatError, GeolmkError, ValidationError
from .geodesic import (
    BACKGROUND_CLASS,
    NUM_CLASSES,
    GeodesicMap,
    QuantizedGeodesicMap,
    auto_s_bin,
    decode_landmarks,
    fuse_maps,
    geodesic_map,
    geodesic_maps,
    quantize,
)
from .metrics import (
    LandmarkError,
    LandmarkErrors,
    SegScores,
    aggregate,
    hausdorff_mm,
    landmark_errors,
    seg_scores,
)
from .netspec import ArchitectureLedger, lstm_ledger, tiramisu_ledger, unet_ledger
from .phantom import PhantomSpec, generate
from .postprocess import fill_holes, largest_component, mask_boundary
from .seqlmk import (
    SEQ_SIZE,
    BoundarySequence,
    decode_sequence,
    extract_boundary_sequence,
    pca_augment,
)
from .volume import (
    CLOSE_LANDMARK_NAMES,
    LANDMARK_NAMES,
    SPARSE_LANDMARK_NAMES,
    BinaryMask,
    Landmark,
    LandmarkSet,
    Volume,
    landmark_set,
)

__version__ = "0.1.0"

__all__ = [
    "ArchitectureLedger",
    "BACKGROUND_CLASS",
    "BinaryMask",
    "BoundarySequence",
    "CLOSE_LANDMARK_NAMES",
    "FormatError",
    "GeodesicMap",
    "GeolmkError",
    "LANDMARK_NAMES",
    "Landmark",
    "LandmarkError",
    "LandmarkErrors",
    "LandmarkSet",
    "NUM_CLASSES",
    "PhantomSpec",
    "QuantizedGeodesicMap",
    "SEQ_SIZE",
    "SPARSE_LANDMARK_NAMES",
    "SegScores",
    "ValidationError",
    "Volume",
    "aggregate",
    "auto_s_bin",
    "decode_landmarks",
    "decode_sequence",
    "extract_boundary_sequence",
    "fill_holes",
    "fuse_maps",
    "generate",
    "geodesic_map",
    "geodesic_maps",
    "hausdorff_mm",
    "landmark_errors",
    "landmark_set",
    "largest_component",
    "lstm_ledger",
    "ltdt",
    "mask_boundary",
    "quantize",
    "seg_scores",
    "sltdt",
    "tiramisu_ledger",
    "unet_ledger",
]
