import numpy as np
import pytest

import geolmk
from geolmk.volume import BinaryMask


@pytest.fixture(scope="session", autouse=True)
def warm_numba_kernels():
    # First use JIT-compiles the distance/shortest-path kernels; doing it here
    # keeps the compile cost out of every timed assertion.
    data = np.zeros((4, 4, 4), np.uint8)
    data[1:3, 1:3, 1:3] = 1
    m = BinaryMask(data, (1.0, 1.0, 1.0))
    geolmk.ltdt(m)
    geolmk.sltdt(m)
    lm = geolmk.Landmark(1, "Me", (1, 1, 1), True)
    geolmk.geodesic_map(m, lm, connectivity=6)
    geolmk.geodesic_map(m, lm, connectivity=26)


@pytest.fixture(scope="session")
def default_phantom():
    return geolmk.generate(geolmk.PhantomSpec())


@pytest.fixture(scope="session")
def small_phantom():
    spec = geolmk.PhantomSpec(
        dims=(64, 64, 64), arch_radius=20, arch_thickness=6, ramus_height=18,
        ramus_radius=4, condyle_radius=4, coronoid_radius=3, bump_offset=6,
    )
    return geolmk.generate(spec)


@pytest.fixture(scope="session")
def default_quantized(default_phantom):
    """Fused auto-quantized map over the sparse landmarks of the 96^3 phantom."""
    mask, lms = default_phantom
    maps = geolmk.geodesic_maps(mask, lms, geolmk.SPARSE_LANDMARK_NAMES, threads=2)
    fused = geolmk.fuse_maps(maps)
    return geolmk.quantize(fused, mask=mask)


def random_mask(seed: int, shape=(16, 16, 16), density=0.5, spacing=(1.0, 1.0, 1.0)) -> BinaryMask:
    rng = np.random.default_rng(seed)
    return BinaryMask((rng.random(shape) < density).astype(np.uint8), spacing)
