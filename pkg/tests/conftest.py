import numpy as np
import pytest

from normalis import CameraIntrinsics, kernels


@pytest.fixture
def intrinsics():
    return CameraIntrinsics(fx=100.0, fy=100.0, u0=40.0, v0=30.0, width=80, height=60)


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    """Run kernel-dependent tests once per available backend."""
    return request.param


def ramp_inverse_depth(width=16, height=12, a=0.1, bu=0.002, bv=0.0):
    """Affine inverse-depth field a + bu*u + bv*v as a plain array."""
    u = np.arange(width, dtype=np.float64)[None, :]
    v = np.arange(height, dtype=np.float64)[:, None]
    return a + bu * u + bv * v
