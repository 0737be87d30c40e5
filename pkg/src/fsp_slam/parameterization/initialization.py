"""Single-view initialization of FSP rectangles.

The form factor, the orientation relative to the camera and the width at unitary
depth are observable from the four corner pixels of a single view; only the
inverse depth is not and has to be seeded.
"""

import itertools
from typing import Hashable, Sequence

import numpy as np
from numpy import ndarray as A

from fsp_slam.geometry.camera import CameraIntrinsics, Pixel
from fsp_slam.geometry.lie import Rotation, nearest_rotation
from fsp_slam.parameterization.fsp import FspRect
from fsp_slam.utils.exceptions import DegenerateParam, DegenerateView

#: Corners of the unit square in the order of `StructuralPointIndex`
UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])

_COLLINEAR_TOL = 1e-10


def _as_array(corners_px: Sequence[Pixel] | A) -> A:
    if len(corners_px) != 4:
        msg = f"Expected 4 corner pixels, got {len(corners_px)}"
        raise DegenerateView(msg)
    return np.array(
        [c.as_array() if isinstance(c, Pixel) else np.asarray(c, dtype=float) for c in corners_px]
    )


def assert_no_three_collinear(points: A) -> None:
    """Raises `DegenerateView` if any three of the 2D points lie on a line."""
    homog = np.hstack([points, np.ones((len(points), 1))])
    scale = max(1.0, float(np.max(np.abs(points))) ** 2)
    for triple in itertools.combinations(range(len(points)), 3):
        if abs(np.linalg.det(homog[list(triple)])) < _COLLINEAR_TOL * scale:
            msg = f"Corners {[i + 1 for i in triple]} are collinear"
            raise DegenerateView(msg)


def dlt_homography(src: A, dst: A) -> A:
    """Homography mapping ``src`` to ``dst`` points (direct linear transform).
    With four correspondences the solution is exact.
    """
    rows = []
    for (x, y), (u, v) in zip(src, dst):
        rows.append([x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, -u])
        rows.append([0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y, -v])
    _, s, vt = np.linalg.svd(np.array(rows))
    if s[-2] < 1e-12 * s[0]:
        msg = "Homography is rank-deficient"
        raise DegenerateView(msg)
    return vt[-1].reshape(3, 3)


def init_fsp_from_single_view(
    K: CameraIntrinsics,
    corners_px: Sequence[Pixel] | A,
    omega0: float,
    anchor_id: Hashable | None = None,
) -> FspRect:
    """Initialize an FSP rectangle anchored at the observing camera.

    The homography ``G = K^-1 H`` from the unit square to the observed corners has
    columns proportional to ``(w r1, h r2, t)``, where ``r1, r2`` are the in-plane
    axes of the rectangle and ``t`` its origin in the camera frame. Hence the ray
    is ``t / t_z``, the form factor ``|g1| / |g2|`` and the width at unitary depth
    ``|g1| / g3_z``.

    Args:
        K: Camera intrinsics
        corners_px: The four corner pixels, ordered as `StructuralPointIndex`
        omega0: Inverse depth seed
        anchor_id: Graph variable of the anchor pose

    Raises:
        DegenerateView: Collinear corners or rectangle behind the camera
    """
    if omega0 <= 0:
        msg = f"Inverse depth seed must be positive, got {omega0}"
        raise DegenerateParam(msg)
    normalized = K.normalize(_as_array(corners_px))
    assert_no_three_collinear(normalized)
    G = dlt_homography(UNIT_SQUARE, normalized)
    if G[2, 2] < 0:
        G = -G
    depths = np.hstack([UNIT_SQUARE, np.ones((4, 1))]) @ G[2]
    if G[2, 2] <= 0 or np.any(depths <= 0):
        msg = "Rectangle would lie behind the camera"
        raise DegenerateView(msg)
    g1, g2, g3 = G[:, 0], G[:, 1], G[:, 2]
    n1 = np.linalg.norm(g1)
    n2 = np.linalg.norm(g2)
    r1 = g1 / n1
    r2 = g2 / n2
    rotation = nearest_rotation(np.column_stack([r1, r2, np.cross(r1, r2)]))
    return FspRect(
        ray=g3[:2] / g3[2],
        omega=omega0,
        w_bar=n1 / g3[2],
        form_factor=n1 / n2,
        rel_orientation=Rotation.from_matrix(rotation),
        anchor_id=anchor_id,
    )
