# mmlio/features/gating.py
import logging

import numpy as np

from mmlio.errors import FrameMismatchError
from mmlio.features.cloud import FRAME_SOLID_STATE
from mmlio.features.classify import FeatureParams

logger = logging.getLogger(__name__)


def filter_near(cloud, near_range, origin=None):
    """Drop feature points closer than `near_range` to the sensor origin."""
    origin = np.zeros(3) if origin is None else np.asarray(origin, dtype=np.float64)
    keep_e = np.linalg.norm(cloud.edges - origin, axis=1) >= near_range
    keep_p = np.linalg.norm(cloud.planes - origin, axis=1) >= near_range
    return cloud.subset(keep_e, keep_p)


def detect_bad_frame(F_h, params=None):
    """True when the solid-state frame keeps fewer than tau_e edges past the near range."""
    params = params or FeatureParams()
    if F_h.frame_id != FRAME_SOLID_STATE:
        raise FrameMismatchError(FRAME_SOLID_STATE, F_h.frame_id)
    n_e = filter_near(F_h, params.near_range).n_edges
    bad = n_e < params.tau_e
    if bad:
        logger.debug(f"Bad solid-state frame: {n_e} edges beyond {params.near_range} m "
                     f"(tau_e={params.tau_e})")
    return bad
