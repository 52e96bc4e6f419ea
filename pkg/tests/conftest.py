import random

import pytest

from stretchbot.pose import LANDMARK_NAMES, LandmarkFrame, PoseParameters


@pytest.fixture
def params():
    return PoseParameters()


def random_frame(rng: random.Random, present=LANDMARK_NAMES) -> LandmarkFrame:
    return LandmarkFrame(
        timestamp=0.0,
        landmarks={name: (rng.random(), rng.random()) for name in present},
    )


def mirror_frame(frame: LandmarkFrame) -> LandmarkFrame:
    """Reflect all landmarks horizontally and swap the left/right names."""
    mirrored = {}
    for name, (x, y) in frame.landmarks.items():
        if name.startswith("left_"):
            name = "right_" + name[len("left_"):]
        elif name.startswith("right_"):
            name = "left_" + name[len("right_"):]
        mirrored[name] = (1.0 - x, y)
    return LandmarkFrame(timestamp=frame.timestamp, landmarks=mirrored)
