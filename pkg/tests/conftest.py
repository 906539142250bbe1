import numpy as np
import pytest

from tablescene.geometry import Obb, Pose6D
from tablescene.knowledge import default_knowledge_base
from tablescene.scene import SceneModel, SceneObject


@pytest.fixture(scope="session")
def kb():
    return default_knowledge_base()


def box(center, half, quat=(1.0, 0.0, 0.0, 0.0)):
    return Obb(Pose6D(center, quat), half)


def scene_of(*boxes):
    return SceneModel(objects=tuple(SceneObject(i + 1, b) for i, b in enumerate(boxes)))


def random_rotation(rng):
    q = rng.normal(size=4)
    return q / np.linalg.norm(q)
