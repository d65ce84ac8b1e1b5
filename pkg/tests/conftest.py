import pytest

from ovcd.backends.base import BackendBundle
from ovcd.backends.scene import NuisanceParams, SceneObject, SyntheticScene
from ovcd.backends.synthetic import SyntheticBackend

IDENTITY_NUISANCE = NuisanceParams(brightness_offset=0.0, contrast_scale=1.0, gamma=(1.0, 1.0, 1.0))


@pytest.fixture
def backend():
    return SyntheticBackend()


@pytest.fixture
def bundle(backend):
    return BackendBundle.single(backend)


def make_scene(objects, seed=7, size=96, nuisance=IDENTITY_NUISANCE):
    return SyntheticScene(seed=seed, size=size, objects=list(objects), nuisance=nuisance)


def scene_object(category, shape="rect", params=(20, 20, 24, 18), value=0.75, hue_offset=0.0,
                 at_t1=True, at_t2=True):
    from ovcd.backends.bands import BAND_HUE

    return SceneObject(
        shape=shape,
        params=tuple(params),
        category=category,
        hue_deg=BAND_HUE[category] + hue_offset,
        saturation=0.75,
        value=value,
        at_t1=at_t1,
        at_t2=at_t2,
    )
