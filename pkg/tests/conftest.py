from __future__ import annotations

import pytest

from roadstereo.synth import default_scene
from roadstereo.synth import render_pair
from testing.scenes import BOX


@pytest.fixture(scope='session')
def plane_scene():
    return default_scene()


@pytest.fixture(scope='session')
def box_scene():
    return default_scene()._replace(boxes=(BOX,))


@pytest.fixture(scope='session')
def plane_pair(plane_scene):
    return render_pair(plane_scene)


@pytest.fixture(scope='session')
def box_pair(box_scene):
    return render_pair(box_scene)
