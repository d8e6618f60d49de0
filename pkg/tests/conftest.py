from __future__ import annotations

import pytest

from vsnalloc.scenario import one_node_scenario, random_scenario


@pytest.fixture
def one_node():
    return one_node_scenario()


@pytest.fixture
def desk_scenario():
    return random_scenario(3, 6, 6, apps_per_kind=1, area=(100.0, 100.0))
