from __future__ import annotations

import pytest

from emodas.features import read_ert_csv
from emodas.parser import default_resource_dir, load_resources
from emodas.semnet import build_network, read_edge_list


@pytest.fixture(scope="session")
def toy_dir():
    return default_resource_dir()


@pytest.fixture(scope="session")
def toy_resources(toy_dir):
    return load_resources(toy_dir)


@pytest.fixture(scope="session")
def toy_net(toy_dir):
    return build_network(read_edge_list(str(toy_dir / "edges.tsv")))


@pytest.fixture(scope="session")
def toy_records(toy_dir):
    return read_ert_csv(str(toy_dir / "recalls.csv"))
