import json

import numpy as np
import pytest

from consensus_lab import InvalidNetwork, OrientedNetwork
from consensus_lab.generators import cycle_power, random_bipartite_permutation
from consensus_lab.io import load_network, network_from_json, network_to_json, save_network, write_csv


def test_round_trip(tmp_path):
    net = random_bipartite_permutation(12, 3, seed=1)
    save_network(net, tmp_path / "g.json")
    back = load_network(tmp_path / "g.json")
    assert back.edges == net.edges
    np.testing.assert_array_equal(back.conductance, net.conductance)
    assert back.directed is False


def test_ids_are_one_based():
    payload = network_to_json(OrientedNetwork(3, ((0, 2),), [0.5]))
    assert payload == {"n": 3, "edges": [[1, 3, 0.5]], "directed": False}


def test_undirected_canonical_orientation():
    net = network_from_json({"n": 3, "edges": [[3, 1], [2, 1, 2.0]]})
    assert net.edges == ((0, 2), (0, 1))
    np.testing.assert_array_equal(net.conductance, [1.0, 2.0])


def test_directed_orientation_kept():
    net = network_from_json({"n": 2, "edges": [[2, 1, 1.5]], "directed": True})
    assert net.edges == ((1, 0),)
    assert net.coupling_matrix()[1, 0] == 1.5


@pytest.mark.parametrize("payload", [
    {"edges": []},
    {"n": 3, "edges": [[1]]},
    {"n": 3, "edges": [[1, 4]]},
    {"n": 3, "edges": [[1, 2], [2, 1]]},
])
def test_malformed(payload):
    with pytest.raises(InvalidNetwork):
        network_from_json(payload)


def test_file_is_json(tmp_path):
    save_network(cycle_power(6, 2), tmp_path / "sub" / "c.json")
    payload = json.loads((tmp_path / "sub" / "c.json").read_text())
    assert len(payload["edges"]) == 6


def test_write_csv(tmp_path):
    write_csv(["a", "b"], [[1, 2.5], [3, 4]], tmp_path / "x.csv")
    assert (tmp_path / "x.csv").read_text().splitlines() == ["a,b", "1,2.5", "3,4"]
