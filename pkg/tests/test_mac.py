import numpy as np
import pytest

from seizsim.errors import CapacityError, ConfigurationError
from seizsim.netsim.mac import assign_codes, hops_disjoint
from seizsim.netsim.phy import walsh_codes


def test_four_nodes_four_codes_is_bijective():
    s = assign_codes("gw", ["gw", "ecg", "ieeg", "dbs"], codes=walsh_codes(8)[:4])
    assert sorted(a.code_index for a in s.assignments.values()) == [0, 1, 2, 3]


def test_five_nodes_four_codes_is_over_capacity():
    with pytest.raises(CapacityError):
        assign_codes("gw", ["a", "b", "c", "d"], codes=walsh_codes(8)[:4])


def test_more_nodes_than_hop_positions():
    with pytest.raises(CapacityError):
        assign_codes("gw", ["a", "b", "c", "d"], hop_positions=4)


def test_same_seed_same_schedule():
    a = assign_codes("gw", ["ecg", "ieeg", "dbs"], seed=4)
    b = assign_codes("gw", ["ecg", "ieeg", "dbs"], seed=4)
    c = assign_codes("gw", ["ecg", "ieeg", "dbs"], seed=5)
    assert a == b
    assert a != c


def test_hop_sequences_pairwise_disjoint():
    s = assign_codes("gw", ["ecg", "ieeg", "dbs"], seed=1)
    nodes = list(s.assignments)
    for i, x in enumerate(nodes):
        for y in nodes[i + 1:]:
            assert hops_disjoint(s[x], s[y])
    assert not hops_disjoint(s["ecg"], s["ecg"])


def test_control_lines_one_per_node():
    s = assign_codes("gw", ["ecg", "ieeg"])
    rows = s.control_lines()
    assert len(rows) == 3 and all(r[1] == "control" for r in rows)


def test_duplicate_ids_rejected():
    with pytest.raises(ConfigurationError):
        assign_codes("gw", ["a", "a"])
