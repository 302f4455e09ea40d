import pytest
from hypothesis import given
from hypothesis import strategies as st

from bicritical import finegrid, maps
from bicritical.errors import AddressMissing, BadInput, TooShort
from bicritical.finegrid import GridConfig
from bicritical.numerics import circle_distance


def test_grid_config_round_trip():
    cfg = GridConfig()
    assert GridConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.two_bridges_min == 23 and cfg.saddle_node_threshold == 1000


def test_bridge_classification():
    assert finegrid.classify_bridge(999) == "regular"
    assert finegrid.classify_bridge(1000) == "saddle_node"
    with pytest.raises(BadInput):
        finegrid.classify_bridge(1)


def test_window_membership():
    assert finegrid.in_window(15, 30)
    assert not finegrid.in_window(3, 30)


def test_golden_levels_are_not_two_bridges(golden):
    for n in range(1, 6):
        assert not finegrid.is_two_bridges(golden, n)


def test_engineered_level_is_two_bridges(engineered):
    status = finegrid.is_two_bridges(engineered, 1)
    assert status and status.a_next == 30
    aux = finegrid.chain_for(engineered).aux(2)
    assert aux.info["construction"] == "two_bridges"
    assert aux.info["r"] >= 1 and aux.info["ell"] >= 1
    assert aux.has_label(status.free.label)


def test_engineered_bridges_bookkeeping(engineered):
    chain = finegrid.chain_for(engineered)
    aux = chain.aux(2)
    for bridge in chain.bridges(2):
        assert bridge.count == len(aux.atoms_between(bridge.left, bridge.right))
        span = (chain.vertex(bridge.right).lift - chain.vertex(bridge.left).lift) % 1
        assert abs(span - bridge.length) < 1e-25
        assert finegrid.balanced_decomposition(bridge).reproduces()


def test_balanced_sizes_for_the_engineered_bridges(engineered):
    sizes = {b.name: finegrid.balanced_decomposition(b).sizes() for b in finegrid.chain_for(engineered).bridges(2)}
    assert sizes["G2"] == {"L": [1, 2], "R": [1, 2], "M": [14, 12, 8]}
    assert sizes["G1"] == {"L": [1, 2], "R": [1, 2], "M": [12, 10, 6]}


def test_short_bridge_is_refused():
    with pytest.raises(TooShort):
        finegrid.balanced_decomposition(7)


@given(st.integers(8, 5000))
def test_balanced_decomposition_tiles(count):
    bd = finegrid.balanced_decomposition(count)
    assert bd.reproduces()
    sizes = bd.sizes()
    assert sizes["L"] == sizes["R"] == [2 ** i for i in range(bd.d + 1)]
    # the innermost central piece is comparable to the largest laterals
    assert 2 <= sizes["M"][-1] <= 4 * 2 ** bd.d + 2


def test_fine_grid_axioms(golden):
    chain = finegrid.chain_for(golden)
    previous = None
    for n in range(1, 8):
        grid = chain.grid(n)
        assert set(grid.labels) <= set(chain.aux(n).labels)
        if previous is not None:
            assert set(previous.labels) < set(grid.labels)
            assert grid.report["max_children"] <= 1000
        assert grid.report["adjacent_ratio"] <= 100
        previous = grid


def test_grid_export(golden):
    grid = finegrid.fine_grid(golden, 4)
    d = grid.to_dict()
    assert d["schema_version"] == finegrid.SCHEMA_VERSION
    assert len(d["atoms"]) == len(grid)
    csv_text = finegrid.adjacency_csv([grid])
    assert csv_text.splitlines()[0] == "level,index,ratio"
    assert finegrid.grids_svg([grid]).count("<path") == len(grid)


def test_addresses_replay(golden):
    chain = finegrid.chain_for(golden)
    geo = chain.level(3)
    labels = [v.label for v in chain.aux(6).vertices if geo.j_here[0] <= geo.offset(v.label) <= geo.j_here[1]]
    assert labels
    for lab in labels:
        addr = finegrid.vertex_address(golden, lab, 3, 3)
        assert addr.bounds_respected()
        assert circle_distance(addr.replay(golden), chain.vertex(lab).lift) < 1e-10


def test_address_of_a_foreign_label(golden):
    with pytest.raises(AddressMissing):
        finegrid.vertex_address(golden, (0, 10 ** 6), 3, 3)
