import mpmath
import pytest

from bicritical import maps, partitions
from bicritical.errors import BadInput
from bicritical.numerics import tolerance


def test_atom_count_and_kinds(golden):
    cf = maps.map_digits(golden, 10)
    for n in range(1, 9):
        part = partitions.standard_partition(golden, 0, n)
        assert len(part) == cf.q(n) + cf.q(n + 1)
        assert sum(a.kind == "long" for a in part.atoms) == cf.q(n + 1)
        assert sum(a.kind == "short" for a in part.atoms) == cf.q(n)


def test_atoms_tile_the_circle(golden):
    part = partitions.standard_partition(golden, 1, 7)
    assert abs(part.total_length() - 1) < 1e-25
    for a, b in zip(part.atoms, part.atoms[1:]):
        assert abs(a.start + a.length - b.start) < 1e-25


def test_refinement_chain(golden):
    parts = [partitions.standard_partition(golden, 0, n) for n in range(2, 9)]
    for coarse, fine in zip(parts, parts[1:]):
        assert partitions.refines(fine, coarse)
    assert not partitions.refines(parts[0], parts[-1])


def test_return_interval_side_alternates(golden):
    sides = [partitions.return_interval(golden, 0, n).side for n in range(1, 9)]
    assert all(s1 == -s0 for s0, s1 in zip(sides, sides[1:]))


def test_same_side_return_intervals_shrink(golden):
    lengths = [partitions.return_interval(golden, 0, n).length for n in range(1, 13)]
    assert all(lengths[n + 2] < lengths[n] for n in range(len(lengths) - 2))


def test_partition_of_a_regular_point(golden):
    part = partitions.standard_partition(golden, mpmath.mpf("0.5"), 5)
    cf = maps.map_digits(golden, 7)
    assert len(part) == cf.q(5) + cf.q(6)
    assert part.critical_index is None


def test_locate_finds_containing_atom(golden):
    part = partitions.standard_partition(golden, 0, 6)
    for j, atom in enumerate(part.atoms):
        mid = part.base + atom.start + atom.length / 2
        assert part.locate(mid) == j


def test_real_bounds_report(golden):
    rep = partitions.real_bounds_report(golden, 0, range(4, 9))
    assert rep["sup_C"] < 100
    assert rep["n0"] is not None
    assert all(r["mu_n"] < 1 for r in rep["rows"] if r["n"] >= rep["n0"])


def test_real_bounds_rejects_bad_index(golden):
    with pytest.raises(BadInput):
        partitions.real_bounds_report(golden, 5)


def test_symmetric_ratio_is_order_one(golden):
    for n in range(3, 9):
        r = partitions.symmetric_interval_ratio(golden, 0, n)
        assert 0.01 < r < 100


def test_export_shapes(golden):
    part = partitions.standard_partition(golden, 0, 4)
    d = part.to_dict()
    assert d["level"] == 4 and len(d["atoms"]) == len(part)
    assert part.to_svg().startswith("<svg")
    assert min(part.lengths()) > tolerance(10)
