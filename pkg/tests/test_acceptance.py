"""The fourteen acceptance criteria, each recorded as one PASS/FAIL line.

The lines are printed when the test runs and repeated in the terminal
summary of the pytest session.
"""

import json
import time
from fractions import Fraction

import mpmath
import numpy as np

from bicritical import cli, finegrid, maps, partitions, renorm, rigidity
from bicritical.numerics import ContinuedFraction, cf_digits, circle_distance, convergents
from conftest import ACCEPTANCE_LINES

DEPTH_CAP = 12
BATTERY_LEVELS = range(2, DEPTH_CAP + 1)
DECAY_START = 4


def record(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _fraction_value(digits):
    x = Fraction(0)
    for a in reversed(digits):
        x = 1 / (a + x)
    return x


def test_criterion_01_continued_fractions():
    start = time.perf_counter()
    golden = cf_digits((mpmath.sqrt(5) - 1) / 2, 15).digits == (1,) * 15
    silver = cf_digits(mpmath.sqrt(2) - 1, 10).digits == (2,) * 10
    rng = np.random.default_rng(1)
    mismatches = 0
    for _ in range(50):
        digits = [int(a) for a in rng.integers(1, 100, size=12)]
        conv = convergents(digits)
        for n in range(1, 13):
            exact = _fraction_value(digits[:n])
            mismatches += conv[n] != (exact.numerator, exact.denominator)
    elapsed = time.perf_counter() - start
    record(1, golden and silver and mismatches == 0 and elapsed < 1,
           f"golden={golden} silver={silver} convergent mismatches={mismatches} time={elapsed:.2f}s")


def test_criterion_02_tuning_closure():
    results = []
    for digit, depth in ((1, 12), (2, 8)):
        start = time.perf_counter()
        fmap = maps.tune_rotation(lambda a: maps.TrigBicritical(a, "0.2"), ContinuedFraction((digit,)), depth)
        got = maps.rotation_number_digits(fmap, depth).digits
        results.append((got == (digit,) * depth, time.perf_counter() - start))
    ok = all(hit and t < 60 for hit, t in results)
    record(2, ok, "; ".join(f"[{d}]x{k}: match={hit} time={t:.1f}s"
                            for (d, k), (hit, t) in zip(((1, 12), (2, 8)), results)))


def test_criterion_03_partition_axioms(golden):
    start = time.perf_counter()
    cf = maps.map_digits(golden, 14)
    parts = {n: partitions.standard_partition(golden, 0, n) for n in range(1, 13)}
    counts_ok = all(len(p) == cf.q(n) + cf.q(n + 1) for n, p in parts.items())
    gap = 0
    for p in parts.values():
        gap = max(gap, abs(p.total_length() - 1))
        for a, b in zip(p.atoms, p.atoms[1:]):
            gap = max(gap, abs(a.start + a.length - b.start))
    chain_ok = all(partitions.refines(parts[n + 1], parts[n]) for n in range(1, 12))
    elapsed = time.perf_counter() - start
    record(3, counts_ok and gap < 1e-20 and chain_ok and elapsed < 30,
           f"counts={counts_ok} max gap={float(gap):.1e} refinement={chain_ok} time={elapsed:.1f}s")


def test_criterion_04_real_bounds(golden):
    rep = partitions.real_bounds_report(golden, 0, range(4, 13))
    n0 = rep["n0"]
    shrink = n0 is not None and all(r["mu_n"] < 1 for r in rep["rows"] if r["n"] >= n0)
    record(4, rep["sup_C"] <= 100 and shrink,
           f"max C_n={rep['sup_C']:.3f} max mu={rep['sup_mu']:.3f} n0={n0}")


def test_criterion_05_commuting_pairs(golden):
    worst_low, worst_high, invalid = 0.0, 0.0, []
    for n in range(1, 11):
        rep = renorm.validate_pair(renorm.extract_pair(golden, 0, n))
        if not rep["ok"]:
            invalid.append(n)
        if n <= 6:
            worst_low = max(worst_low, rep["commute_gap"])
        else:
            worst_high = max(worst_high, rep["commute_gap"])
    record(5, not invalid and worst_low <= 1e-15 and worst_high <= 1e-15,
           f"invalid levels={invalid} defect n<=6: {worst_low:.1e}, 7<=n<=10: {worst_high:.1e}")


def test_criterion_06_renormalization_semigroup(golden, engineered):
    worst = 0.0
    for n in range(1, 9):
        a = renorm.renormalize(renorm.extract_pair(golden, 0, n))
        b = renorm.normalize(renorm.extract_pair(golden, 0, n + 1))
        worst = max(worst, renorm.pair_distance(a, b, 0))
    matches = []
    for fmap, start, steps in ((golden, 1, 8), (engineered, 0, 5)):
        digits = maps.map_digits(fmap, start + steps + 2).digits
        z = renorm.normalize(renorm.extract_pair(fmap, 0, start))
        periods = []
        for _ in range(steps):
            periods.append(renorm.period(z))
            z = renorm.renormalize(z)
        matches.append(tuple(periods) == digits[start + 1:start + 1 + steps])
    record(6, worst <= 1e-8 and all(matches),
           f"max d0(R(extract n), extract n+1)={worst:.1e} periods golden={matches[0]} engineered={matches[1]}")


def test_criterion_07_metric_axioms(golden, golden_pair):
    pool = [renorm.normalize(renorm.extract_pair(m, 0, n)) for m in (golden, *golden_pair) for n in range(2, 9)]
    zero = max(renorm.pair_distance(z, z, k) for z in pool[:5] for k in (0, 1))
    homothety = 0.0
    for lam in (0.4, 2.5, 7.3):
        z = renorm.extract_pair(golden, 0, 5)
        scaled = renorm._scaled_pair(z, lam)
        homothety = max(homothety, renorm.pair_distance(z, scaled, 0), renorm.pair_distance(z, scaled, 1))
    rng = np.random.default_rng(7)
    order_failures = 0
    for _ in range(20):
        i, j = rng.choice(len(pool), size=2, replace=False)
        order_failures += renorm.pair_distance(pool[i], pool[j], 0) > renorm.pair_distance(pool[i], pool[j], 1)
    record(7, zero == 0 and homothety <= 1e-15 and order_failures == 0,
           f"d(z,z)={zero} homothety={homothety:.1e} d0>d1 cases={order_failures}/20")


def test_criterion_08_oracle_battery(golden, golden_pair):
    start = time.perf_counter()
    notes, ok = [], True
    same = rigidity.rigidity_battery(rigidity.ConjugacyOnOrbits(golden, golden), BATTERY_LEVELS)
    same_max = max(same[k].max_value() for k in ("d0", "d1", "interval_ratio", "criterion", "key_estimate"))
    ok &= same_max < 1e-20
    notes.append(f"g=f max={same_max:.1e}")

    rot = maps.rotated_copy(golden, "0.1")
    setup = rigidity.ConjugacyOnOrbits(golden, rot)
    crit = rigidity.criterion_statistics(setup, BATTERY_LEVELS).max_value()
    d1 = rigidity.renorm_convergence(golden, rot, 0, 1, BATTERY_LEVELS, setup).max_value()
    ok &= crit <= 1e-10 and d1 <= 1e-10
    notes.append(f"rotated criterion={crit:.1e} d1={d1:.1e}")

    f, g = golden_pair
    battery = rigidity.rigidity_battery(rigidity.ConjugacyOnOrbits(f, g), BATTERY_LEVELS)
    for name in ("d0", "d1", "interval_ratio", "criterion"):
        s = battery[name]
        good = s.decreasing_from(DECAY_START) and s.claims_decay()
        ok &= good
        quality = "n/a" if s.fit_quality is None else f"{s.fit_quality:.3f}"
        rate = "n/a" if s.rate is None else f"{s.rate:.3f}"
        notes.append(f"{name}: decreasing={s.decreasing_from(DECAY_START)} R2={quality} rate={rate}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 300
    notes.append(f"time={elapsed:.0f}s")
    record(8, ok, "; ".join(notes))


def test_criterion_09_fine_grid(golden):
    chain = finegrid.chain_for(golden)
    grids = [chain.grid(n) for n in range(1, 11)]
    strict = all(set(a.labels) < set(b.labels) for a, b in zip(grids, grids[1:]))
    children = max(g.report["max_children"] for g in grids[1:])
    ratio = max(g.report["adjacent_ratio"] for g in grids)
    inclusion = all(set(g.labels) <= set(chain.aux(g.level).labels) for g in grids)
    record(9, strict and children <= 1000 and ratio <= 100 and inclusion,
           f"strict refinement={strict} max children={children} adjacent ratio={ratio:.2f} inclusion={inclusion}")


def test_criterion_10_two_bridges(engineered):
    chain = finegrid.chain_for(engineered)
    status = chain.status(1)
    aux = chain.aux(2)
    free_in = status.free is not None and aux.has_label(status.free.label)
    r, ell = aux.info.get("r", 0), aux.info.get("ell", 0)
    book = True
    bridges = chain.bridges(2)
    for bridge in bridges:
        book &= bridge.count == len(aux.atoms_between(bridge.left, bridge.right))
        span = (chain.vertex(bridge.right).lift - chain.vertex(bridge.left).lift) % 1
        book &= abs(span - mpmath.fsum(bridge.lengths)) < 1e-25
        bd = finegrid.balanced_decomposition(bridge)
        sizes = bd.sizes()
        book &= bd.reproduces() and sum(sizes["L"]) + sum(sizes["R"]) + sizes["M"][-1] == bridge.count
    ok = bool(status) and aux.info["construction"] == "two_bridges" and free_in and r >= 1 and ell >= 1 \
        and book and len(bridges) > 0
    record(10, ok, f"two-bridges={bool(status)} free point in aux={free_in} r={r} ell={ell} "
                   f"bridges={[(b.name, b.count) for b in bridges]} bookkeeping={book}")


def test_criterion_11_yoccoz(engineered, golden):
    chain = finegrid.chain_for(engineered)
    constants = []
    for bridge in chain.bridges(2):
        apm = rigidity.AlmostParabolicMap.from_bridge(engineered, bridge, chain)
        constants.append(rigidity.yoccoz_check(apm)["C"])
    rel = max(abs(rigidity.schwarzian(golden, x, 2) / rigidity.schwarzian_finite_difference(golden, x, 2) - 1)
              for x in ("0.07", "0.33", "0.58", "0.9"))
    sweep = rigidity.negativity_sweep(golden, range(1, 13))
    ok = bool(constants) and max(constants) <= 100 and rel <= 1e-6 and sweep["n0"] is not None
    record(11, ok, f"Yoccoz C per bridge={[round(c, 2) for c in constants]} "
                   f"cocycle vs finite differences={float(rel):.1e} n0={sweep['n0']}")


def test_criterion_12_shadowing():
    phi = rigidity.AlmostParabolicMap.synthetic()
    amplitude = mpmath.mpf("1e-6")

    def psi_branch(x):
        return phi.branch(x) + amplitude * mpmath.exp(-400 * x * x)

    psi = rigidity.AlmostParabolicMap.from_orbit(psi_branch, phi.domains[0][0], phi.length)
    out = rigidity.shadowing_check(phi, psi, samples=400)
    bounded = all(r["ratio"] <= out["C"] for r in out["rows"])
    zero = rigidity.shadowing_check(phi, phi, samples=50)
    zero_exact = all(r["deviation"] == 0 for r in zero["rows"])
    record(12, bounded and zero_exact and len(out["rows"]) == phi.length // 2,
           f"l={phi.length} k<= {phi.length // 2} C={out['C']:.3f} zero case exact={zero_exact}")


def test_criterion_13_address_replay(golden_pair):
    f, g = golden_pair
    setup = rigidity.ConjugacyOnOrbits(f, g)
    chain = setup.chain
    geo = chain.level(4)
    labels = [v.label for v in chain.aux(8).vertices if geo.j_here[0] <= geo.offset(v.label) <= geo.j_here[1]]
    replay_bad, doubles, worst_replay, worst_double = 0, 0, 0.0, 0.0
    for lab in labels:
        addrs = finegrid.vertex_addresses(f, lab, 4, 4, limit=2)
        for a in addrs:
            err = float(circle_distance(a.replay(f), chain.vertex(lab).lift))
            worst_replay = max(worst_replay, err)
            replay_bad += err > 1e-10
        if len(addrs) == 2:
            doubles += 1
            dev = float(circle_distance(rigidity.conjugacy_eval(setup, addrs[0]),
                                        rigidity.conjugacy_eval(setup, addrs[1])))
            worst_double = max(worst_double, dev)
    record(13, labels and replay_bad == 0 and worst_double <= 1e-9,
           f"vertices={len(labels)} replay failures={replay_bad} worst replay={worst_replay:.1e} "
           f"doubly addressed={doubles} worst deviation={worst_double:.1e}")


def test_criterion_14_determinism(tmp_path):
    config = {"pair": "second", "depth": 12, "n_range": [3, 8]}
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    runs = [tmp_path / "run1", tmp_path / "run2"]
    codes = [cli.main(["--config", str(path), "--out", str(out), "verify"]) for out in runs]
    names = sorted(p.name for p in runs[0].iterdir() if p.suffix in (".json", ".csv"))
    same = [n for n in names if (runs[0] / n).read_bytes() == (runs[1] / n).read_bytes()]
    record(14, codes == [0, 0] and same == names and "manifest.json" in names,
           f"exit codes={codes} identical files={len(same)}/{len(names)}")
