import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corpus import random_connected_graph, random_cut_family, wall_corpus
from wallperc.cuts import CutFamily, wall_crossing, wall_kernel
from wallperc.errors import (
    BadPermutation,
    BadProbability,
    EmptyFamily,
    InputError,
    NegativeTime,
    NonIncreasingEvent,
    SizeMismatch,
    TooManyEdges,
    TooManyWalls,
    ZeroSamples,
)
from wallperc.graph import build_graph, distance_matrix, gen_graph
from wallperc.kernel import is_positive_definite
from wallperc.percolation import (
    Configuration,
    PercolationDistribution,
    UnionFind,
    cluster_labels,
    configuration_at,
    configurations_at,
    cut_decomposition,
    cut_decomposition_layers,
    distribution_from_walls,
    event_covariances,
    exhaustive_bernoulli,
    fkg_check_exact,
    marginal_report,
    sample_activation_times,
    two_point_exact,
    two_point_mc,
    two_point_mc_sweep,
    verify_sandwich,
)
from wallperc.walls import radial_walls, walls_from_l1_embedding
from wallperc.kernel import PointCloud

EDGE = build_graph(2, [(0, 1)])


def unit_walls(n):
    return walls_from_l1_embedding(PointCloud(np.arange(n, dtype=float)[:, None], "l1"))


def brute_two_point(g, d):
    """Connectivity by repeated boolean matrix products, independent of union-find."""
    tau = np.zeros((g.n, g.n))
    for row, p in zip(d.configs, d.probs):
        reach = np.eye(g.n, dtype=bool)
        for e in np.flatnonzero(row):
            u, v = g.edges[e]
            reach[u, v] = reach[v, u] = True
        for _ in range(g.n):
            reach = (reach.astype(int) @ reach.astype(int)) > 0
        tau += p * reach
    return tau


# ------------------------------------------------------------ clocks


def test_sample_means():
    w1 = CutFamily.from_sets(2, [((1,), 1.0)])
    w2 = CutFamily.from_sets(2, [((1,), 2.0)])
    t1 = np.array([sample_activation_times(w1, s).times[0] for s in range(100_000)])
    t2 = np.array([sample_activation_times(w2, s).times[0] for s in range(100_000)])
    assert t1.mean() == pytest.approx(1.0, abs=0.01)
    assert t2.mean() == pytest.approx(0.5, abs=0.01)


def test_clocks_deterministic_and_positive():
    w = random_cut_family(np.random.default_rng(1), 6)
    a, b = sample_activation_times(w, 42), sample_activation_times(w, 42)
    assert np.array_equal(a.times, b.times)
    assert np.all(a.times > 0) and np.all(np.isfinite(a.times))
    assert not np.array_equal(a.times, sample_activation_times(w, 43).times)
    assert not np.array_equal(a.times, sample_activation_times(w, 42, replica=1).times)
    with pytest.raises(EmptyFamily):
        sample_activation_times(CutFamily.empty(3), 0)


def test_configuration_examples():
    g = gen_graph("path", 4)
    w = unit_walls(4)
    times = sample_activation_times(w, 5)
    assert configuration_at(times, 0.0, w, g).open_edges() == [0, 1, 2]
    late = configuration_at(times, float(times.times.max()) + 1, w, g)
    assert late.open_edges() == []
    with pytest.raises(NegativeTime):
        configuration_at(times, -0.1, w, g)
    with pytest.raises(SizeMismatch):
        configuration_at(times, 1.0, radial_walls(gen_graph("path", 3)), gen_graph("path", 3))


def test_configuration_rule_matches_definition():
    rng = np.random.default_rng(3)
    for seed in range(20):
        g = random_connected_graph(rng)
        w = random_cut_family(rng, g.n)
        times = sample_activation_times(w, seed)
        for t in (0.2, 0.7, 1.5):
            conf = configuration_at(times, t, w, g)
            for e in range(g.m):
                _, idx = wall_crossing(w, g, e)
                assert conf.is_open(e) == all(times.times[c] >= t for c in idx)


def test_configuration_type():
    c = Configuration.from_bools([True, False, True])
    assert c.mask == 0b101 and len(c) == 2 and c.open_edges() == [0, 2]
    assert np.array_equal(c.to_bools(), [True, False, True])
    assert Configuration.from_bools([True, False, False]) <= c
    assert not c <= Configuration.from_bools([True, False, False])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_coupling_is_monotone(seed):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng)
    w = random_cut_family(rng, g.n)
    ts = np.sort(rng.uniform(0, 3, size=8))
    rows = configurations_at(sample_activation_times(w, seed), ts, w, g)
    # later configurations are subsets of earlier ones
    assert not np.any(rows[1:] & ~rows[:-1])


# ------------------------------------------------------------ exact laws


def test_distribution_examples():
    w = CutFamily.from_sets(2, [((1,), 1.0)])
    d = distribution_from_walls(w, EDGE, 0.7)
    assert d.edge_marginals()[0] == pytest.approx(0.496585, abs=1e-6)
    assert d.edge_marginals()[0] == pytest.approx(math.exp(-0.7), abs=1e-15)

    g = gen_graph("path", 5)
    d0 = distribution_from_walls(unit_walls(5), g, 0.0)
    assert len(d0) == 1 and d0.configs[0].all() and d0.probs[0] == 1.0

    tau = two_point_exact(distribution_from_walls(unit_walls(3), gen_graph("path", 3), 0.5))
    assert tau[0, 2] == pytest.approx(math.exp(-1), abs=1e-15)
    assert tau[0, 2] == pytest.approx(0.367879, abs=1e-6)


def test_bernoulli_examples():
    g = gen_graph("cycle", 4)
    full = exhaustive_bernoulli(g, 1.0)
    assert len(full) == 1 and full.configs[0].all()
    empty = exhaustive_bernoulli(g, 0.0)
    assert len(empty) == 1 and not empty.configs[0].any()
    d = exhaustive_bernoulli(EDGE, 0.3)
    assert sorted(d.probs.tolist()) == pytest.approx([0.3, 0.7], abs=1e-15)
    assert two_point_exact(d)[0, 1] == pytest.approx(0.3, abs=1e-15)
    with pytest.raises(BadProbability):
        exhaustive_bernoulli(g, 1.2)
    with pytest.raises(TooManyEdges):
        exhaustive_bernoulli(gen_graph("grid", 4, 4), 0.5)


def test_too_many_walls():
    w = CutFamily.from_sets(22, [((i,), 1.0) for i in range(1, 22)])
    with pytest.raises(TooManyWalls):
        distribution_from_walls(w, gen_graph("path", 22), 1.0)
    with pytest.raises(NegativeTime):
        distribution_from_walls(unit_walls(3), gen_graph("path", 3), -1.0)


def test_distribution_invariants_and_json():
    for g, w, t in wall_corpus(seed=7, count=15):
        d = distribution_from_walls(w, g, t)
        assert np.all(d.probs > 0) and abs(d.probs.sum() - 1) <= 1e-12
        assert len(np.unique(np.packbits(d.configs, axis=1), axis=0)) == len(d)
        back = PercolationDistribution.from_list(json.loads(json.dumps(d.to_list())), g)
        assert np.array_equal(back.configs, d.configs)
        assert np.allclose(back.probs, d.probs, rtol=0, atol=1e-15)


def test_distribution_from_list_errors():
    with pytest.raises(InputError):
        PercolationDistribution.from_list([{"edges": [0], "p": 0.5}], EDGE)
    with pytest.raises(InputError):
        PercolationDistribution.from_list([{"edges": [3], "p": 1.0}], EDGE)
    with pytest.raises(InputError):
        PercolationDistribution.from_list([{"p": 1.0}], EDGE)
    merged = PercolationDistribution.from_list([{"edges": [0], "p": 0.25}, {"edges": [0], "p": 0.75}], EDGE)
    assert len(merged) == 1


def test_bernoulli_matches_walls_on_trees():
    # on a tree, unit walls on every edge are independent edge closures
    g = gen_graph("tree", 2, 2)
    w = CutFamily.from_sets(g.n, [(tuple(np.flatnonzero(cluster_labels(g, np.arange(g.m) != e)
                                                        == cluster_labels(g, np.arange(g.m) != e)[g.edges[e][1]])), 1.0)
                                  for e in range(g.m)])
    t = 0.4
    a = two_point_exact(distribution_from_walls(w, g, t))
    b = two_point_exact(exhaustive_bernoulli(g, math.exp(-t)))
    assert np.allclose(a, b, atol=1e-13)


def test_marginal_law_on_corpus():
    for g, w, t in wall_corpus(seed=11, count=20):
        d = distribution_from_walls(w, g, t)
        expected = np.array([math.exp(-t * wall_crossing(w, g, e)[0]) for e in range(g.m)])
        assert np.max(np.abs(d.edge_marginals() - expected)) <= 1e-12
        assert marginal_report(d, w, t)["passed"]


# ------------------------------------------------------------ clusters and two-point functions


def test_union_find():
    uf = UnionFind(6)
    assert uf.union(0, 1) and uf.union(2, 3) and uf.union(1, 3)
    assert not uf.union(0, 2)
    labels = uf.labels()
    assert len({labels[i] for i in range(4)}) == 1 and labels[4] != labels[5]
    assert uf.size[uf.find(0)] == 4


def test_two_point_matches_brute_force():
    for g, w, t in wall_corpus(seed=13, count=20):
        d = distribution_from_walls(w, g, t)
        assert np.allclose(two_point_exact(d), brute_two_point(g, d), atol=1e-13)
    g = gen_graph("cycle", 5)
    d = exhaustive_bernoulli(g, 0.4)
    assert np.allclose(two_point_exact(d), brute_two_point(g, d), atol=1e-13)


def test_two_point_is_positive_definite():
    for g, w, t in wall_corpus(seed=17, count=20):
        tau = two_point_exact(distribution_from_walls(w, g, t))
        assert np.allclose(np.diag(tau), 1) and np.allclose(tau, tau.T)
        assert is_positive_definite(tau).ok


def test_cycle_closed_form():
    # bond percolation on a cycle of length n: tau(0, k) = p^k + p^(n-k) - p^n
    n, p = 6, 0.6
    tau = two_point_exact(exhaustive_bernoulli(gen_graph("cycle", n), p))
    for k in range(1, n):
        assert tau[0, k] == pytest.approx(p**k + p**(n - k) - p**n, abs=1e-13)


# ------------------------------------------------------------ Monte Carlo


def test_mc_examples():
    g, w = gen_graph("path", 3), unit_walls(3)
    est = two_point_mc(w, g, 0.5, 100_000, seed=1)
    assert abs(est.tau[0, 2] - math.exp(-1)) <= 3 * est.sigma[0, 2]
    one = two_point_mc(w, g, 0.5, 1, seed=1)
    assert set(np.unique(one.hits)) <= {0, 1}
    again = two_point_mc(w, g, 0.5, 100_000, seed=1)
    assert np.array_equal(est.hits, again.hits)
    assert np.all(np.diag(est.tau) == 1) and np.all(est.hits <= est.trials)
    with pytest.raises(ZeroSamples):
        two_point_mc(w, g, 0.5, 0, seed=1)


def test_mc_json():
    est = two_point_mc(unit_walls(3), gen_graph("path", 3), 1.0, 500, seed=4)
    data = json.loads(json.dumps(est.to_dict()))
    assert set(data) == {"t", "n", "hits", "trials", "tau", "ci", "seed"}
    assert data["n"] == 3 and data["trials"] == 500 and data["seed"] == 4


def test_mc_sweep_matches_single_runs_and_threads(monkeypatch):
    g = gen_graph("cycle", 5)
    w = radial_walls(g, 0)
    monkeypatch.setenv("WALLPERC_THREADS", "1")
    sweep = two_point_mc_sweep(w, g, [0.3, 1.0], 10_000, seed=8)
    monkeypatch.setenv("WALLPERC_THREADS", "3")
    sweep3 = two_point_mc_sweep(w, g, [0.3, 1.0], 10_000, seed=8)
    single = two_point_mc(w, g, 1.0, 10_000, seed=8)
    assert np.array_equal(sweep[1].hits, single.hits)
    assert all(np.array_equal(a.hits, b.hits) for a, b in zip(sweep, sweep3))
    # coupled replicas: connection at the later time implies connection earlier
    assert np.all(sweep[1].hits <= sweep[0].hits)


def test_mc_agrees_with_exact_on_corpus():
    inside = total = 0
    for i, (g, w, t) in enumerate(wall_corpus(seed=19, count=8)):
        exact = two_point_exact(distribution_from_walls(w, g, t))
        est = two_point_mc(w, g, t, 20_000, seed=i)
        off = ~np.eye(g.n, dtype=bool)
        inside += int(np.sum((np.abs(est.tau - exact) <= 3 * est.sigma)[off]))
        total += int(off.sum())
    assert inside >= 0.99 * total


# ------------------------------------------------------------ sandwich


def test_sandwich_examples():
    g = gen_graph("path", 3)
    dist = distance_matrix(g)
    tau = two_point_exact(distribution_from_walls(unit_walls(3), g, 0.8))
    rep = verify_sandwich(tau, dist, dist, 0.8)
    assert rep.passed and rep.delta == 1.0
    assert abs(rep.lower_slack) <= 1e-15 and abs(rep.upper_slack) <= 1e-15

    ones = np.ones((3, 3))
    rep0 = verify_sandwich(ones, dist, dist, 0.0)
    assert rep0.passed and rep0.lower_slack == 0 and rep0.upper_slack == 0

    g4 = gen_graph("path", 4)
    w = radial_walls(g4, 0)
    tau4 = two_point_exact(distribution_from_walls(w, g4, 1.0))
    rep4 = verify_sandwich(tau4, wall_kernel(w), distance_matrix(g4), 1.0)
    assert rep4.passed and rep4.upper_slack >= -1e-12

    with pytest.raises(SizeMismatch):
        verify_sandwich(tau, dist, distance_matrix(g4), 1.0)


def test_sandwich_detects_violations():
    g = gen_graph("path", 3)
    dist = distance_matrix(g)
    tau = np.exp(-0.5 * dist) + 0.01
    np.fill_diagonal(tau, 1)
    rep = verify_sandwich(tau, dist, dist, 0.5)
    assert not rep.passed and not rep.upper_passed and rep.lower_passed


def test_sandwich_on_corpus():
    for g, w, t in wall_corpus(seed=23, count=20):
        tau = two_point_exact(distribution_from_walls(w, g, t))
        rep = verify_sandwich(tau, wall_kernel(w), distance_matrix(g), t)
        assert rep.passed, (rep.lower_slack, rep.upper_slack)


# ------------------------------------------------------------ FKG


def test_fkg_examples():
    g = gen_graph("path", 3)
    d = exhaustive_bernoulli(g, 0.3)
    cov = event_covariances(d)
    assert cov[0, 1] == pytest.approx(0.0, abs=1e-15)
    assert cov[0, 0] == pytest.approx(0.3 * 0.7, abs=1e-15)
    assert fkg_check_exact(d, [[(0, 1)], [(1, 2)], [0, 1]]) >= -1e-15
    with pytest.raises(NonIncreasingEvent):
        fkg_check_exact(d, [[(0, 2)]])
    with pytest.raises(NonIncreasingEvent):
        fkg_check_exact(d, [[7]])
    with pytest.raises(NonIncreasingEvent):
        fkg_check_exact(d, [3])


def test_fkg_on_wall_models():
    for g, w, t in wall_corpus(seed=29, count=20):
        d = distribution_from_walls(w, g, t)
        assert fkg_check_exact(d) >= -1e-12
        events = [list(s) for s in itertools.combinations(range(g.m), min(2, g.m))][:10]
        assert fkg_check_exact(d, events) >= -1e-12


def test_fkg_detects_negative_correlation():
    # exactly one of the two edges open: a non-FKG measure
    g = gen_graph("path", 3)
    d = PercolationDistribution.from_list([{"edges": [0], "p": 0.5}, {"edges": [1], "p": 0.5}], g)
    assert fkg_check_exact(d) == pytest.approx(-0.25)


# ------------------------------------------------------------ decomposition


def test_decomposition_examples():
    fam = cut_decomposition(exhaustive_bernoulli(EDGE, 0.3), [0, 1])
    assert wall_kernel(fam)[0, 1] == pytest.approx(0.7, abs=1e-15)
    full = exhaustive_bernoulli(gen_graph("cycle", 4), 1.0)
    assert len(cut_decomposition(full)) == 0

    g = gen_graph("path", 3)
    d = distribution_from_walls(unit_walls(3), g, 0.5)
    k = wall_kernel(cut_decomposition(d))
    assert np.allclose(k, 1 - np.exp(-0.5 * distance_matrix(g)), atol=1e-12)
    with pytest.raises(BadPermutation):
        cut_decomposition(d, [0, 0, 1])
    with pytest.raises(BadPermutation):
        cut_decomposition(d, [0, 1])


def test_decomposition_order_changes_layers_not_kernel():
    g = gen_graph("path", 3)
    d = distribution_from_walls(unit_walls(3), g, 0.5)
    a = cut_decomposition_layers(d, [0, 1, 2])
    b = cut_decomposition_layers(d, [2, 0, 1])
    assert any(not np.array_equal(x.members, y.members) or not np.allclose(x.weights, y.weights)
               for x, y in zip(a, b))
    ka = sum(wall_kernel(l) for l in a)
    kb = sum(wall_kernel(l) for l in b)
    assert np.allclose(ka, kb, atol=1e-12)
    assert np.allclose(ka, 1 - two_point_exact(d), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_decomposition_identity(seed):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, 1, 6)
    if rng.random() < 0.5 and g.m <= 12:
        d = exhaustive_bernoulli(g, float(rng.uniform()))
    else:
        d = distribution_from_walls(random_cut_family(rng, g.n, 8) if g.n > 1 else CutFamily.empty(1),
                                    g, float(rng.uniform(0, 2)))
    tau = two_point_exact(d)
    order = rng.permutation(g.n)
    assert np.max(np.abs(wall_kernel(cut_decomposition(d, order)) - (1 - tau))) <= 1e-12


# ------------------------------------------------------------ connectivity decay


@pytest.mark.parametrize("n", [4, 8, 12])
def test_radial_decay(n):
    g = gen_graph("path", n)
    tau = two_point_exact(distribution_from_walls(radial_walls(g, 0), g, 1.0))
    assert tau[0, n - 1] <= math.exp(-(n - 1)) + 1e-15
