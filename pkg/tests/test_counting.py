import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import (END, PHI, brute_counts, complete_dfa, enumerate_strings, forward_counts,
                     random_acyclic_phi_wfa, random_phi_wfa, random_wfa, root_topology, table)
from sfst.automaton import Automaton
from sfst.counting import (automaton_to_counts, count, count_phi, count_sampled, count_wfa,
                           counts_to_automaton, phi_count_from_flow)
from sfst.errors import CountError, CoverageError, CyclicError, EmptyLanguageError
from sfst.klmin import normalize_closed_form
from sfst.models import ToyCharModel

A, B = 2, 3
seeds = st.integers(0, 2**32 - 1)


def geometric():
    return Automaton([[(A, 0.5, 0), (END, 0.5, 1)], []], 0, 1, table(1))


def only_end():
    return Automaton([[(END, 1.0, 1)], []], 0, 1, table(1))


def chain_topology():
    # 0 reads a, backs off to 1; 1 reads a and b, backs off to 2; 2 reads a, b and $
    t = table(2)
    return Automaton([[(A, 1.0, 1), (PHI, 1.0, 1)],
                      [(A, 1.0, 2), (B, 1.0, 0), (PHI, 1.0, 2)],
                      [(A, 1.0, 0), (B, 1.0, 1), (END, 1.0, 3)], []], 0, 3, t)


def three_state_source():
    t = table(2)
    return Automaton([[(A, 0.5, 1), (B, 0.3, 2), (END, 0.2, 3)],
                      [(A, 0.2, 2), (B, 0.4, 0), (END, 0.4, 3)],
                      [(A, 0.3, 0), (B, 0.3, 1), (END, 0.4, 3)], []], 0, 3, t)


def assert_counts_close(got, want, tol):
    keys = set(got) | set(want)
    for k in keys:
        assert got.get(k, 0.0) == pytest.approx(want.get(k, 0.0), abs=tol), k


class TestCountWfa:
    def test_geometric(self):
        c = count_wfa(geometric(), geometric())
        assert c.get(0, A) == pytest.approx(1.0, abs=1e-12)
        assert c.get(0, END) == pytest.approx(1.0, abs=1e-12)
        # brute force over a^n$
        brute = sum(n * 0.5 ** (n + 1) for n in range(61))
        assert c.get(0, A) == pytest.approx(brute, abs=1e-8)

    def test_only_terminator(self):
        c = count_wfa(only_end(), geometric())
        assert c.counts == {(0, A): 0.0, (0, END): 1.0}

    @given(seeds)
    @settings(max_examples=30, deadline=None)
    def test_normalized_counts_reproduce_source(self, seed):
        rng = np.random.default_rng(seed)
        s = random_wfa(rng, n_states=int(rng.integers(2, 7)), acyclic=True)
        c = count_wfa(s, s.topology())
        assert c.state_total(s.initial) >= 1.0 - 1e-12
        back = normalize_closed_form(c, s.topology())
        for q in s.states():
            for arc in s.arcs(q):
                if c.state_total(q) > 0:
                    assert back.arc(q, arc.label).weight == pytest.approx(arc.weight, abs=1e-12)

    @given(seeds)
    @settings(max_examples=30, deadline=None)
    def test_matches_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        s = random_wfa(rng, n_states=5, acyclic=True)
        a = complete_dfa(rng, 4, 2)
        c = count_wfa(s, a)
        want, _ = brute_counts(enumerate_strings(s, s.num_states), a)
        assert_counts_close(c.counts, want, 1e-12)

    def test_coverage_violation(self):
        a = Automaton([[(A, 1.0, 0)], []], 0, 1, table(1))
        with pytest.raises(EmptyLanguageError):
            count_wfa(geometric(), a)
        b = Automaton([[(A, 1.0, 1), (END, 1.0, 2)], [(A, 1.0, 1)], []], 0, 2, table(1))
        with pytest.raises(CoverageError) as info:
            count_wfa(geometric(), b)
        assert info.value.witness == (A, END)


class TestCountPhi:
    def test_phi_free_equals_plain(self):
        s = random_wfa(np.random.default_rng(1), n_states=5)
        a = complete_dfa(np.random.default_rng(2))
        plain = count_wfa(s, a)
        agg = count_phi(s, a)
        assert_counts_close(agg.counts, plain.counts, 1e-12)
        assert agg.phi_counts == {}

    def test_chain_matches_enumeration(self):
        s = three_state_source()
        a = chain_topology()
        got = count_phi(s, a)
        # the source is cyclic; strings longer than 400 carry negligible mass
        want, want_phi = forward_counts(s, a)
        assert_counts_close(got.counts, want, 1e-9)
        assert_counts_close(got.phi_counts, want_phi, 1e-9)

    def test_acyclic_chain_exact(self):
        s = Automaton([[(A, 0.5, 1), (B, 0.3, 2), (END, 0.2, 3)],
                       [(A, 0.2, 2), (B, 0.4, 2), (END, 0.4, 3)],
                       [(A, 0.3, 4), (B, 0.3, 4), (END, 0.4, 3)], [],
                       [(END, 1.0, 3)]], 0, 3, table(2))
        a = chain_topology()
        want, want_phi = brute_counts(enumerate_strings(s, 10), a)
        for method in ("compensated", "expanded"):
            got = count_phi(s, a, method=method)
            assert_counts_close(got.counts, want, 1e-14)
            assert_counts_close(got.phi_counts, want_phi, 1e-14)

    @given(seeds)
    @settings(max_examples=30, deadline=None)
    def test_methods_agree(self, seed):
        rng = np.random.default_rng(seed)
        s = random_acyclic_phi_wfa(rng)
        a = root_topology(rng, 4, 2)
        comp = count_phi(s, a, method="compensated")
        exp = count_phi(s, a, method="expanded")
        assert_counts_close(comp.counts, exp.counts, 1e-12)
        assert_counts_close(comp.phi_counts, exp.phi_counts, 1e-12)
        assert all(v >= 0 for v in comp.counts.values())
        assert all(v >= 0 for v in comp.phi_counts.values())

    @given(seeds)
    @settings(max_examples=20, deadline=None)
    def test_cyclic_source_against_forward_oracle(self, seed):
        rng = np.random.default_rng(seed)
        s = random_phi_wfa(rng, n_states=5, n_letters=2, min_weight=0.05)
        a = root_topology(rng, 4, 2)
        got = count_phi(s, a)
        want, want_phi = forward_counts(s, a, 2000)
        assert_counts_close(got.counts, want, 1e-9)
        assert_counts_close(got.phi_counts, want_phi, 1e-9)

    def test_compensated_rejects_cyclic_product(self):
        with pytest.raises(CyclicError):
            count_phi(three_state_source(), chain_topology(), method="compensated")

    def test_flow_is_conserved(self):
        s = three_state_source()
        a = chain_topology()
        c = count_phi(s, a)
        inflow = [0.0] * a.num_states
        inflow[a.initial] = 1.0
        for (q, x), v in c.counts.items():
            inflow[a.arc(q, x).nextstate] += v
        for q, v in c.phi_counts.items():
            inflow[a.phi_arc(q).nextstate] += v
        for q in a.states():
            if q != a.final:
                assert inflow[q] == pytest.approx(c.total(q), abs=1e-9)
        # all mass leaves through the terminator exactly once
        assert inflow[a.final] == pytest.approx(1.0, abs=1e-9)


class TestFlow:
    def test_no_phi_arcs(self):
        assert phi_count_from_flow({(0, A): 1.0, (0, END): 1.0}, geometric()) == {}

    def test_inconsistent_counts(self):
        with pytest.raises(CountError, match="negative backoff"):
            phi_count_from_flow({(0, A): 5.0, (1, B): 0.1, (2, END): 1.0}, chain_topology())


class TestSampled:
    def test_single_sample(self):
        c = count_sampled(only_end(), geometric(), 1, seed=0)
        assert c.get(0, END) == 1.0 and c.get(0, A) == 0.0

    def test_large_sample_geometric(self):
        c = count_sampled(geometric(), geometric(), 1_000_000, seed=3)
        assert c.get(0, A) == pytest.approx(1.0, rel=0.02)
        assert c.get(0, END) == pytest.approx(1.0, rel=0.02)

    @pytest.mark.parametrize("seed", [11, 12])
    def test_two_seeds_within_five_percent(self, seed):
        s = three_state_source()
        a = chain_topology()
        exact = count_phi(s, a)
        got = count_sampled(s, a, 100_000, seed=seed)
        for k, v in exact.counts.items():
            assert got.get(*k) == pytest.approx(v, rel=0.05)
        for q, v in exact.phi_counts.items():
            assert got.phi(q) == pytest.approx(v, rel=0.05)

    def test_deterministic_and_independent_of_jobs(self):
        s = three_state_source()
        a = chain_topology()
        one = count_sampled(s, a, 40_000, seed=5, block_size=5000)
        again = count_sampled(s, a, 40_000, seed=5, block_size=5000)
        par = count_sampled(s, a, 40_000, seed=5, block_size=5000, jobs=3)
        assert one.counts == again.counts == par.counts
        assert one.phi_counts == par.phi_counts
        other = count_sampled(s, a, 40_000, seed=6, block_size=5000)
        assert other.counts != one.counts

    def test_generic_model(self):
        t = table(2)
        m = ToyCharModel.random(t, seed=1, terminator_bias=1.0)
        a = root_topology(np.random.default_rng(0), 4, 2)
        c = count_sampled(m, a, 2000, seed=1)
        inflow = [0.0] * a.num_states
        inflow[a.initial] = 1.0
        for (q, x), v in c.counts.items():
            inflow[a.arc(q, x).nextstate] += v
        for q, v in c.phi_counts.items():
            inflow[a.phi_arc(q).nextstate] += v
        # each sample credits its whole next-symbol distribution, so the
        # terminator total is an estimate of 1 rather than exactly 1
        assert inflow[a.final] == pytest.approx(1.0, abs=0.05)
        assert all(v >= 0 for v in c.counts.values())
        assert c.report["n_accepted"] == 2000
        assert count_sampled(m, a, 2000, seed=1).counts == c.counts

    def test_rejection_reported(self):
        a = Automaton([[(A, 1.0, 0), (END, 1.0, 1)], []], 0, 1, table(2))
        s = Automaton([[(B, 0.5, 0), (END, 0.5, 1)], []], 0, 1, table(2))
        with pytest.raises(CoverageError):
            count_sampled(s, a, 100, seed=0)

    def test_bad_n(self):
        with pytest.raises(ValueError):
            count_sampled(geometric(), geometric(), 0)

    def test_truncation_reported(self):
        s = Automaton([[(A, 0.99, 0), (END, 0.01, 1)], []], 0, 1, table(1))
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            c = count_sampled(s, geometric(), 200, seed=0, max_len=20)
        assert c.report["n_truncated"] > 0
        assert any("max_len" in str(w.message) for w in caught)


def test_counts_automaton_round_trip():
    c = count(three_state_source(), chain_topology())
    back = automaton_to_counts(counts_to_automaton(c, chain_topology()))
    assert back.counts == c.counts and back.phi_counts == c.phi_counts
