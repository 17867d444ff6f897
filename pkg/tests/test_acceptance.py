"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``[PASS]``/``[FAIL]`` line with its runtime, visible
even under captured output.
"""

import math
import time
from contextlib import contextmanager
from itertools import product

import numpy as np
import pytest

from conftest import random_state, random_unitary
from qudit_bell.analyzer import AnalyzerConfig, analyze_all
from qudit_bell.fock import (
    ModeUnitary,
    SparseState,
    apply_interferometer,
    enumerate_sector,
    fidelity,
    transition_amplitude,
)
from qudit_bell.interferometer import recompose, reck_decompose
from qudit_bell.klm import (
    ancilla_phi,
    apply_ns,
    csign_basic,
    csign_teleported,
    ideal_csign,
    ideal_ns,
)
from qudit_bell.qudit import Backend


@pytest.fixture
def criterion(capsys):
    @contextmanager
    def run(number, title, limit=None):
        start = time.perf_counter()
        ok = False
        try:
            yield
            elapsed = time.perf_counter() - start
            ok = limit is None or elapsed < limit
            if not ok:
                raise AssertionError(f"runtime {elapsed:.2f}s exceeds {limit}s")
        finally:
            elapsed = time.perf_counter() - start
            with capsys.disabled():
                budget = f" (limit {limit}s)" if limit else ""
                print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title} [{elapsed:.2f}s{budget}]")

    return run


def test_c01_ns_gate(criterion):
    rng = np.random.default_rng(101)
    with criterion(1, "NS gate success 1/4 and sign flip on 20 random inputs", limit=1.0):
        for _ in range(20):
            amps = rng.normal(size=3) + 1j * rng.normal(size=3)
            psi = SparseState(1, {(0,): amps[0], (1,): amps[1], (2,): amps[2]}).normalized()
            res = apply_ns(psi, 0)
            assert abs(res.success_probability - 0.25) < 1e-9
            for br in res.successes():
                assert fidelity(br.state, ideal_ns(psi, 0)) >= 1 - 1e-9


def test_c02_basic_csign(criterion):
    with criterion(2, "basic C-SIGN truth table exact, success 1/16", limit=5.0):
        for x, y in product((0, 1), repeat=2):
            psi = SparseState.basis((x, y))
            res = csign_basic(psi, 0, 1)
            assert abs(res.success_probability - 1 / 16) < 1e-9
            for br in res.successes():
                # exact table: amplitude comparison, including the sign
                assert br.state.allclose(ideal_csign(psi, 0, 1), 1e-9)
                assert br.state.amplitude((x, y)) == pytest.approx(-1 if x == y == 1 else 1, abs=1e-9)


def test_c03_teleported_csign(criterion):
    with criterion(3, "teleported C-SIGN success 1/4, 4/9, 9/16 for n=1,2,3", limit=120.0):
        for n, expected in [(1, 1 / 4), (2, 4 / 9), (3, 9 / 16)]:
            for x, y in product((0, 1), repeat=2):
                psi = SparseState.basis((x, y))
                res = csign_teleported(psi, 0, 1, n)
                assert abs(res.success_probability - expected) < 1e-9
                assert abs(res.total_probability - 1) < 1e-9
                target = ideal_csign(psi, 0, 1)
                for br in res.successes():
                    assert fidelity(br.state, target) >= 1 - 1e-9


def test_c04_ancilla(criterion):
    with criterion(4, "ancilla has (n+1)^2 terms of weight 1/(n+1), 2n photons in 4n modes"):
        for n in (1, 2, 3):
            phi = ancilla_phi(n).state
            assert len(phi.terms) == (n + 1) ** 2
            assert phi.mode_count == 4 * n
            assert phi.photon_numbers == (2 * n,)
            assert all(abs(abs(a) - 1 / (n + 1)) < 1e-15 and abs(a.imag) == 0 for a in phi.terms.values())


def test_c05_analyzer_d2(criterion):
    with criterion(5, "d=2 analyzer: 4 Bell states, zero confusion, success 1/16"):
        report = analyze_all(AnalyzerConfig(2, backend=Backend("basic")))
        assert report.swaps == 1
        assert len(report.rows) == 4
        assert report.zero_confusion
        for row in report.rows:
            assert abs(row.success_probability - 1 / 16) < 1e-9
            assert row.correct_probability == pytest.approx(1, abs=1e-9)


def test_c06_analyzer_d3(criterion):
    with criterion(6, "d=3 analyzer: 9 Bell states, zero confusion, success (1/16)^s, s recorded"):
        for kind in ("generic", "searched"):
            report = analyze_all(AnalyzerConfig(3, backend=Backend("basic"), network=kind))
            s = report.swaps
            assert s in (3, 4)
            assert len(report.rows) == 9
            assert report.zero_confusion
            for row in report.rows:
                assert abs(row.success_probability - (1 / 16) ** s) < 1e-9
                assert row.correct_probability == pytest.approx(1, abs=1e-9)
            # whether a 3-swap network exists was decided by exhaustive search
            text = report.to_text()
            assert f"swaps={s}" in text
            assert report.shorter_search_max == s - 1
            assert report.shorter_found is not None
            assert ("shorter_found=" + str(report.shorter_found).lower()) in text


def test_c07_three_party_analyzer(criterion):
    with criterion(7, "N=3, d=2 analyzer: 8 states correct (ideal); success (1/16)^2 (basic)"):
        ideal = analyze_all(AnalyzerConfig(2, parties=3, backend=Backend("ideal")))
        assert len(ideal.rows) == 8
        assert ideal.zero_confusion
        assert all(r.correct_probability == pytest.approx(1, abs=1e-9) for r in ideal.rows)
        assert all(abs(r.success_probability - 1) < 1e-9 for r in ideal.rows)
        basic = analyze_all(AnalyzerConfig(2, parties=3, backend=Backend("basic")))
        assert basic.swaps == 1
        assert basic.zero_confusion
        assert all(abs(r.success_probability - (1 / 16) ** 2) < 1e-9 for r in basic.rows)


def test_c08_boosted_bound_audit(criterion):
    with criterion(8, "boosted analyzer success (n/(n+1))^(2s); n/(n-1) base flagged"):
        for d, n in [(2, 1), (2, 2), (3, 1), (3, 2)]:
            report = analyze_all(AnalyzerConfig(d, backend=Backend("teleported", n)))
            s = report.swaps
            expected = (n / (n + 1)) ** (2 * s)
            assert report.zero_confusion
            for row in report.rows:
                assert abs(row.success_probability - expected) < 1e-9
            audit = report.audit
            assert audit["boosted_matches"] == "true"
            assert float(audit["boosted_expected"]) == pytest.approx(expected, rel=1e-12)
            assert audit["alternate_base"] == f"{n}/{n - 1}"
            assert audit["alternate_base_consistent"] == "false"
            if n == 1:
                assert audit["alternate_bound"] == "inf"
            else:
                assert float(audit["alternate_bound"]) > 1
            assert "record=audit" in report.to_text()


def test_c09_oracle_equivalence(criterion):
    rng = np.random.default_rng(909)
    with criterion(9, "splitter-by-splitter amplitudes match permanents on 100 random cases"):
        worst = 0.0
        for _ in range(100):
            m = int(rng.integers(1, 5))
            n = int(rng.integers(1, 4))
            u = random_unitary(rng, m)
            psi = random_state(rng, m, n)
            out = apply_interferometer(psi, ModeUnitary(u))
            for key in enumerate_sector(m, n):
                oracle = sum(a * transition_amplitude(u, occ, key) for occ, a in psi.terms.items())
                worst = max(worst, abs(out.amplitude(key) - oracle))
        assert worst < 1e-9


def test_c10_reck(criterion):
    rng = np.random.default_rng(1010)
    with criterion(10, "Reck recomposition error < 1e-10 on 50 random unitaries, d <= 8"):
        for i in range(50):
            d = 1 + i % 8
            u = random_unitary(rng, d)
            elements = reck_decompose(u)
            assert np.max(np.abs(recompose(elements, d) - u)) < 1e-10
            assert sum(e.kind == "BS" for e in elements) <= d * (d - 1) // 2


def test_c11_sampling(criterion):
    trials = 10**5
    with criterion(11, "10^5-trial sampling within 3 sigma (d=2, basic), bit-identical reruns"):
        config = AnalyzerConfig(2, backend=Backend("basic"), trials=trials, seed=2024)
        first = analyze_all(config)
        p = 1 / 16
        sigma = math.sqrt(p * (1 - p) / trials)
        for row in first.rows:
            assert row.trials == trials
            assert abs(row.success_probability - p) <= 3 * sigma
        assert first.zero_confusion
        second = analyze_all(config)
        assert [r.successes for r in second.rows] == [r.successes for r in first.rows]
        assert second.to_text() == first.to_text()

