"""Nondeterministic linear-optics gates: NS, C-SIGN and its teleportation-boosted form."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np

from qudit_bell.branching import Branch, ConditionalResult
from qudit_bell.fock import (
    ModeUnitary,
    SparseState,
    apply_interferometer,
    apply_phase,
    apply_two_mode,
    measure_modes,
    permute_modes,
    tensor,
    transition_amplitude,
)
from qudit_bell.interferometer import beam_splitter, dft_matrix

NS_HERALD = (1, 0)
NS_SUCCESS = 0.25
CSIGN_BASIC_SUCCESS = NS_SUCCESS**2

# Angles of the two splitters around the NS pair in the basic C-SIGN.
CSIGN_ANGLES = (math.pi / 4, -math.pi / 4)

_R2 = math.sqrt(2.0)
_NS_MATRIX = np.array(
    [
        [1 - _R2, 2**-0.25, math.sqrt(3 / _R2 - 2)],
        [2**-0.25, 0.5, 0.5 - 1 / _R2],
        [math.sqrt(3 / _R2 - 2), 0.5 - 1 / _R2, _R2 - 0.5],
    ]
)


def ns_unitary() -> ModeUnitary:
    """3x3 NS device: mode 0 is the signal, modes 1, 2 the ancillas prepared in |1, 0>."""
    return ModeUnitary(_NS_MATRIX)


def ns_conditional_amplitudes(matrix: np.ndarray) -> np.ndarray:
    """Heralded amplitudes <n; 1, 0| U |n; 1, 0> for signal photon numbers n = 0, 1, 2."""
    return np.array([transition_amplitude(matrix, (n, 1, 0), (n, 1, 0)) for n in range(3)])


def solve_ns_unitary(seed: int = 0, attempts: int = 20) -> np.ndarray:
    """Find a 3x3 unitary with heralded amplitudes (1/2, 1/2, -1/2) by least squares.

    The unitary is parameterized as ``expm(iH)`` with Hermitian ``H``;
    residuals are evaluated with the permanent formula.
    """
    from scipy.linalg import expm
    from scipy.optimize import least_squares

    target = np.array([0.5, 0.5, -0.5])

    def unitary(x):
        h = np.zeros((3, 3), dtype=complex)
        h[np.triu_indices(3)] = x[:6] + 1j * np.r_[0, x[6:8], 0, x[8], 0]
        h = h + h.conj().T - np.diag(h.diagonal().real)
        return expm(1j * h)

    def residual(x):
        diff = ns_conditional_amplitudes(unitary(x)) - target
        return np.r_[diff.real, diff.imag]

    rng = np.random.default_rng(seed)
    for _ in range(attempts):
        fit = least_squares(residual, rng.normal(size=9), xtol=1e-15, ftol=1e-15, gtol=1e-15)
        if np.max(np.abs(fit.fun)) < 1e-12:
            return unitary(fit.x)
    raise RuntimeError("NS constraint solve did not converge")


def ideal_ns(state: SparseState, mode: int) -> SparseState:
    return SparseState(state.mode_count, {k: (-v if k[mode] == 2 else v) for k, v in state.terms.items()})


def ideal_csign(state: SparseState, mode_a: int, mode_b: int) -> SparseState:
    return SparseState(
        state.mode_count,
        {k: (-v if k[mode_a] == 1 and k[mode_b] == 1 else v) for k, v in state.terms.items()},
    )


def _check_pair(state: SparseState, a: int, b: int) -> None:
    if a == b:
        raise ValueError(f"gate modes collide: {a}")
    for m in (a, b):
        if not 0 <= m < state.mode_count:
            raise IndexError(f"mode {m} out of range for {state.mode_count} modes")


def _herald(psi: SparseState, measured: list[int], herald: tuple[int, ...], correction: str) -> ConditionalResult:
    branches = []
    for mb in measure_modes(psi, measured):
        ok = mb.outcome == herald
        branches.append(Branch(mb.outcome, mb.probability, mb.state, ok, correction if ok else ""))
    return ConditionalResult(tuple(branches))


def apply_ns(state: SparseState, signal_mode: int, unitary: ModeUnitary | None = None) -> ConditionalResult:
    """Heralded NS on one mode; success when the ancilla detectors read (1, 0)."""
    if not 0 <= signal_mode < state.mode_count:
        raise IndexError(f"signal mode {signal_mode} out of range")
    u = unitary or ns_unitary()
    m = state.mode_count
    psi = tensor(state, SparseState.basis((1, 0)))
    psi = apply_interferometer(psi, u.on(signal_mode, m, m + 1))
    return _herald(psi, [m, m + 1], NS_HERALD, "")


def csign_basic(
    state: SparseState, mode_a: int, mode_b: int, angles: tuple[float, float] = CSIGN_ANGLES
) -> ConditionalResult:
    """C-SIGN from two splitters around a pair of NS devices; success 1/16."""
    _check_pair(state, mode_a, mode_b)
    m = state.mode_count
    u = ns_unitary()
    psi = apply_two_mode(state, beam_splitter(angles[0]), mode_a, mode_b)
    psi = tensor(psi, SparseState.basis((1, 0, 1, 0)))
    psi = apply_interferometer(psi, u.on(mode_a, m, m + 1))
    psi = apply_interferometer(psi, u.on(mode_b, m + 2, m + 3))
    psi = apply_two_mode(psi, beam_splitter(angles[1]), mode_a, mode_b)
    return _herald(psi, [m, m + 1, m + 2, m + 3], NS_HERALD * 2, "")


@dataclass(frozen=True)
class AncillaSpec:
    n: int
    state: SparseState


def _rail_block(n: int, j: int) -> tuple[int, ...]:
    return (1,) * j + (0,) * (n - j) + (0,) * j + (1,) * (n - j)


def ancilla_phi(n: int) -> AncillaSpec:
    """Entangled 2n-photon resource over 4n modes for the boosted C-SIGN."""
    if n < 1:
        raise ValueError(f"boost order must be >= 1, got {n}")
    terms = {
        _rail_block(n, j) + _rail_block(n, k): (-1) ** ((n - j) * (n - k)) / (n + 1)
        for j in range(n + 1)
        for k in range(n + 1)
    }
    return AncillaSpec(n, SparseState(4 * n, terms))


def teleported_success(n: int) -> float:
    return (n / (n + 1)) ** 2


def _teleport_raw(state: SparseState, a: int, b: int, n: int) -> list[Branch]:
    """Boosted C-SIGN without outcome-dependent phase corrections.

    Each input mode joins the first half of its ancilla block under an
    (n+1)-point Fourier transform and the n+1 modes are counted. With k
    photons counted (0 < k < n+1) the input now lives in second-half mode
    k-1 of that block; that mode is routed back to the input position and the
    other second-half modes are counted as well.
    """
    _check_pair(state, a, b)
    if n < 1:
        raise ValueError(f"boost order must be >= 1, got {n}")
    m = state.mode_count
    psi = tensor(state, ancilla_phi(n).state)
    first1 = [m + i for i in range(n)]
    first2 = [m + 2 * n + i for i in range(n)]
    f = dft_matrix(n + 1)
    psi = apply_interferometer(psi, f.on(a, *first1))
    psi = apply_interferometer(psi, f.on(b, *first2))
    fourier = [a, *first1, b, *first2]

    branches = []
    for mb in measure_modes(psi, fourier):
        k1, k2 = sum(mb.outcome[: n + 1]), sum(mb.outcome[n + 1 :])
        # remaining modes: originals without a, b, then 2n second-half ancilla modes
        rest = m - 2
        if not (0 < k1 < n + 1 and 0 < k2 < n + 1):
            branches.append(Branch(mb.outcome, mb.probability, mb.state, False))
            continue
        out1, out2 = rest + k1 - 1, rest + n + k2 - 1
        spare = [rest + i for i in range(2 * n) if rest + i not in (out1, out2)]
        for sub in measure_modes(mb.state, spare):
            # sub.state: originals without a, b, then out1, out2
            order = list(range(m - 2))
            lo, hi = sorted((a, b))
            order.insert(lo, m - 2 if lo == a else m - 1)
            order.insert(hi, m - 1 if hi == b else m - 2)
            routed = permute_modes(sub.state, order)
            branches.append(Branch(mb.outcome + sub.outcome, mb.probability * sub.probability, routed, True))
    return branches


@lru_cache(maxsize=None)
def teleport_corrections(n: int) -> dict[tuple[int, ...], tuple[float, float, float]]:
    """Per-outcome phases ``(global, mode_a, mode_b)`` for the boosted C-SIGN.

    Calibrated once per ``n`` from the four rail basis inputs: the |0,0>
    branch fixes the global phase and the |1,0>, |0,1> branches fix the
    single-mode phases. The |1,1> branch is left as the check.
    """
    arg: dict[tuple[int, ...], dict[tuple[int, int], float]] = {}
    for x, y in product((0, 1), repeat=2):
        for br in _teleport_raw(SparseState.basis((x, y)), 0, 1, n):
            if br.success:
                arg.setdefault(br.outcome, {})[(x, y)] = float(np.angle(br.state.amplitude((x, y))))
    table = {}
    for outcome, phases in arg.items():
        if len(phases) != 4:
            raise RuntimeError(f"outcome {outcome} is not heralded for every rail input")
        g = -phases[(0, 0)]
        table[outcome] = (g, phases[(0, 0)] - phases[(1, 0)], phases[(0, 0)] - phases[(0, 1)])
    return table


def csign_teleported(state: SparseState, mode_a: int, mode_b: int, n: int) -> ConditionalResult:
    """Teleportation-boosted C-SIGN with success probability (n/(n+1))^2."""
    table = teleport_corrections(n)
    branches = []
    for br in _teleport_raw(state, mode_a, mode_b, n):
        if not br.success:
            branches.append(br)
            continue
        g, pa, pb = table[br.outcome]
        fixed = apply_phase(apply_phase(br.state, mode_a, pa), mode_b, pb).scaled(np.exp(1j * g))
        note = f"phase a={pa:.6g} b={pb:.6g} global={g:.6g}"
        branches.append(Branch(br.outcome, br.probability, fixed, True, note))
    return ConditionalResult(tuple(branches))


def ideal_csign_result(state: SparseState, mode_a: int, mode_b: int) -> ConditionalResult:
    _check_pair(state, mode_a, mode_b)
    return ConditionalResult.deterministic(ideal_csign(state, mode_a, mode_b))
