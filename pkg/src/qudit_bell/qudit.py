"""Qudits as one photon in d modes: Bell bases, Fourier transforms, C-SWAP and C-SHIFT."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Sequence

import numpy as np

from qudit_bell.branching import DEFAULT_BRANCH_CAP, ConditionalResult, chain
from qudit_bell.fock import ModeUnitary, SparseState, apply_interferometer, apply_two_mode, tensor
from qudit_bell.interferometer import beam_splitter
from qudit_bell.klm import (
    CSIGN_BASIC_SUCCESS,
    csign_basic,
    csign_teleported,
    ideal_csign_result,
    teleported_success,
)


@dataclass(frozen=True)
class Backend:
    """Which C-SIGN realization the controlled gates are built from.

    ``ideal`` is a unit-probability sign flip used to test encodings apart
    from heralding; ``basic`` is the two-NS gate; ``teleported`` uses the
    entangled ancilla with boost order ``n``.
    """

    kind: str = "basic"
    n: int = 0

    def __post_init__(self):
        if self.kind not in ("ideal", "basic", "teleported"):
            raise ValueError(f"unknown backend {self.kind!r}")
        if self.kind == "teleported" and self.n < 1:
            raise ValueError("teleported backend needs n >= 1")

    @classmethod
    def parse(cls, text: str) -> Backend:
        """``ideal``, ``basic``, ``teleported:N`` or ``teleported(N)``."""
        text = text.strip().lower()
        for sep in (":", "("):
            if sep in text:
                kind, arg = text.split(sep, 1)
                return cls(kind.strip(), int(arg.strip(" )")))
        return cls(text)

    def __str__(self) -> str:
        return f"teleported:{self.n}" if self.kind == "teleported" else self.kind

    @property
    def success_probability(self) -> float:
        if self.kind == "ideal":
            return 1.0
        if self.kind == "basic":
            return CSIGN_BASIC_SUCCESS
        return teleported_success(self.n)

    def csign(self, state: SparseState, mode_a: int, mode_b: int) -> ConditionalResult:
        if self.kind == "ideal":
            return ideal_csign_result(state, mode_a, mode_b)
        if self.kind == "basic":
            return csign_basic(state, mode_a, mode_b)
        return csign_teleported(state, mode_a, mode_b, self.n)


@dataclass(frozen=True)
class QuditRegister:
    d: int
    modes: tuple[int, ...]

    def __post_init__(self):
        if len(self.modes) != self.d or len(set(self.modes)) != self.d:
            raise ValueError(f"register needs {self.d} distinct modes, got {self.modes}")

    @classmethod
    def contiguous(cls, d: int, offset: int = 0) -> QuditRegister:
        return cls(d, tuple(range(offset, offset + d)))

    def decode(self, occupation: Sequence[int]) -> int | None:
        """Logical value held by ``occupation``, or None if not a valid codeword."""
        counts = [occupation[m] for m in self.modes]
        if sum(counts) != 1:
            return None
        return counts.index(1)


def _check_level(d: int, *values: int) -> None:
    if d < 2:
        raise ValueError(f"qudit dimension must be >= 2, got {d}")
    for v in values:
        if not 0 <= v < d:
            raise ValueError(f"level {v} out of range for d={d}")


def _onehot(d: int, j: int) -> tuple[int, ...]:
    return tuple(1 if i == j else 0 for i in range(d))


def logical_state(d: int, j: int) -> SparseState:
    _check_level(d, j)
    return SparseState.basis(_onehot(d, j))


def generalized_bell(d: int, parties: int, labels: Sequence[int]) -> SparseState:
    """``sum_j w^(j k1) |j> (x)_i |j + k_i>`` over ``parties`` qudits, normalized."""
    if parties < 2 or len(labels) != parties:
        raise ValueError(f"need {parties} >= 2 labels, got {tuple(labels)}")
    _check_level(d, *labels)
    terms = {}
    for j in range(d):
        key = _onehot(d, j)
        for k in labels[1:]:
            key += _onehot(d, (j + k) % d)
        terms[key] = cmath.exp(2j * math.pi * j * labels[0] / d) / math.sqrt(d)
    return SparseState(parties * d, terms)


def bell_state(d: int, m: int, n: int) -> SparseState:
    """Two-qudit Bell state: shift ``m`` on the second qudit, phase index ``n``."""
    return generalized_bell(d, 2, (n, m))


def hadamard_d(d: int) -> ModeUnitary:
    """``H[k, x] = exp(-2 pi i kx / d) / sqrt(d)``."""
    _check_level(d)
    k, x = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    return ModeUnitary(np.exp(-2j * np.pi * k * x / d) / math.sqrt(d))


def apply_hadamard(state: SparseState, register: QuditRegister) -> SparseState:
    return apply_interferometer(state, hadamard_d(register.d).on(*register.modes))


# --- C-SWAP -----------------------------------------------------------------

# Which target rail meets the C-SIGN, and the splitter angles around it.
# Frozen from calibrate_cswap(); see tests.
CSWAP_RAIL = "p"
CSWAP_ANGLES = (math.pi / 4, -math.pi / 4)


def ideal_cswap(state: SparseState, control: int, p: int, q: int) -> SparseState:
    terms = {}
    for k, v in state.terms.items():
        if k[control] == 1:
            k = list(k)
            k[p], k[q] = k[q], k[p]
            k = tuple(k)
        terms[k] = v
    return SparseState(state.mode_count, terms)


def _cswap_with(state, control, p, q, backend, rail, angles) -> ConditionalResult:
    for mode in (p, q):
        if mode == control:
            raise ValueError(f"C-SWAP modes collide: control {control}, targets {p}, {q}")
    if p == q:
        raise ValueError(f"C-SWAP target modes collide: {p}")
    psi = apply_two_mode(state, beam_splitter(angles[0]), p, q)
    inner = backend.csign(psi, control, p if rail == "p" else q)
    branches = []
    for br in inner.branches:
        post = br.state
        if br.success:
            post = apply_two_mode(post, beam_splitter(angles[1]), p, q)
        branches.append(type(br)(br.outcome, br.probability, post, br.success, br.correction))
    return ConditionalResult(tuple(branches))


def calibrate_cswap() -> list[tuple[str, tuple[float, float]]]:
    """Rail/angle configurations that reproduce the C-SWAP table with phase +1.

    Checked amplitude-wise with the ideal backend on modes (control, p, q) for
    every control/target configuration with at most one target photon.
    """
    ideal = Backend("ideal")
    cases = [(c, tp, tq) for c in (0, 1) for tp, tq in ((0, 0), (1, 0), (0, 1))]
    passing = []
    quarter = math.pi / 4
    for rail in ("p", "q"):
        for angles in ((quarter, -quarter), (-quarter, quarter)):
            ok = True
            for occ in cases:
                s = SparseState.basis(occ)
                out = _cswap_with(s, 0, 1, 2, ideal, rail, angles).successes()[0].state
                ok &= out.allclose(ideal_cswap(s, 0, 1, 2), 1e-12)
            if ok:
                passing.append((rail, angles))
    return passing


def cswap(state: SparseState, control_mode: int, target_p: int, target_q: int, backend: Backend) -> ConditionalResult:
    """Exchange modes ``target_p``, ``target_q`` when ``control_mode`` holds a photon."""
    return _cswap_with(state, control_mode, target_p, target_q, backend, CSWAP_RAIL, CSWAP_ANGLES)


# --- C-SHIFT networks ---------------------------------------------------------


@dataclass(frozen=True)
class SwapNetwork:
    """Ordered C-SWAPs ``(control_value, target_p, target_q)`` on register positions."""

    d: int
    swaps: tuple[tuple[int, int, int], ...]

    @property
    def count(self) -> int:
        return len(self.swaps)

    def permutation(self, control_value: int) -> tuple[int, ...]:
        """Where a target photon starting at each position ends up."""
        position = list(range(self.d))
        for v, p, q in self.swaps:
            if v != control_value:
                continue
            position = [q if x == p else p if x == q else x for x in position]
        return tuple(position)

    def is_cshift(self) -> bool:
        return all(self.permutation(v) == rotation(self.d, v) for v in range(self.d))

    def to_text(self) -> str:
        return "".join(f"CSWAP {v} {p} {q}\n" for v, p, q in self.swaps)

    @classmethod
    def from_text(cls, d: int, text: str) -> SwapNetwork:
        swaps = []
        for line in text.splitlines():
            if line.strip():
                tag, v, p, q = line.split()
                if tag != "CSWAP":
                    raise ValueError(f"bad network line {line!r}")
                swaps.append((int(v), int(p), int(q)))
        return cls(d, tuple(swaps))


def rotation(d: int, v: int) -> tuple[int, ...]:
    """Target positions y -> (y - v) mod d."""
    return tuple((y - v) % d for y in range(d))


def _transpositions(target: Sequence[int]) -> list[tuple[int, int]]:
    """Minimal swap sequence moving a photon at y to ``target[y]`` for every y."""
    d = len(target)
    source_of = [0] * d
    for y, t in enumerate(target):
        source_of[t] = y
    content = list(range(d))  # content[pos] = original position of what sits there
    swaps = []
    for pos in range(d):
        want = source_of[pos]
        if content[pos] != want:
            other = content.index(want)
            swaps.append((pos, other))
            content[pos], content[other] = content[other], content[pos]
    return swaps


def cshift_network(d: int) -> SwapNetwork:
    """Generic network: each nonzero control value gets its rotation as <= d-1 swaps."""
    _check_level(d)
    swaps = tuple((v, p, q) for v in range(1, d) for p, q in _transpositions(rotation(d, v)))
    return SwapNetwork(d, swaps)


def _swap_distance(current: Sequence[int], target: Sequence[int]) -> int:
    """Transpositions needed to turn ``current`` into ``target`` (d minus cycle count)."""
    d = len(current)
    inverse = [0] * d
    for y, c in enumerate(current):
        inverse[c] = y
    seen = [False] * d
    cycles = 0
    for start in range(d):
        if not seen[start]:
            cycles += 1
            x = start
            while not seen[x]:
                seen[x] = True
                x = target[inverse[x]]
    return d - cycles


@lru_cache(maxsize=None)
def search_minimal_network(d: int, max_swaps: int) -> SwapNetwork | None:
    """Shortest C-SWAP list realizing C-SHIFT, or None within ``max_swaps``.

    Candidates are ordered (control value, target pair) lists, searched by
    increasing length in lexicographic order. Swaps with different control
    values act on disjoint inputs and commute, so only lists with
    non-decreasing control values are visited; branches that cannot reach
    the target within the remaining budget are cut using the transposition
    distance, which never overestimates. The first list found is therefore
    the lexicographically first minimal network in that canonical form.
    """
    _check_level(d)
    pairs = [(p, q) for p in range(d) for q in range(p + 1, d)]
    targets = {v: rotation(d, v) for v in range(1, d)}
    identity = tuple(range(d))

    def need(v, perm):
        return _swap_distance(perm, targets[v])

    def lower_bound(v, perm):
        return need(v, perm) + sum(need(w, identity) for w in range(v + 1, d))

    def dfs(v, perm, budget, acc):
        if v == d:
            return acc if budget == 0 else None
        if lower_bound(v, perm) > budget:
            return None
        if perm == targets[v]:
            found = dfs(v + 1, identity, budget, acc) if v + 1 < d else (acc if budget == 0 else None)
            if found is not None:
                return found
        if budget == 0:
            return None
        for p, q in pairs:
            nxt = tuple(q if x == p else p if x == q else x for x in perm)
            found = dfs(v, nxt, budget - 1, acc + [(v, p, q)])
            if found is not None:
                return found
        return None

    for length in range(0, max_swaps + 1):
        found = dfs(1, identity, length, [])
        if found is not None:
            return SwapNetwork(d, tuple(found))
    return None


def ideal_cshift(state: SparseState, control: QuditRegister, target: QuditRegister) -> SparseState:
    terms = {}
    for k, v in state.terms.items():
        x, y = control.decode(k), target.decode(k)
        if x is None or y is None:
            raise ValueError(f"term {k} is not a valid two-qudit codeword")
        k = list(k)
        k[target.modes[y]] = 0
        k[target.modes[(y - x) % target.d]] = 1
        terms[tuple(k)] = v
    return SparseState(state.mode_count, terms)


def cshift_stages(control: QuditRegister, target: QuditRegister, backend: Backend, network: SwapNetwork):
    """One stage callable per C-SWAP of ``network``."""

    def make(v, p, q):
        def stage(s: SparseState) -> ConditionalResult:
            return cswap(s, control.modes[v], target.modes[p], target.modes[q], backend)

        stage.label = f"CSWAP c={control.modes[v]} {target.modes[p]}<->{target.modes[q]}"
        return stage

    return [make(v, p, q) for v, p, q in network.swaps]


def apply_cshift(
    state: SparseState,
    control: QuditRegister,
    target: QuditRegister,
    backend: Backend,
    network: SwapNetwork | None = None,
    *,
    merge: bool = True,
    max_branches: int = DEFAULT_BRANCH_CAP,
) -> ConditionalResult:
    """|x>|y> -> |x>|(y - x) mod d> on success; probability p**network.count."""
    if control.d != target.d:
        raise ValueError("registers must share one dimension")
    if set(control.modes) & set(target.modes):
        raise ValueError("control and target registers overlap")
    network = network or cshift_network(control.d)
    if not network.is_cshift():
        raise ValueError("network does not realize C-SHIFT")
    stages = cshift_stages(control, target, backend, network)
    return chain(state, stages, merge=merge, max_branches=max_branches)


def product_state(d: int, *levels: int) -> SparseState:
    state = logical_state(d, levels[0])
    for j in levels[1:]:
        state = tensor(state, logical_state(d, j))
    return state


def all_labels(d: int, parties: int) -> list[tuple[int, ...]]:
    return list(product(range(d), repeat=parties))
