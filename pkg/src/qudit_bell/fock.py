"""Sparse multimode Fock-space states and passive linear-optical evolution.

Convention used throughout the package: a mode unitary ``U`` acts on creation
operators column-wise, ``a_k^dag -> sum_j U[j, k] a_j^dag``.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

PRUNE_THRESHOLD = 1e-12
UNITARY_TOL = 1e-10

Occupation = tuple[int, ...]


def fock_dim(modes: int, photons: int) -> int:
    """Number of occupation vectors with ``photons`` bosons in ``modes`` modes."""
    if modes < 1 or photons < 0:
        raise ValueError(f"need modes >= 1 and photons >= 0, got ({modes}, {photons})")
    dim = math.comb(photons + modes - 1, photons)
    if dim > sys.maxsize:
        raise OverflowError(f"sector size C({photons + modes - 1}, {photons}) exceeds index range")
    return dim


def _compositions(modes: int, photons: int) -> Iterator[Occupation]:
    if modes == 1:
        yield (photons,)
        return
    for first in range(photons, -1, -1):
        for rest in _compositions(modes - 1, photons - first):
            yield (first, *rest)


def enumerate_sector(modes: int, photons: int) -> list[Occupation]:
    """All occupation vectors of the sector, lexicographically descending."""
    fock_dim(modes, photons)
    return list(_compositions(modes, photons))


def check_unitary(matrix: np.ndarray, tol: float = UNITARY_TOL) -> float:
    """Return ``max|U U^dag - I|``; raise ``ValueError`` when it exceeds ``tol``."""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {matrix.shape}")
    deviation = float(np.max(np.abs(matrix @ matrix.conj().T - np.eye(len(matrix)))))
    if deviation > tol:
        raise ValueError(f"matrix is not unitary: max|UU^dag - I| = {deviation:.3e} > {tol:.0e}")
    return deviation


@dataclass(frozen=True, eq=False)
class ModeUnitary:
    """A unitary acting on the creation operators of ``target_modes``.

    ``target_modes[k]`` is the global mode addressed by row/column ``k``.
    """

    matrix: np.ndarray
    target_modes: tuple[int, ...] = ()

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=complex)
        check_unitary(matrix)
        modes = tuple(int(m) for m in self.target_modes) or tuple(range(len(matrix)))
        if len(modes) != len(matrix):
            raise ValueError(f"{len(matrix)}x{len(matrix)} matrix given {len(modes)} target modes")
        if len(set(modes)) != len(modes) or min(modes) < 0:
            raise ValueError(f"target modes must be distinct and non-negative: {modes}")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "target_modes", modes)

    @property
    def size(self) -> int:
        return len(self.matrix)

    def on(self, *modes: int) -> ModeUnitary:
        """Same matrix addressed to different global modes."""
        return ModeUnitary(self.matrix, modes)


class SparseState:
    """Pure state of a fixed photon-number sector stored as occupation -> amplitude.

    Instances are treated as immutable values. Keys share one length
    (``mode_count``). Superpositions across photon-number sectors are allowed
    (heralded gates act on e.g. |0> + |1> + |2>); passive optics conserves the
    photon total of every term separately.
    """

    __slots__ = ("mode_count", "terms")

    def __init__(self, mode_count: int, terms: Mapping[Sequence[int], complex]):
        clean: dict[Occupation, complex] = {}
        for key, amp in terms.items():
            key = tuple(int(n) for n in key)
            if len(key) != mode_count:
                raise ValueError(f"occupation {key} does not have {mode_count} modes")
            if min(key, default=0) < 0:
                raise ValueError(f"negative occupation in {key}")
            clean[key] = clean.get(key, 0j) + complex(amp)
        self.mode_count = int(mode_count)
        self.terms = {k: v for k, v in clean.items() if abs(v) >= PRUNE_THRESHOLD}

    @classmethod
    def _trusted(cls, mode_count: int, terms: dict[Occupation, complex]) -> SparseState:
        obj = cls.__new__(cls)
        obj.mode_count = mode_count
        obj.terms = terms
        return obj

    @classmethod
    def basis(cls, occupation: Sequence[int]) -> SparseState:
        return cls(len(occupation), {tuple(occupation): 1.0})

    @classmethod
    def vacuum(cls, modes: int) -> SparseState:
        return cls.basis((0,) * modes)

    @property
    def photon_numbers(self) -> tuple[int, ...]:
        """Sorted photon totals present in the superposition."""
        return tuple(sorted({sum(k) for k in self.terms}))

    @property
    def photon_number(self) -> int:
        """The photon total of a single-sector state."""
        totals = self.photon_numbers
        if len(totals) > 1:
            raise ValueError(f"state spans several photon sectors {totals}")
        return totals[0] if totals else 0

    def amplitude(self, occupation: Sequence[int]) -> complex:
        return self.terms.get(tuple(occupation), 0j)

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.terms.values()))

    def normalized(self) -> SparseState:
        nrm = self.norm()
        if nrm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return self.scaled(1.0 / nrm)

    def scaled(self, factor: complex) -> SparseState:
        return SparseState._trusted(self.mode_count, {k: v * factor for k, v in self.terms.items()})

    def sorted_terms(self) -> list[tuple[Occupation, complex]]:
        """Terms in canonical (lexicographically descending) order."""
        return sorted(self.terms.items(), key=lambda kv: kv[0], reverse=True)

    def to_vector(self, basis: Sequence[Occupation] | None = None) -> np.ndarray:
        if basis is None:
            basis = [occ for n in self.photon_numbers for occ in enumerate_sector(self.mode_count, n)]
        return np.array([self.terms.get(tuple(b), 0j) for b in basis], dtype=complex)

    def allclose(self, other: SparseState, atol: float = 1e-9) -> bool:
        """Amplitude-wise comparison (global phase included)."""
        if self.mode_count != other.mode_count:
            return False
        keys = self.terms.keys() | other.terms.keys()
        return all(abs(self.amplitude(k) - other.amplitude(k)) <= atol for k in keys)

    def __repr__(self) -> str:
        body = " + ".join(f"({a:.4g})|{','.join(map(str, k))}>" for k, a in self.sorted_terms()[:6])
        more = "" if len(self.terms) <= 6 else f" + ... ({len(self.terms)} terms)"
        return f"SparseState[{self.mode_count}]({body}{more})"


def superpose(pairs: Iterable[tuple[complex, SparseState]]) -> SparseState:
    """Linear combination ``sum c_i |psi_i>`` (not renormalized)."""
    out: dict[Occupation, complex] = {}
    mode_count = None
    for coeff, state in pairs:
        if mode_count is None:
            mode_count = state.mode_count
        elif state.mode_count != mode_count:
            raise ValueError("mode counts differ")
        for k, v in state.terms.items():
            out[k] = out.get(k, 0j) + coeff * v
    if mode_count is None:
        raise ValueError("empty superposition")
    return SparseState(mode_count, out)


def inner_product(a: SparseState, b: SparseState) -> complex:
    """Hermitian inner product <a|b>."""
    if a.mode_count != b.mode_count:
        raise ValueError(f"mode counts differ: {a.mode_count} vs {b.mode_count}")
    small, large = (a, b) if len(a.terms) <= len(b.terms) else (b, a)
    total = 0j
    for k, v in small.terms.items():
        w = large.terms.get(k)
        if w is not None:
            total += v.conjugate() * w if small is a else w.conjugate() * v
    return total


def fidelity(a: SparseState, b: SparseState) -> float:
    """|<a|b>|^2 for normalized arguments (norms are divided out)."""
    return abs(inner_product(a, b)) ** 2 / (a.norm() ** 2 * b.norm() ** 2)


def tensor(a: SparseState, b: SparseState) -> SparseState:
    """``a`` on the first modes, ``b`` appended after them."""
    terms = {ka + kb: va * vb for ka, va in a.terms.items() for kb, vb in b.terms.items()}
    return SparseState._trusted(a.mode_count + b.mode_count, terms)


def permute_modes(state: SparseState, permutation: Sequence[int]) -> SparseState:
    """Relabel modes: new mode ``i`` holds what old mode ``permutation[i]`` held."""
    perm = tuple(permutation)
    if sorted(perm) != list(range(state.mode_count)):
        raise ValueError(f"{perm} is not a permutation of {state.mode_count} modes")
    terms = {tuple(k[p] for p in perm): v for k, v in state.terms.items()}
    return SparseState._trusted(state.mode_count, terms)


def _check_modes(state: SparseState, modes: Sequence[int]) -> None:
    if len(set(modes)) != len(modes):
        raise ValueError(f"modes must be distinct: {tuple(modes)}")
    for m in modes:
        if not 0 <= m < state.mode_count:
            raise IndexError(f"mode {m} out of range for {state.mode_count} modes")


def apply_phase(state: SparseState, mode: int, phi: float) -> SparseState:
    """Phase shifter ``exp(i phi n)`` on one mode."""
    _check_modes(state, [mode])
    phase = np.exp(1j * phi)
    powers: dict[int, complex] = {}
    terms = {}
    for k, v in state.terms.items():
        n = k[mode]
        if n not in powers:
            powers[n] = complex(phase**n)
        terms[k] = v * powers[n]
    return SparseState._trusted(state.mode_count, terms)


def _two_mode_table(u: np.ndarray, ni: int, nj: int) -> list[tuple[int, complex]]:
    """Expansion of |ni, nj> under a 2x2 mode unitary as [(p, amp)] with q = ni + nj - p."""
    u00, u10, u01, u11 = (complex(x) for x in (u[0, 0], u[1, 0], u[0, 1], u[1, 1]))
    total = ni + nj
    coeff = [0j] * (total + 1)
    for k1 in range(ni + 1):
        c1 = math.comb(ni, k1) * u00**k1 * u10 ** (ni - k1)
        if c1 == 0:
            continue
        for k2 in range(nj + 1):
            c2 = math.comb(nj, k2) * u01**k2 * u11 ** (nj - k2)
            coeff[k1 + k2] += c1 * c2
    norm_in = math.sqrt(math.factorial(ni) * math.factorial(nj))
    out = []
    for p, c in enumerate(coeff):
        amp = c * math.sqrt(math.factorial(p) * math.factorial(total - p)) / norm_in
        if abs(amp) >= PRUNE_THRESHOLD:
            out.append((p, amp))
    return out


def apply_two_mode(state: SparseState, u2: ModeUnitary | np.ndarray, i: int, j: int) -> SparseState:
    """Exact Fock-space image of ``state`` under a 2x2 mode unitary on modes ``(i, j)``."""
    matrix = u2.matrix if isinstance(u2, ModeUnitary) else np.asarray(u2, dtype=complex)
    if matrix.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got {matrix.shape}")
    check_unitary(matrix)
    _check_modes(state, [i, j])
    tables: dict[tuple[int, int], list[tuple[int, complex]]] = {}
    out: dict[Occupation, complex] = {}
    for key, amp in state.terms.items():
        ni, nj = key[i], key[j]
        table = tables.get((ni, nj))
        if table is None:
            table = tables[(ni, nj)] = _two_mode_table(matrix, ni, nj)
        total = ni + nj
        base = list(key)
        for p, c in table:
            base[i] = p
            base[j] = total - p
            new_key = tuple(base)
            out[new_key] = out.get(new_key, 0j) + amp * c
    return SparseState._trusted(
        state.mode_count, {k: v for k, v in out.items() if abs(v) >= PRUNE_THRESHOLD}
    )


@lru_cache(maxsize=256)
def _cached_decomposition(raw: bytes, size: int):
    from qudit_bell.interferometer import reck_decompose

    matrix = np.frombuffer(raw, dtype=complex).reshape(size, size)
    return tuple(reck_decompose(matrix))


def apply_interferometer(state: SparseState, unitary: ModeUnitary) -> SparseState:
    """Apply ``unitary`` as its sequence of beam splitters and phase shifters."""
    from qudit_bell.interferometer import beam_splitter

    _check_modes(state, unitary.target_modes)
    modes = unitary.target_modes
    elements = _cached_decomposition(np.ascontiguousarray(unitary.matrix).tobytes(), unitary.size)
    for el in elements:
        if el.kind == "BS":
            state = apply_two_mode(state, beam_splitter(el.param).matrix, modes[el.modes[0]], modes[el.modes[1]])
        else:
            state = apply_phase(state, modes[el.modes[0]], el.param)
    return state


def permanent(matrix: np.ndarray) -> complex:
    """Ryser's formula with Gray-code subset updates, O(2^n n)."""
    a = np.asarray(matrix, dtype=complex)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"permanent needs a square matrix, got {a.shape}")
    if n == 0:
        return 1.0 + 0j
    row_sums = np.zeros(n, dtype=complex)
    total = 0j
    gray_prev = 0
    for step in range(1, 1 << n):
        gray = step ^ (step >> 1)
        changed = (gray ^ gray_prev).bit_length() - 1
        if gray & (1 << changed):
            row_sums += a[:, changed]
        else:
            row_sums -= a[:, changed]
        gray_prev = gray
        term = np.prod(row_sums)
        total += -term if gray.bit_count() % 2 else term
    return complex((-1) ** n * total)


def transition_amplitude(
    unitary: ModeUnitary | np.ndarray, in_occ: Sequence[int], out_occ: Sequence[int]
) -> complex:
    """<out| U |in> from the permanent of the photon-repeated submatrix."""
    matrix = unitary.matrix if isinstance(unitary, ModeUnitary) else np.asarray(unitary, dtype=complex)
    if len(in_occ) != len(matrix) or len(out_occ) != len(matrix):
        raise ValueError("occupation length must match the matrix size")
    if sum(in_occ) != sum(out_occ):
        return 0j
    cols = [k for k, n in enumerate(in_occ) for _ in range(n)]
    rows = [j for j, m in enumerate(out_occ) for _ in range(m)]
    sub = matrix[np.ix_(rows, cols)]
    norm = math.prod(math.factorial(n) for n in in_occ) * math.prod(math.factorial(m) for m in out_occ)
    return permanent(sub) / math.sqrt(norm)


@dataclass(frozen=True)
class MeasurementBranch:
    outcome: Occupation
    probability: float
    state: SparseState


def measure_modes(state: SparseState, measured_modes: Sequence[int]) -> list[MeasurementBranch]:
    """Photon-number measurement of ``measured_modes``.

    Returns one branch per outcome with nonzero probability, in descending
    lexicographic outcome order. Post-measurement states live on the
    remaining modes, kept in ascending original order, and are normalized.
    """
    measured = tuple(measured_modes)
    _check_modes(state, measured)
    keep = tuple(m for m in range(state.mode_count) if m not in set(measured))
    groups: dict[Occupation, dict[Occupation, complex]] = {}
    for key, amp in state.terms.items():
        outcome = tuple(key[m] for m in measured)
        rest = tuple(key[m] for m in keep)
        groups.setdefault(outcome, {})[rest] = amp
    total = sum(abs(a) ** 2 for a in state.terms.values())
    branches = []
    for outcome in sorted(groups, reverse=True):
        terms = groups[outcome]
        weight = sum(abs(a) ** 2 for a in terms.values())
        if weight <= 0.0:
            continue
        scale = 1.0 / math.sqrt(weight)
        post = SparseState._trusted(len(keep), {k: v * scale for k, v in terms.items()})
        branches.append(MeasurementBranch(outcome, weight / total, post))
    return branches


def dump_state(state: SparseState) -> str:
    """Text serialization: header line, then ``n0,n1,... re im`` per term.

    The ``photons`` header lists every photon total present, comma-separated.
    """
    totals = ",".join(map(str, state.photon_numbers))
    lines = [f"mode_count={state.mode_count} photons={totals}"]
    for key, amp in state.sorted_terms():
        lines.append(f"{','.join(map(str, key))} {amp.real:.17g} {amp.imag:.17g}")
    return "\n".join(lines) + "\n"


def load_state(text: str) -> SparseState:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    header = dict(field.split("=", 1) for field in lines[0].split())
    mode_count = int(header["mode_count"])
    terms = {}
    for ln in lines[1:]:
        parts = ln.split()
        occ, re, im = parts if len(parts) == 3 else ("", *parts)
        key = tuple(int(n) for n in occ.split(",")) if occ else ()
        terms[key] = complex(float(re), float(im))
    state = SparseState(mode_count, terms)
    if ",".join(map(str, state.photon_numbers)) != header["photons"]:
        raise ValueError("photon total in header does not match the terms")
    return state
