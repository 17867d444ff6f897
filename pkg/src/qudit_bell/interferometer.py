"""Elementary optical matrices and triangular (Reck) decomposition of unitaries."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from qudit_bell.fock import ModeUnitary, check_unitary

_ZERO = 1e-15


def beam_splitter(theta: float) -> ModeUnitary:
    """Real-rotation splitter ``[[cos, -sin], [sin, cos]]``."""
    c, s = math.cos(theta), math.sin(theta)
    return ModeUnitary(np.array([[c, -s], [s, c]], dtype=complex))


def phase_shifter(phi: float) -> ModeUnitary:
    return ModeUnitary(np.array([[np.exp(1j * phi)]]))


def dft_matrix(n: int) -> ModeUnitary:
    """``F[j, k] = exp(2 pi i jk / n) / sqrt(n)``."""
    if n < 1:
        raise ValueError(f"DFT size must be >= 1, got {n}")
    j, k = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return ModeUnitary(np.exp(2j * np.pi * j * k / n) / math.sqrt(n))


def delay_line() -> ModeUnitary:
    # monochromatic model: a delay is the identity
    return ModeUnitary(np.eye(1))


@dataclass(frozen=True)
class Element:
    """One beam splitter (``BS``, two modes) or phase shifter (``PS``, one mode)."""

    kind: str
    modes: tuple[int, ...]
    param: float

    def __post_init__(self):
        if self.kind not in ("BS", "PS"):
            raise ValueError(f"unknown element kind {self.kind!r}")
        if len(self.modes) != (2 if self.kind == "BS" else 1):
            raise ValueError(f"{self.kind} takes {2 if self.kind == 'BS' else 1} mode index(es)")
        if not math.isfinite(self.param):
            raise ValueError("element parameter must be finite")

    def embed(self, size: int) -> np.ndarray:
        full = np.eye(size, dtype=complex)
        if self.kind == "BS":
            i, j = self.modes
            full[np.ix_([i, j], [i, j])] = beam_splitter(self.param).matrix
        else:
            full[self.modes[0], self.modes[0]] = np.exp(1j * self.param)
        return full


def _wrap(angle: float) -> float:
    """Map to (-pi, pi]."""
    wrapped = math.remainder(angle, 2 * math.pi)
    return math.pi if wrapped == -math.pi else wrapped


def reck_decompose(unitary: np.ndarray | ModeUnitary, tol: float = 1e-10) -> list[Element]:
    """Decompose a unitary into splitters and phase shifters, in application order.

    Rows are cleared from the bottom up; within a row, entries are pushed
    rightwards with adjacent-column rotations, each preceded by a phase on the
    left column. The residual diagonal becomes a final phase layer, so the
    recomposed matrix reproduces ``unitary`` including its global phase.
    """
    matrix = unitary.matrix if isinstance(unitary, ModeUnitary) else np.asarray(unitary, dtype=complex)
    check_unitary(matrix, tol)
    w = np.array(matrix, dtype=complex)
    d = len(w)
    elements: list[Element] = []
    for row in range(d - 1, 0, -1):
        for a in range(row):
            x, y = w[row, a], w[row, a + 1]
            if abs(x) < _ZERO:
                continue
            if abs(y) < _ZERO:
                phi, theta = 0.0, math.pi / 2
            else:
                phi = _wrap(np.angle(y) - np.angle(x))
                theta = math.atan2(-abs(x), abs(y))
            c, s = math.cos(theta), math.sin(theta)
            e = np.exp(1j * phi)
            block = np.array([[e * c, -e * s], [s, c]])
            w[:, [a, a + 1]] = w[:, [a, a + 1]] @ block
            w[row, a] = 0.0
            # w <- w T with T = P(phi) B(theta); undoing it applies PS(-phi) then BS(-theta)
            if phi != 0.0:
                elements.append(Element("PS", (a,), _wrap(-phi)))
            elements.append(Element("BS", (a, a + 1), _wrap(-theta)))
    for k in range(d):
        phi = float(np.angle(w[k, k]))
        if abs(phi) > _ZERO:
            elements.append(Element("PS", (k,), _wrap(phi)))
    return elements


def recompose(elements: Iterable[Element], size: int) -> np.ndarray:
    """Matrix of an element list applied first-to-last."""
    total = np.eye(size, dtype=complex)
    for el in elements:
        total = el.embed(size) @ total
    return total


def to_netlist(elements: Sequence[Element]) -> str:
    lines = []
    for el in elements:
        modes = " ".join(str(m) for m in el.modes)
        lines.append(f"{el.kind} {modes} {el.param:.17g}")
    return "\n".join(lines) + ("\n" if lines else "")


def parse_netlist(text: str) -> list[Element]:
    elements = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        kind, *fields = line.split()
        elements.append(Element(kind, tuple(int(f) for f in fields[:-1]), float(fields[-1])))
    return elements
