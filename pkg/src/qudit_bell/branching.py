"""Heralded measurement branches and their composition across gate sequences."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

from qudit_bell.fock import SparseState

DEFAULT_BRANCH_CAP = 10**6


class BudgetExceeded(RuntimeError):
    """Raised instead of silently truncating an enumeration."""


@dataclass(frozen=True)
class Branch:
    """One heralded outcome of a conditional operation.

    ``outcome`` is the detector record. For composite operations it is a tuple
    with one entry per stage; ``None`` marks a stage whose successful
    outcomes were coalesced because they left identical states.
    """

    outcome: Any
    probability: float
    state: SparseState
    success: bool
    correction: str = ""


@dataclass(frozen=True)
class ConditionalResult:
    branches: tuple[Branch, ...]

    @property
    def success_probability(self) -> float:
        return sum(b.probability for b in self.branches if b.success)

    @property
    def total_probability(self) -> float:
        return sum(b.probability for b in self.branches)

    def successes(self) -> list[Branch]:
        return [b for b in self.branches if b.success]

    def failures(self) -> list[Branch]:
        return [b for b in self.branches if not b.success]

    @classmethod
    def deterministic(cls, state: SparseState, correction: str = "") -> ConditionalResult:
        return cls((Branch((), 1.0, state, True, correction),))


Stage = Callable[[SparseState], ConditionalResult]


@dataclass
class _Path:
    outcome: tuple
    probability: float
    state: SparseState
    corrections: list[str] = field(default_factory=list)


def coalesce(paths: Iterable[_Path], atol: float = 1e-9) -> list[_Path]:
    """Merge continuations whose states agree amplitude-wise.

    The merged records are orthogonal detector outcomes, so identical
    conditional states combine into one continuation carrying the summed
    probability.
    """
    merged: list[tuple[_Path, int]] = []
    for p in paths:
        for idx, (rep, count) in enumerate(merged):
            if rep.state.allclose(p.state, atol):
                rep.probability += p.probability
                merged[idx] = (rep, count + 1)
                break
        else:
            merged.append((_Path(p.outcome, p.probability, p.state, list(p.corrections)), 1))
    out = []
    for rep, count in merged:
        if count > 1:
            rep.outcome = rep.outcome[:-1] + (None,)
            rep.corrections[-1] = f"merged {count} outcomes"
        out.append(rep)
    return out


def chain(
    state: SparseState,
    stages: Sequence[Stage],
    *,
    merge: bool = True,
    max_branches: int = DEFAULT_BRANCH_CAP,
) -> ConditionalResult:
    """Run ``stages`` in order, continuing only along successful branches.

    Failure branches end immediately but keep their probability mass, so the
    result still sums to one.
    """
    frontier = [_Path((), 1.0, state)]
    finished: list[Branch] = []
    seen = 0
    for stage in stages:
        nxt: list[_Path] = []
        for path in frontier:
            for br in stage(path.state).branches:
                seen += 1
                if seen > max_branches:
                    raise BudgetExceeded(f"more than {max_branches} branches enumerated")
                outcome = path.outcome + (br.outcome,)
                prob = path.probability * br.probability
                if br.success:
                    nxt.append(_Path(outcome, prob, br.state, path.corrections + [br.correction]))
                else:
                    finished.append(Branch(outcome, prob, br.state, False, "; ".join(path.corrections)))
        frontier = coalesce(nxt) if merge else nxt
    for path in frontier:
        note = "; ".join(c for c in path.corrections if c)
        finished.append(Branch(path.outcome, path.probability, path.state, True, note))
    return ConditionalResult(tuple(finished))
