"""Pass/fail records for identities and inequalities checked on live iterates."""
from __future__ import annotations

from dataclasses import dataclass

IDENTITY_RTOL = 1e-12
BOUND_ATOL = 1e-9

PASS, FAIL, SKIP = "PASS", "FAIL", "SKIP"


@dataclass(frozen=True)
class Check:
    """One checked relation ``lhs (== or <=) rhs`` at iteration ``k``.

    ``slack`` is ``rhs - lhs`` for inequalities and ``-|lhs - rhs|`` for
    identities.  Skipped checks carry the reason in ``note``.
    """

    name: str
    k: int
    lhs: float
    rhs: float
    status: str
    slack: float
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def line(self) -> str:
        text = f"k={self.k:<4d} {self.name:<28s} {self.status}  lhs={self.lhs:.6e} rhs={self.rhs:.6e} slack={self.slack:.3e}"
        return f"{text}  ({self.note})" if self.note else text


def identity(name: str, k: int, lhs: float, rhs: float, rtol: float = IDENTITY_RTOL) -> Check:
    gap = abs(lhs - rhs)
    ok = gap <= rtol * max(abs(lhs), abs(rhs)) or gap == 0.0
    return Check(name, k, float(lhs), float(rhs), PASS if ok else FAIL, -gap)


def bound(name: str, k: int, lhs: float, rhs: float, atol: float = BOUND_ATOL) -> Check:
    ok = lhs <= rhs + atol
    return Check(name, k, float(lhs), float(rhs), PASS if ok else FAIL, float(rhs - lhs))


def skipped(name: str, k: int, reason: str) -> Check:
    nan = float("nan")
    return Check(name, k, nan, nan, SKIP, nan, reason)
