"""Shared tolerances, verdicts and exceptions."""

from __future__ import annotations

from dataclasses import dataclass

#: Absolute slack added on the bound side of every floating-point residual check.
TOL_FLOAT = 1e-9


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class HorizonExceeded(IndexError):
    """A check needed a sequence term beyond the range the sequence is defined on."""


class MissingModulus(LookupError):
    """A hypothesis needs a modulus that is neither declared nor brute-forceable."""


class PreconditionViolation(AssertionError):
    """A hypothesis asserted by the caller fails on the checked range.

    ``hypothesis`` is a short tag (``"H1e"``, ``"recurrence"``, ...) and
    ``index`` the first index at which the failure was observed, if any.
    """

    def __init__(self, hypothesis: str, index: int | None = None, detail: str = ""):
        self.hypothesis = hypothesis
        self.index = index
        self.detail = detail
        where = "" if index is None else f" at n={index}"
        msg = f"hypothesis {hypothesis} violated{where}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


@dataclass(frozen=True)
class Verdict:
    """Outcome of a horizon-bounded check.

    Truthy iff the check passed. A passing verdict means "not falsified up to
    the checked horizon", never "proved". On failure ``index`` holds the first
    counterexample index and ``detail`` says what failed there.
    """

    ok: bool
    index: int | None = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.ok

    @classmethod
    def passed(cls, detail: str = "") -> "Verdict":
        return cls(True, None, detail)

    @classmethod
    def failed(cls, index: int | None, detail: str = "") -> "Verdict":
        return cls(False, index, detail)
