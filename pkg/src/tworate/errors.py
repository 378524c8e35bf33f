"""Exception hierarchy.

Exit codes follow the CLI contract: 2 for infeasible rate/plan inputs,
3 for coverage or parse failures, 4 for exhausted budgets and
non-converged training runs.
"""


class TworateError(Exception):
    exit_code = 1


class InfeasibleError(TworateError):
    """Rates or plans violating the feasibility region 0 < alpha <= 1 - beta."""

    exit_code = 2


class CoverageError(TworateError):
    """A score table or state set does not cover the support it is used with."""

    exit_code = 3


class ParseError(CoverageError):
    """Malformed tabular input (empty file, ragged rows, bad fields)."""


class AbsoluteContinuityError(CoverageError):
    """G places mass on states outside the support of F."""


class BudgetExceededError(TworateError):
    """Rejection sampling exceeded its proposal budget."""

    exit_code = 4


class ConvergenceError(TworateError):
    """Training failed to converge (CLI surface only; the library reports a flag)."""

    exit_code = 4
