"""
exceptions raised by the kirlab solvers and the experiment runner
"""


class KirlabError(Exception):
    """
    base class of every error raised inside kirlab
    """


class ConfigurationError(KirlabError, ValueError):
    def __init__(self, violations):
        """
        :param violations: str or list of str, each naming one violated condition
        """
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class DimensionError(KirlabError, ValueError):
    pass


class DomainError(KirlabError, ValueError):
    pass


class ConvergenceError(KirlabError, RuntimeError):
    def __init__(self, msg, residual=float("nan"), iterations=0):
        """
        :param msg: description of the failure
        :param residual: last residual (or update) measured before giving up
        :param iterations: number of iterations performed
        """
        super().__init__(f"{msg} (residual={residual:.3e}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations


class StallError(ConvergenceError):
    pass


class NonPositiveError(KirlabError, RuntimeError):
    pass


class InconsistentMinimizerError(KirlabError, RuntimeError):
    pass


class BracketError(KirlabError, RuntimeError):
    pass


class BranchInconsistencyError(KirlabError, RuntimeError):
    pass


class IdentityViolationError(KirlabError, RuntimeError):
    pass


class FixedPointError(ConvergenceError):
    def __init__(self, msg, reason="maxiter", **kwargs):
        super().__init__(msg, **kwargs)
        self.reason = reason


class CollapseError(FixedPointError):
    def __init__(self, msg, **kwargs):
        super().__init__(msg, reason="collapse", **kwargs)


class DivergenceError(FixedPointError):
    def __init__(self, msg, **kwargs):
        super().__init__(msg, reason="divergence", **kwargs)


class ContinuationError(KirlabError, RuntimeError):
    def __init__(self, msg, path=None):
        """
        :param msg: description of the failure
        :param path: list of SolutionRecord computed before the failing step
        """
        super().__init__(msg)
        self.path = [] if path is None else list(path)
