from __future__ import annotations

from typing import Any, Optional


__all__: tuple = (
    'LoewnerException',
    'SpecValidationError',
    'GeometryError',
    'PointOutsideDomain',
    'FieldError',
    'CallbackFailure',
    'DegeneratePair',
    'IntegrationError',
    'TrajectoryEscaped',
    'StepFailure',
    'ChainError',
    'HorizonExceeded',
    'BreakpointTooClose',
    'CurveTooClose',
    'NonIntegerWinding',
    'NewtonDivergence',
    'RangeError',
    'Inconclusive',
    'OperatorError',
    'BranchContinuationFailure',
    'SchwarzPickViolation',
    'ShapeError',
    'SingularJacobian',
    'NonPositiveOperator',
)


class LoewnerException(Exception):
    """
    Raised when an error related to this module occurs.
    """


class SpecValidationError(LoewnerException):
    """
    Raised when a field or map specification document is malformed.

    Attributes
    ----------
    path: str
        Dotted path of the offending entry, e.g. ``'params.a'``.
    """

    def __init__(self, path: str, message: str) -> None:
        self.path: str = path
        super().__init__(f'{path}: {message}' if path else message)


class GeometryError(LoewnerException):
    """
    Raised when a geometric computation cannot be carried out.
    """


class PointOutsideDomain(GeometryError):
    """
    Raised when a point is not interior to the domain it is evaluated on.

    Attributes
    ----------
    point
        The offending point.
    domain: :class:`.DomainSpec`
        The domain the point was checked against.
    """

    def __init__(self, point: Any, domain: Any) -> None:
        self.point = point
        self.domain = domain
        super().__init__(f'Point {point!r} is not interior to {domain!r}.')


class FieldError(LoewnerException):
    """
    Raised when a vector field cannot be evaluated or checked.
    """


class CallbackFailure(FieldError):
    """
    Raised when a user supplied field callback raises.

    Attributes
    ----------
    original: Exception
        The exception raised by the callback.
    """

    def __init__(self, name: str, error: BaseException) -> None:
        self.original: BaseException = error
        super().__init__(f'Callback {name!r} failed ({error.__class__.__name__}): {error}')


class DegeneratePair(FieldError):
    """
    Raised when a dissipativity pair is too close to the diagonal.
    """

    def __init__(self, z: Any, w: Any, distance: float) -> None:
        self.z = z
        self.w = w
        self.distance: float = distance
        super().__init__(f'Pair ({z!r}, {w!r}) is degenerate: k_M = {distance:.3e}.')


class IntegrationError(LoewnerException):
    """
    Raised when the Loewner-Kufarev ODE cannot be integrated.
    """


class TrajectoryEscaped(IntegrationError):
    """
    Raised when a trajectory reaches the boundary margin of its domain.

    Attributes
    ----------
    t_escape: float
        The time at which the trajectory left the admissible region.
    """

    def __init__(self, t_escape: float, message: Optional[str] = None) -> None:
        self.t_escape: float = t_escape
        super().__init__(message or f'Trajectory escaped the domain at t={t_escape:.6g}.')


class StepFailure(IntegrationError):
    """
    Raised when adaptive step control cannot meet the requested tolerance.
    """

    def __init__(self, t: float, h: float) -> None:
        self.t: float = t
        self.h: float = h
        super().__init__(f'Step size underflow at t={t:.6g} (h={h:.3e}).')


class ChainError(LoewnerException):
    """
    Raised when a Loewner chain operation fails.
    """


class HorizonExceeded(ChainError):
    """
    Raised when a chain is evaluated past its horizon.
    """

    def __init__(self, s: float, horizon: float) -> None:
        self.s: float = s
        self.horizon: float = horizon
        super().__init__(f'Chain time s={s!r} exceeds the horizon T={horizon!r}.')


class BreakpointTooClose(ChainError):
    """
    Raised when a PDE sample time sits within the difference step of a field breakpoint.
    """

    def __init__(self, s: float, breakpoint: float) -> None:
        self.s: float = s
        self.breakpoint: float = breakpoint
        super().__init__(f'Sample time s={s!r} is too close to the breakpoint {breakpoint!r}.')


class CurveTooClose(ChainError):
    """
    Raised when a winding target lies on (or next to) the traced curve.
    """

    def __init__(self, distance: float) -> None:
        self.distance: float = distance
        super().__init__(f'Target point is {distance:.3e} away from the traced curve.')


class NonIntegerWinding(ChainError):
    """
    Raised when a numeric winding integral is too far from an integer.
    """

    def __init__(self, value: complex) -> None:
        self.value: complex = value
        super().__init__(f'Winding integral {value:.6g} is not close to an integer; refine the trace.')


class NewtonDivergence(ChainError):
    """
    Raised when Newton inversion of a disc map fails to converge.

    Attributes
    ----------
    w: complex
        The target value.
    k: Optional[int]
        The index of the map in its sequence, if any.
    residual: Optional[float]
        ``|f(z) - w|`` at the best iterate found.
    """

    def __init__(self, w: complex, k: Optional[int] = None, residual: Optional[float] = None) -> None:
        self.w: complex = w
        self.k: Optional[int] = k
        self.residual: Optional[float] = residual
        where = f' for map #{k}' if k is not None else ''
        super().__init__(f'Newton iteration diverged at w={w!r}{where}.')


class RangeError(LoewnerException):
    """
    Raised when a Loewner range computation fails.
    """


class Inconclusive(RangeError):
    """
    Raised when the range classifier cannot decide.
    """

    def __init__(self, reason: str) -> None:
        self.reason: str = reason
        super().__init__(reason)


class OperatorError(LoewnerException):
    """
    Raised when an extension or conjugation operator fails.
    """


class BranchContinuationFailure(OperatorError):
    """
    Raised when a square root cannot be continued along a path.
    """

    def __init__(self, z: complex, value: complex) -> None:
        self.z: complex = z
        self.value: complex = value
        super().__init__(f'Derivative {value!r} at {z!r} is too small to continue the square root.')


class SchwarzPickViolation(OperatorError):
    """
    Raised when a lifted evolution map leaves the unit ball.
    """

    def __init__(self, norm: float) -> None:
        self.norm: float = norm
        super().__init__(f'Lifted point has norm {norm:.12g} >= 1.')


class ShapeError(LoewnerException):
    """
    Raised when a shape certification cannot be carried out.
    """


class SingularJacobian(ShapeError):
    """
    Raised when a map under test is not locally univalent at a probe.
    """

    def __init__(self, z: Any, determinant: complex) -> None:
        self.z = z
        self.determinant: complex = determinant
        super().__init__(f'Jacobian is singular at {z!r} (det={determinant!r}).')


class NonPositiveOperator(ShapeError):
    """
    Raised when the spiral operator A has m(A) <= 0.
    """

    def __init__(self, m: float) -> None:
        self.m: float = m
        super().__init__(f'Operator has m(A) = {m:.6g}; spiral-shapedness needs m(A) > 0.')
