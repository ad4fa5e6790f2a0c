from enum import Enum


__all__: tuple = (
    'DomainKind',
    'FieldKind',
    'MapKind',
    'IntegrationMethod',
    'Verdict',
    'RangeClassification',
    'Command',
)


class DomainKind(Enum):
    """|enum|

    Represents the kind of domain a field or map lives on.

    Attributes
    ----------
    UNIT_DISC
        The unit disc in the complex plane.
    UNIT_BALL
        The euclidean unit ball in C^n.
    POLYDISC
        The unit polydisc in C^n.
    FULL_SPACE
        All of C^n (Kobayashi metric vanishes identically).
    """

    UNIT_DISC = 'disc'
    UNIT_BALL = 'ball'
    POLYDISC = 'polydisc'
    FULL_SPACE = 'full'


class FieldKind(Enum):
    """|enum|

    Represents the kind of a time-dependent vector field.

    Attributes
    ----------
    RADIAL
        A linear field ``G(z, t) = A z``.
    BERKSON_PORTA
        A disc field ``G(z, t) = (z - tau)(conj(tau) z - 1) p(z)``.
    BALL_DIAGONAL
        A diagonal linear field with piecewise constant eigenvalues.
    AUTOMORPHISM
        A generator of automorphisms of the ball, ``a - <z, a> z + B z``.
    CONJUGATED
        A field conjugated by a Moebius automorphism of the ball.
    LIFTED
        The Roper-Suffridge lift of a disc field.
    CUSTOM
        A field backed by a registered callback.
    """

    RADIAL = 'radial'
    BERKSON_PORTA = 'berkson_porta'
    BALL_DIAGONAL = 'ball_diagonal'
    AUTOMORPHISM = 'automorphism'
    CONJUGATED = 'conjugated'
    LIFTED = 'lifted'
    CUSTOM = 'custom'


class MapKind(Enum):
    """|enum|

    Represents the kind of a holomorphic test map.
    """

    IDENTITY = 'identity'
    KOEBE = 'koebe'
    HALF_PLANE = 'half_plane'
    POLYNOMIAL = 'polynomial'
    ROPER_SUFFRIDGE = 'roper_suffridge'
    CALLBACK = 'callback'


class IntegrationMethod(Enum):
    """|enum|

    Represents the Runge-Kutta scheme used by the flow integrator.

    Attributes
    ----------
    RK4_FIXED
        Classical fourth order scheme with a fixed step.
    RK45_ADAPTIVE
        Cash-Karp 5(4) embedded pair with adaptive step control.
    """

    RK4_FIXED = 'rk4'
    RK45_ADAPTIVE = 'rk45'


class Verdict(Enum):
    """|enum|

    Represents the outcome of a numerical certification.

    Attributes
    ----------
    PASS
        Every sample satisfied the checked property.
    FAIL
        At least one sample violated the property beyond tolerance.
    MARGINAL
        The worst sample sits inside the tolerance band below zero.
    """

    PASS = 'PASS'
    FAIL = 'FAIL'
    MARGINAL = 'MARGINAL'


class RangeClassification(Enum):
    """|enum|

    Represents the biholomorphism class reported for a Loewner range.

    Attributes
    ----------
    DISC
        The range is the unit disc.
    PLANE
        The range is the complex plane.
    BALL_BIHOLOMORPHIC
        The range is biholomorphic to the unit ball.
    CYLINDER_BUNDLE
        The range is biholomorphic to B^{n-1} x C.
    INCONCLUSIVE
        The classifier could not decide.
    """

    DISC = 'Disc'
    PLANE = 'Plane'
    BALL_BIHOLOMORPHIC = 'BallBiholomorphic'
    CYLINDER_BUNDLE = 'CylinderBundle'
    INCONCLUSIVE = 'Inconclusive'


class Command(Enum):
    """|enum|

    Represents a batch command of the command line front-end.
    """

    FLOW = 'flow'
    CHAIN = 'chain'
    RANGE = 'range'
    CHECK_FIELD = 'check-field'
    EXTEND = 'extend'
    SHAPE = 'shape'
    KERNEL = 'kernel'
