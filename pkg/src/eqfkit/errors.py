"""Exception types raised by the numerical core and the filters."""


class NonSkewInput(ValueError):
    """Matrix handed to vee3 is not skew-symmetric within tolerance."""


class SingularInput(ValueError):
    """Matrix cannot be projected onto the rotation group (det <= 0)."""


class MissingPsi(ValueError):
    """State matrix requested along the input-action route without psi."""


class MissingRho(ValueError):
    """Equivariant output matrix requested without an output action rho."""


class NotNormalChart(ValueError):
    """Equivariant output matrix requires normal coordinates (a wedge map)."""


class SingularN(ValueError):
    """Composed output gain N is singular or too ill-conditioned to invert."""


class LostPositivity(ValueError):
    """Covariance lost positive definiteness (Cholesky failed)."""


class NonFiniteEvaluation(ValueError):
    """Function under differentiation returned NaN or Inf."""


class NotTangent(ValueError):
    """Vector expected in a tangent space has a radial component."""


class AntipodeOutOfChart(ValueError):
    """Point is inside the excluded cap around the chart antipode."""


class SingularInnovationCovariance(ValueError):
    """EKF innovation covariance is not invertible."""
