"""Exception taxonomy for the circlefield package.

Every operational failure raises a subclass of :class:`CircleFieldError`
so callers (and the CLI) can separate geometric degeneracies from plain
bugs. The hierarchy is intentionally flat; the class name is the error
code.
"""


class CircleFieldError(Exception):
    """Base class for all circlefield errors."""


# --- projective primitives ------------------------------------------------

class DegenerateJoin(CircleFieldError):
    """Join of two proportional (coincident) points is undefined."""


class DegenerateMeet(CircleFieldError):
    """Meet of two proportional (coincident) lines is undefined."""


class ZeroPolar(CircleFieldError):
    """Polar of a point in the null space of the conic."""


class SingularConic(CircleFieldError):
    """Conic matrix is rank deficient where full rank is required."""


class SingularHomography(CircleFieldError):
    """3x3 map is not invertible (or numerically indistinguishable from it)."""


# --- conics ----------------------------------------------------------------

class NonPositiveRadius(CircleFieldError):
    """Circle radius must be strictly positive."""


class InsufficientPoints(CircleFieldError):
    """Too few points for the requested fit."""


class DegenerateConfiguration(CircleFieldError):
    """Point configuration does not determine the model."""


class NotAnEllipse(CircleFieldError):
    """Conic is not a real ellipse."""


class PointNotOnConic(CircleFieldError):
    """Point does not satisfy the conic equation within tolerance."""


# --- field template / config ------------------------------------------------

class InvalidConfig(CircleFieldError):
    """Configuration value out of range or malformed."""


# --- correspondence derivation ----------------------------------------------

class CenterOnConic(CircleFieldError):
    """Imaged circle center must be strictly interior to the ellipse."""


class NoIntersection(CircleFieldError):
    """A constructed line misses the ellipse."""


class MissingCenter(CircleFieldError):
    """Operation requires an imaged circle center."""


class MissingLine(CircleFieldError):
    """Operation requires a named support line."""


class MissingPoint(CircleFieldError):
    """Operation requires a named support point."""


class NotNested(CircleFieldError):
    """Conic pair is not one-strictly-inside-the-other."""


class NoValidEigenvector(CircleFieldError):
    """No real eigenvector lies inside both conics."""


class AmbiguousPrior(CircleFieldError):
    """Camera prior cannot disambiguate the point labelling."""


# --- homography estimation ---------------------------------------------------

class RankDeficient(CircleFieldError):
    """Constraint system does not determine a homography."""


class IllConditioned(CircleFieldError):
    """Constraint system is numerically unreliable."""


class DegeneratePose(CircleFieldError):
    """Camera pose does not induce a plane homography."""


class PointAtInfinity(CircleFieldError):
    """Point cannot be dehomogenized."""


# --- synthetic cameras --------------------------------------------------------

class ExhaustedRetries(CircleFieldError):
    """Rejection sampling failed to produce an admissible sample."""


class CircleNotVisible(CircleFieldError):
    """Camera does not image the requested circle inside the frame."""


# --- detection ingest ----------------------------------------------------------

class SchemaError(CircleFieldError):
    """Detection file violates the expected schema. Message names the field path."""


class ClassAbsent(CircleFieldError):
    """Requested class has (almost) no pixels in the mask."""


class TooFewCandidates(CircleFieldError):
    """Edge extraction produced fewer candidates than the minimum."""


class ConsensusFailure(CircleFieldError):
    """RANSAC could not reach the required inlier ratio."""


class InsufficientEvidence(CircleFieldError):
    """Detection contents support none of the derivation cases."""


# --- metrics ---------------------------------------------------------------------

class NoCompletePairs(CircleFieldError):
    """No opposed pair was complete enough to audit."""
