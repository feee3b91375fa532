"""Exact sum-of-squares tools for certifying convexity and sos-convexity of polynomials."""

from .polycore import PolyMatrix, Polynomial, hessian, parse_polynomial
from .grambasis import GramCertificate, MonomialBasis, verify_certificate
from .convexcert import SeparationCertificate, is_sos_convex, verify_separation

__version__ = "0.1.0"
