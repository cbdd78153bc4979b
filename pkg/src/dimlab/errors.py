"""Exception taxonomy shared across the package.

Two families matter to callers: problems with the data handed in
(`InputError`, CLI exit code 2) and honest mathematical failures detected
while running a construction (`CertificateError`, CLI exit code 1).
"""


class DimlabError(Exception):
    """Base class for every error raised by this package."""


class InputError(DimlabError):
    """Malformed input or a violated precondition, named where possible."""


class CertificateError(DimlabError):
    """A certified claim failed; the message carries a concrete witness."""


class GeneralPositionError(CertificateError):
    """A required affine-independence condition could not be met."""
