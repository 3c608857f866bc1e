"""Exception types shared across the toolkit."""


class AuthGraphError(Exception):
    """Base class for all toolkit errors."""


class MalformedRecord(AuthGraphError):
    """A log row that cannot be turned into a valid record."""


class IoError(AuthGraphError):
    """Unreadable or unwritable file; the only condition mapped to a nonzero exit."""


class UnknownNode(AuthGraphError):
    """A node id that does not exist in the graph."""


class VersionMismatch(AuthGraphError):
    """Persisted file has an unsupported format version."""


class ChecksumMismatch(AuthGraphError):
    """Persisted file failed its trailing checksum."""


class ShapeMismatch(AuthGraphError):
    """Tensor operands with incompatible shapes; message carries both shapes."""


class NotScalar(AuthGraphError):
    """backward() called on a non-scalar tensor."""


class EmptyClass(AuthGraphError):
    """A label class has too few samples to populate every split."""


class NonFiniteLoss(AuthGraphError):
    """Training loss became NaN/inf; message carries the offending batch id."""


class SingleClass(AuthGraphError):
    """AUC requested but scores contain only one label class."""


class InsufficientHosts(AuthGraphError):
    """The device pool cannot supply a distinct lateral-movement path."""


class ConfigError(AuthGraphError):
    """Invalid configuration value or combination."""
