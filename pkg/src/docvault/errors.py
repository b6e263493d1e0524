"""Exception hierarchy shared across the vault modules."""


class VaultError(Exception):
    """Base class for all vault failures."""


class InvalidInput(VaultError):
    """A name-derivation input violates its constraints."""


class WeakKey(VaultError):
    """Secret key shorter than the required minimum."""


class PolicyPathMismatch(VaultError):
    """Requested placement policy contradicts the webroot/vault path pair."""


class IoFailure(VaultError):
    """Filesystem operation failed; carries the path and the cause."""

    def __init__(self, path, cause):
        super().__init__(f"{path}: {cause}")
        self.path = str(path)
        self.cause = cause


class ArtifactConflict(VaultError):
    """A protection artifact already exists with different content."""

    def __init__(self, path):
        super().__init__(f"refusing to overwrite {path} (content differs; use force)")
        self.path = str(path)


class StorageFailure(VaultError):
    """Metadata store could not complete an operation."""


class DuplicateOpaqueName(VaultError):
    """A record with this opaque name already exists."""


class NotFound(VaultError):
    """No record matches the given identifier."""


class TooLarge(VaultError):
    """Upload exceeds the configured size limit."""


class BlobMissing(VaultError):
    """A record exists but its blob file is gone (integrity fault)."""


class RangeNotSatisfiable(VaultError):
    """Requested byte range starts at or past the end of the blob."""


class ConfigError(VaultError):
    """Service configuration is invalid or incomplete."""
