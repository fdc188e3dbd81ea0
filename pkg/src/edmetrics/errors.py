"""Exception types shared across the package."""


class InputError(ValueError):
    """Invalid user-supplied data: bad files, malformed manifests, out-of-range values."""


class ManifestError(InputError):
    """Manifest document is missing, unparsable, or violates its invariants."""


class FeatureFileError(InputError):
    """Feature file is missing, corrupt, or inconsistent with the manifest."""
