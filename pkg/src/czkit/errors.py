"""Exception type shared by every czkit module."""

# error codes that signal bad input rather than a failed computation
VALIDATION_CODES = frozenset({
    "disconnected",
    "invalid-measure",
    "invalid-grid",
    "invalid-exponent",
    "invalid-exponents",
    "invalid-time",
    "invalid-scale",
    "invalid-spec",
    "degenerate-input",
    "degenerate-probes",
    "degenerate-threshold",
    "empty-omega",
    "threshold-too-small",
    "missing-section",
    "schema-mismatch",
})


class CZKitError(Exception):
    """Error carrying a short machine-readable ``code``.

    Parameters
    ----------
    code : str
        One of the documented error codes, e.g. ``"disconnected"``.
    message : str, optional
        Human readable detail.
    """

    def __init__(self, code, message=None, **details):
        self.code = code
        self.details = details
        super().__init__(f"{code}: {message}" if message else code)

    @property
    def is_validation(self):
        return self.code in VALIDATION_CODES
