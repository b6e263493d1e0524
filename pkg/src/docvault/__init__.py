"""docvault: store documents under unguessable names, serve them only
through a mediating endpoint, and audit web directories for exposure."""

__version__ = "0.1.0"
