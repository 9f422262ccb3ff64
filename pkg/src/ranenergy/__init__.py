"""ranenergy package bootstrap."""

__all__: list[str] = []
