"""Access to the prompt templates shipped with the package."""

from __future__ import annotations

import hashlib
from importlib import resources


def template_text(filename: str) -> str:
    return (resources.files("ragmark") / "templates" / filename).read_text(
        encoding="utf-8"
    )


def template_checksums() -> dict[str, str]:
    """SHA-256 of every shipped template, recorded into run metadata."""
    root = resources.files("ragmark") / "templates"
    return {
        entry.name: hashlib.sha256(entry.read_bytes()).hexdigest()
        for entry in sorted(root.iterdir(), key=lambda e: e.name)
    }
