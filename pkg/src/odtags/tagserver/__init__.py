"""Global tag server: persistent store, RDF export, corpus seeding,
and the REST API."""

from .store import GlobalTag, RelationKind, TagStore

__all__ = ["GlobalTag", "RelationKind", "TagStore"]
