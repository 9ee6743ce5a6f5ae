"""Permissioned consortium ledger for auditable financial-aid distribution."""

__version__ = "0.1.0"
