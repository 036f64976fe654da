"""Residential rental platform on a simulated permissioned ledger.

Landlords and tenants establish digitally signed rental contracts, exchange
proposals, and execute scheduled stablecoin payments. On-chain records stay
auditable forever; off-chain personal data is encrypted at rest and erasable.
"""

__version__ = "0.1.0"
