"""Simulated stablecoin network with a deterministic clock and cron scheduler.

Accounts hold USDC/USDT balances in integer micro-units. Transfers sit
pending for a latency sampled from a seeded distribution and confirm when the
simulated clock passes their confirmation time; balances move atomically at
confirmation, with pending amounts reserved so a sender can never go
negative. The clock only moves through tick(), which also fires the monthly
cron exactly once per month boundary crossed, interleaved with confirmations
in timestamp order.
"""

from __future__ import annotations

import hashlib
import json
import random
import threading
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import Callable, Optional

USDC = "USDC"
USDT = "USDT"
TOKENS = (USDC, USDT)

TX_PENDING = "PENDING"
TX_CONFIRMED = "CONFIRMED"
TX_FAILED = "FAILED"


class PaynetError(Exception):
    code = "PAYNET_ERROR"


class InsufficientFunds(PaynetError):
    code = "INSUFFICIENT_FUNDS"


class UnknownAddress(PaynetError):
    code = "UNKNOWN_ADDRESS"


class UnknownTx(PaynetError):
    code = "UNKNOWN_TX"


class ClockRegression(PaynetError):
    code = "CLOCK_REGRESSION"


class SimClock:
    """Advance-only simulated time."""

    def __init__(self, start: datetime):
        self._now = start
        self._lock = threading.Lock()

    @property
    def now(self) -> datetime:
        return self._now

    def advance_to(self, when: datetime) -> None:
        with self._lock:
            if when < self._now:
                raise ClockRegression(f"cannot move clock back from {self._now} to {when}")
            self._now = when


def month_starts_between(after: datetime, until: datetime) -> list[datetime]:
    """Midnights of the 1st strictly after `after`, up to and including `until`."""
    starts = []
    year, month = after.year, after.month
    candidate = datetime(year, month, 1, tzinfo=after.tzinfo)
    while candidate <= after:
        year, month = (year + 1, 1) if month == 12 else (year, month + 1)
        candidate = datetime(year, month, 1, tzinfo=after.tzinfo)
    while candidate <= until:
        starts.append(candidate)
        year, month = (year + 1, 1) if month == 12 else (year, month + 1)
        candidate = datetime(year, month, 1, tzinfo=after.tzinfo)
    return starts


@dataclass
class TokenTx:
    tx_id: str
    sender: str
    recipient: str
    amount: int
    token: str
    status: str
    submit_time: datetime
    confirm_time: datetime

    def to_dict(self) -> dict:
        return {
            "tx_id": self.tx_id,
            "from": self.sender,
            "to": self.recipient,
            "amount": self.amount,
            "token": self.token,
            "status": self.status,
            "submit_time": self.submit_time.isoformat(),
            "confirm_time": self.confirm_time.isoformat(),
        }


@dataclass
class Wallet:
    """Handle to one account; spending requires holding the wallet."""

    address: str
    network: "StablecoinNetwork" = field(repr=False)

    def submit_transfer(self, to: str, amount: int, token: str) -> str:
        return self.network.submit_transfer(self, to, amount, token)

    def balance(self, token: str) -> int:
        return self.network.balance(self.address, token)


class StablecoinNetwork:
    """Event-ordered state machine over accounts, transfers, and cron fires."""

    def __init__(
        self,
        clock: SimClock,
        seed: int = 7,
        latency_range: tuple[float, float] = (1.0, 60.0),
    ):
        self.clock = clock
        self.rng = random.Random(seed)
        self.latency_range = latency_range
        self._balances: dict[str, dict[str, int]] = {}
        self._reserved: dict[str, dict[str, int]] = {}
        self._txs: dict[str, TokenTx] = {}
        self._cron_callbacks: list[Callable[[datetime], None]] = []
        self._lock = threading.RLock()
        self._tx_seq = 0
        self.events: list[dict] = []

    # -- accounts ---------------------------------------------------------------

    def create_account(self, initial: Optional[dict[str, int]] = None) -> Wallet:
        with self._lock:
            seed_bytes = self.rng.getrandbits(256).to_bytes(32, "big")
            address = "sc" + hashlib.sha256(seed_bytes).hexdigest()[:38]
            self._balances[address] = {t: 0 for t in TOKENS}
            self._reserved[address] = {t: 0 for t in TOKENS}
            for token, amount in (initial or {}).items():
                if token not in TOKENS:
                    raise PaynetError(f"unknown token: {token}")
                self._balances[address][token] = int(amount)
            self._record("account_created", address=address, funding=initial or {})
            return Wallet(address, self)

    def balance(self, address: str, token: str) -> int:
        if address not in self._balances:
            raise UnknownAddress(address)
        return self._balances[address][token]

    def total_supply(self, token: str) -> int:
        return sum(b[token] for b in self._balances.values())

    # -- transfers ----------------------------------------------------------------

    def submit_transfer(self, wallet: Wallet, to: str, amount: int, token: str) -> str:
        with self._lock:
            if token not in TOKENS:
                raise PaynetError(f"unknown token: {token}")
            if amount <= 0:
                raise PaynetError("amount must be positive")
            if to not in self._balances:
                raise UnknownAddress(f"recipient not on network: {to}")
            if wallet.address not in self._balances:
                raise UnknownAddress(f"sender not on network: {wallet.address}")
            available = (
                self._balances[wallet.address][token] - self._reserved[wallet.address][token]
            )
            if amount > available:
                raise InsufficientFunds(
                    f"{amount} {token} exceeds available balance {available}"
                )
            self._tx_seq += 1
            tx_id = f"tx-{self._tx_seq:08d}"
            latency = self.rng.uniform(*self.latency_range)
            now = self.clock.now
            tx = TokenTx(
                tx_id=tx_id,
                sender=wallet.address,
                recipient=to,
                amount=amount,
                token=token,
                status=TX_PENDING,
                submit_time=now,
                confirm_time=now + timedelta(seconds=latency),
            )
            self._txs[tx_id] = tx
            self._reserved[wallet.address][token] += amount
            self._record("tx_submitted", tx=tx.to_dict())
            return tx_id

    def fail_transfer(self, tx_id: str) -> None:
        """Network-level expiry: release the reservation, mark FAILED."""
        with self._lock:
            tx = self._require_tx(tx_id)
            if tx.status != TX_PENDING:
                return
            tx.status = TX_FAILED
            self._reserved[tx.sender][tx.token] -= tx.amount
            self._record("tx_failed", tx=tx.to_dict())

    def get_tx_status(self, tx_id: str) -> str:
        return self._require_tx(tx_id).status

    def get_tx(self, tx_id: str) -> TokenTx:
        return self._require_tx(tx_id)

    def _require_tx(self, tx_id: str) -> TokenTx:
        tx = self._txs.get(tx_id)
        if tx is None:
            raise UnknownTx(tx_id)
        return tx

    # -- time ------------------------------------------------------------------------

    def register_cron(self, callback: Callable[[datetime], None]) -> None:
        """Monthly schedule: fires at midnight on the 1st of each month crossed."""
        self._cron_callbacks.append(callback)

    def tick(self, until: datetime) -> list[dict]:
        """Advance the clock, confirming due transfers and firing cron in order."""
        with self._lock:
            now = self.clock.now
            if until < now:
                raise ClockRegression(f"tick to {until} behind clock {now}")
            confirmations = [
                (tx.confirm_time, 0, tx)
                for tx in self._txs.values()
                if tx.status == TX_PENDING and tx.confirm_time <= until
            ]
            crons = [(when, 1, None) for when in month_starts_between(now, until)]
            fired: list[dict] = []
            for when, kind, tx in sorted(confirmations + crons, key=lambda e: (e[0], e[1])):
                self.clock.advance_to(when)
                if tx is not None:
                    self._confirm(tx)
                    fired.append({"at": when.isoformat(), "event": "tx_confirmed", "tx_id": tx.tx_id})
                else:
                    self._record("cron_fired", at=when.isoformat())
                    fired.append({"at": when.isoformat(), "event": "cron_fired"})
                    for callback in list(self._cron_callbacks):
                        callback(when)
            self.clock.advance_to(until)
            return fired

    def _confirm(self, tx: TokenTx) -> None:
        tx.status = TX_CONFIRMED
        self._reserved[tx.sender][tx.token] -= tx.amount
        self._balances[tx.sender][tx.token] -= tx.amount
        self._balances[tx.recipient][tx.token] += tx.amount
        self._record("tx_confirmed", tx=tx.to_dict())

    # -- diagnostics --------------------------------------------------------------------

    def _record(self, event: str, **payload) -> None:
        self.events.append({"at": self.clock.now.isoformat(), "event": event, **payload})

    def export_trace(self, path: Path) -> None:
        with Path(path).open("w") as fh:
            for event in self.events:
                fh.write(json.dumps(event, sort_keys=True) + "\n")
