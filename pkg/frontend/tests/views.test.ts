/** Renderer unit tests: UI invariants hold at the markup level. */

import { describe, expect, it } from "vitest";

import { AdvertisementCard, PaymentRecord } from "../src/api.js";
import { formatAmount, parseAmount, MICRO } from "../src/money.js";
import { escapeHtml, html, raw } from "../src/views/html.js";
import { renderAdvertisementCard, renderListings } from "../src/views/listings.js";
import { renderPaymentPanel } from "../src/views/payment.js";
import { renderDeleteConstraint } from "../src/views/profile.js";
import { renderContractStatus } from "../src/views/contract.js";

function card(overrides: Partial<AdvertisementCard> = {}): AdvertisementCard {
  return {
    advertise_id: "ad-1",
    status: "OPEN",
    photo_refs: [],
    property: {
      property_id: "p1",
      landlord_id: "lana",
      kind: "APARTMENT",
      typology: "T2",
      address_details: "Rua A 1",
    },
    contract: {
      contract_id: "c1",
      property_id: "p1",
      landlord_id: "lana",
      tenant_id: null,
      term: "FIXED_TERM",
      initial_date: "2024-01-15",
      final_date: "2024-04-15",
      conditions: "no pets",
      rent_amount: 900 * MICRO,
      status: "DRAFT_PUBLISHED",
      locked: false,
      accepted_proposal_id: null,
    },
    ...overrides,
  };
}

describe("money", () => {
  it("formats and parses micro-units", () => {
    expect(formatAmount(900 * MICRO)).toBe("900.00");
    expect(formatAmount(1_500_000, "USDC")).toBe("1.50 USDC");
    expect(parseAmount("850")).toBe(850 * MICRO);
    expect(parseAmount("1,250.25")).toBe(1_250_250_000);
    expect(() => parseAmount("-3")).toThrow();
    expect(() => parseAmount("rent")).toThrow();
  });
});

describe("html helpers", () => {
  it("escapes interpolations unless marked raw", () => {
    const markup = html`<p>${"<script>alert(1)</script>"}</p>`;
    expect(markup).toBe("<p>&lt;script&gt;alert(1)&lt;/script&gt;</p>");
    expect(html`<p>${raw("<b>x</b>")}</p>`).toBe("<p><b>x</b></p>");
    expect(escapeHtml(`"quotes"`)).toBe("&quot;quotes&quot;");
  });
});

describe("listings", () => {
  it("offers a proposal action only on open, foreign advertisements", () => {
    const open = renderAdvertisementCard(card(), "toni");
    expect(open).toContain('data-action="open-proposal"');
  });

  it("never makes a locked advertisement proposable", () => {
    const locked = renderAdvertisementCard(card({ status: "LOCKED" }), "toni");
    expect(locked).not.toContain("open-proposal");
    expect(locked).toContain("locked");
    const closed = renderAdvertisementCard(card({ status: "CLOSED" }), "toni");
    expect(closed).not.toContain("open-proposal");
  });

  it("hides the proposal action on the landlord's own listing", () => {
    const own = renderAdvertisementCard(card(), "lana");
    expect(own).not.toContain("open-proposal");
    expect(own).toContain("your listing");
  });

  it("renders an empty state", () => {
    expect(renderListings([], "toni")).toContain("No advertisements yet");
  });
});

describe("payment panel", () => {
  const payment: PaymentRecord = {
    payment_id: "pay-1",
    contract_id: "c1",
    amount: 850 * MICRO,
    token: "USDC",
    recipient_address: "scabc",
    sender_address: null,
    tenant_id: "toni",
    landlord_id: "lana",
    first_payment_expires_at: "2024-01-03T00:00:00+00:00",
    statuses: [{ status: "PENDING", network_tx_id: null, due_at: "2024-01-01T00:00:00+00:00" }],
    final_date: "2024-04-15",
  };
  const wallet = { address: "scwallet123456", balances: { USDC: 10 * MICRO, USDT: 0 } };

  it("shows the accepted amount as read-only", () => {
    const markup = renderPaymentPanel(payment, wallet, true);
    expect(markup).toContain('value="850.00" readonly disabled');
    expect(markup).toContain('data-action="pay"');
  });

  it("requires a connected wallet before paying", () => {
    const markup = renderPaymentPanel(payment, wallet, false);
    expect(markup).toContain('data-action="connect-wallet"');
    expect(markup).not.toContain('data-action="pay"');
  });

  it("offers no pay action once nothing is payable", () => {
    const paid: PaymentRecord = {
      ...payment,
      statuses: [{ status: "CONFIRMED", network_tx_id: "tx-1", due_at: "2024-01-01" }],
    };
    const markup = renderPaymentPanel(paid, wallet, true);
    expect(markup).not.toContain('data-action="pay"');
    expect(markup).toContain("nothing payable");
  });
});

describe("profile constraint banner", () => {
  it("renders gateway error codes verbatim", () => {
    const markup = renderDeleteConstraint(
      "ACTIVE_CONTRACT_CONSTRAINT",
      "user is involved in an ongoing rental contract",
    );
    expect(markup).toContain('data-error-code="ACTIVE_CONTRACT_CONSTRAINT"');
    expect(markup).toContain("ACTIVE_CONTRACT_CONSTRAINT");
    expect(markup).toContain("ongoing rental contract");
  });
});

describe("contract status", () => {
  it("shows lifecycle state and signature badges", () => {
    const contract = card().contract;
    const active = {
      ...contract,
      status: "ACTIVE" as const,
      tenant_id: "toni",
      landlord_signature: {},
      tenant_signature: {},
    };
    const markup = renderContractStatus([active]);
    expect(markup).toContain('data-status="ACTIVE"');
    expect(markup).toContain("landlord signed");
    expect(markup).toContain("tenant signed");
    const draft = renderContractStatus([{ ...contract, landlord_signature: {} }]);
    expect(draft).toContain("tenant pending");
  });
});
