/** Payment screen: connect the simulated wallet, pay, and watch confirmation. */

import { Installment, PaymentRecord, WalletInfo } from "../api.js";
import { formatAmount } from "../money.js";
import { html, raw } from "./html.js";

function renderInstallment(installment: Installment, index: number): string {
  const due = installment.due_at ? `due ${installment.due_at.slice(0, 10)}` : "scheduled";
  const tx = installment.network_tx_id ? ` · tx ${installment.network_tx_id}` : "";
  return html`<li class="installment status-${installment.status.toLowerCase()}">
    #${index} ${installment.status} (${due})${tx}
  </li>`;
}

export function renderWalletPanel(wallet: WalletInfo | undefined, connected: boolean): string {
  if (!wallet) {
    return `<div class="wallet">No wallet on record for this account.</div>`;
  }
  if (!connected) {
    return html`<div class="wallet">
      <button data-action="connect-wallet">Connect wallet</button>
    </div>`;
  }
  const balances = Object.entries(wallet.balances)
    .map(([token, amount]) => `${formatAmount(amount, token)}`)
    .join(" · ");
  return html`<div class="wallet wallet-connected" data-address="${wallet.address}">
    Connected ${wallet.address.slice(0, 10)}… (${balances})
  </div>`;
}

/**
 * The amount field is read-only by design: it always mirrors the accepted
 * proposal's amount, never user input.
 */
export function renderPaymentPanel(
  payment: PaymentRecord,
  wallet: WalletInfo | undefined,
  walletConnected: boolean,
): string {
  const payable = payment.statuses.some(
    (s) => s.status === "PENDING" && s.due_at && !s.network_tx_id,
  );
  const installments = payment.statuses.map(renderInstallment).join("");
  return html`<section class="page payment" data-payment="${payment.payment_id}">
    <h2>Rent payment</h2>
    ${raw(renderWalletPanel(wallet, walletConnected))}
    <label>Amount
      <input name="amount" value="${formatAmount(payment.amount)}" readonly disabled />
    </label>
    <label>Stablecoin <input name="token" value="${payment.token}" readonly disabled /></label>
    <label>Recipient
      <input name="recipient" value="${payment.recipient_address}" readonly disabled />
    </label>
    <p>First payment deadline: ${payment.first_payment_expires_at}</p>
    <ul class="installments">${raw(installments)}</ul>
    ${raw(
      payable && walletConnected
        ? html`<button data-action="pay" data-payment="${payment.payment_id}">
            Submit payment</button>`
        : `<span class="muted">nothing payable right now</span>`,
    )}
    <button data-action="poll" data-payment="${payment.payment_id}">Check confirmation</button>
  </section>`;
}
