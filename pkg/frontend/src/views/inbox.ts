/** Landlord inbox: proposals per advertisement with accept/reject actions. */

import { AdvertisementCard, Proposal } from "../api.js";
import { formatAmount } from "../money.js";
import { html, raw } from "./html.js";

export interface InboxEntry {
  ad: AdvertisementCard;
  proposals: Proposal[];
}

function renderProposalRow(proposal: Proposal): string {
  const actions =
    proposal.status === "PENDING"
      ? html`<button data-action="accept" data-proposal="${proposal.proposal_id}">Accept</button>
        <button data-action="reject" data-proposal="${proposal.proposal_id}">Reject</button>`
      : html`<span class="status-${proposal.status.toLowerCase()}">${proposal.status}</span>`;
  return html`<li class="proposal-row" data-proposal="${proposal.proposal_id}">
    ${proposal.tenant_id} offers ${formatAmount(proposal.amount)} ${raw(actions)}
  </li>`;
}

export function renderLandlordInbox(entries: InboxEntry[]): string {
  if (entries.length === 0) {
    return `<section class="page inbox"><p class="muted">No proposals on your listings.</p></section>`;
  }
  const blocks = entries
    .map(
      (entry) => html`<article class="card inbox-entry" data-ad="${entry.ad.advertise_id}">
        <h3>${entry.ad.property.address_details} (${entry.ad.status})</h3>
        <ul>${raw(entry.proposals.map(renderProposalRow).join("") || "<li class='muted'>none yet</li>")}</ul>
      </article>`,
    )
    .join("\n");
  return `<section class="page inbox">${blocks}</section>`;
}

export function renderAcceptForm(proposal: Proposal, walletAddress: string): string {
  return html`<form class="accept-form" data-proposal="${proposal.proposal_id}">
    <h3>Accept ${formatAmount(proposal.amount)} from ${proposal.tenant_id}</h3>
    <label>Stablecoin
      <select name="token"><option>USDC</option><option>USDT</option></select>
    </label>
    <label>Your network address
      <input name="recipient_address" value="${walletAddress}" required />
    </label>
    <label>Payment time limit (hours) <input name="deadline_hours" value="48" /></label>
    <button data-action="confirm-accept" data-proposal="${proposal.proposal_id}">
      Accept and send payment details</button>
  </form>`;
}
