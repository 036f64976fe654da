/** Listings page: advertisement cards plus the proposal form. */

import { AdvertisementCard } from "../api.js";
import { formatAmount } from "../money.js";
import { html, raw } from "./html.js";

function termLabel(term: string): string {
  return term.toLowerCase().replaceAll("_", "-");
}

export function renderAdvertisementCard(card: AdvertisementCard, currentUserId: string): string {
  const isOwn = card.contract.landlord_id === currentUserId;
  const proposable = card.status === "OPEN" && !isOwn;
  // a locked or closed advertisement is never proposable from the UI
  const action = proposable
    ? html`<button data-action="open-proposal" data-ad="${card.advertise_id}">
        Submit proposal</button>`
    : html`<span class="muted">${isOwn ? "your listing" : card.status.toLowerCase()}</span>`;
  return html`<article class="card ad-card" data-ad="${card.advertise_id}"
      data-status="${card.status}">
    <h3>${card.property.address_details}</h3>
    <p>${card.property.kind}${card.property.typology ? ` · ${card.property.typology}` : ""}
      · ${termLabel(card.contract.term)}</p>
    <p>${card.contract.initial_date} → ${card.contract.final_date}</p>
    <p class="rent">${formatAmount(card.contract.rent_amount)} asking rent</p>
    <p class="conditions">${card.contract.conditions}</p>
    ${raw(action)}
  </article>`;
}

export function renderListings(cards: AdvertisementCard[], currentUserId: string): string {
  if (cards.length === 0) {
    return `<section class="page listings"><p class="muted">No advertisements yet.</p></section>`;
  }
  const items = cards.map((card) => renderAdvertisementCard(card, currentUserId)).join("\n");
  return `<section class="page listings">${items}</section>`;
}

export function renderProposalForm(card: AdvertisementCard): string {
  return html`<form class="proposal-form" data-ad="${card.advertise_id}">
    <h3>Propose on ${card.property.address_details}</h3>
    <p>Asking ${formatAmount(card.contract.rent_amount)}; submitting signs the
      contract terms with your identity.</p>
    <label>Your monthly amount
      <input name="amount" inputmode="decimal" placeholder="e.g. 850" required />
    </label>
    <button data-action="submit-proposal" data-ad="${card.advertise_id}">Sign and submit</button>
  </form>`;
}
