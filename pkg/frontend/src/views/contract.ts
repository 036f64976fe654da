/** Contract status view: lifecycle state and signature presence per contract. */

import { ContractAsset } from "../api.js";
import { formatAmount } from "../money.js";
import { html, raw } from "./html.js";

function signatureBadge(label: string, present: boolean): string {
  return html`<span class="badge ${present ? "badge-ok" : "badge-missing"}">
    ${label} ${present ? "signed" : "pending"}</span>`;
}

export function renderContractStatus(contracts: ContractAsset[]): string {
  if (contracts.length === 0) {
    return `<section class="page contracts"><p class="muted">No contracts yet.</p></section>`;
  }
  const rows = contracts
    .map(
      (contract) => html`<article class="card contract-card"
        data-contract="${contract.contract_id}" data-status="${contract.status}">
        <h3>${contract.contract_id}</h3>
        <p class="status status-${contract.status.toLowerCase()}">${contract.status}</p>
        <p>${contract.initial_date} → ${contract.final_date}
          · ${formatAmount(contract.rent_amount)}</p>
        <p>landlord ${contract.landlord_id}
          ${raw(contract.tenant_id ? html`· tenant ${contract.tenant_id}` : "")}</p>
        ${raw(signatureBadge("landlord", Boolean(contract.landlord_signature)))}
        ${raw(signatureBadge("tenant", Boolean(contract.tenant_signature)))}
      </article>`,
    )
    .join("\n");
  return `<section class="page contracts">${rows}</section>`;
}
