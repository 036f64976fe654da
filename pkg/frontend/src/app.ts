/**
 * Browser shell: a hash router over the page renderers plus event wiring.
 * All state changes go through the flow controllers, never direct fetches.
 */

import { ApiError, GatewayClient } from "./api.js";
import * as flows from "./flows.js";
import { loginFlow, SessionState } from "./session.js";
import { errorBanner, escapeHtml, infoBanner } from "./views/html.js";
import { renderContractStatus } from "./views/contract.js";
import { renderAcceptForm, renderLandlordInbox } from "./views/inbox.js";
import { renderListings, renderProposalForm } from "./views/listings.js";
import { renderPaymentPanel } from "./views/payment.js";
import { renderDeleteConstraint, renderDeletionReport, renderProfile } from "./views/profile.js";
import { renderPublishWizard } from "./views/publish.js";

const client = new GatewayClient(
  (window as { RENTCHAIN_API?: string }).RENTCHAIN_API ?? "http://127.0.0.1:8430",
);
let session: SessionState | null = null;
let walletConnected = false;

const app = () => document.getElementById("app")!;
const flash = (markup: string) => {
  const zone = document.getElementById("flash")!;
  zone.innerHTML = markup;
  setTimeout(() => (zone.innerHTML = ""), 6000);
};

function renderLogin(): string {
  return `<section class="page login">
    <h2>Sign in</h2>
    <p>Authenticate through the platform's authorization provider.</p>
    <form id="login-form">
      <label>Provider user id <input name="userId" required /></label>
      <button data-action="login">Sign in</button>
    </form>
  </section>`;
}

const routes: Record<string, () => Promise<string> | string> = {
  "#/listings": async () =>
    renderListings(await flows.loadListings(client), session?.userId ?? ""),
  "#/publish": () => renderPublishWizard(),
  "#/inbox": async () => renderLandlordInbox(await flows.loadInbox(client, session!.userId)),
  "#/contracts": async () =>
    renderContractStatus(await flows.loadContractStatus(client, session!.userId)),
  "#/profile": async () => renderProfile(await client.getMe()),
};

async function navigate(): Promise<void> {
  if (!session) {
    app().innerHTML = renderLogin();
    return;
  }
  const route = routes[window.location.hash] ?? routes["#/listings"]!;
  try {
    app().innerHTML = await route();
  } catch (error) {
    app().innerHTML = describeError(error);
  }
}

function describeError(error: unknown): string {
  if (error instanceof ApiError) return errorBanner(error.code, error.message);
  return errorBanner("UNEXPECTED", String(error));
}

function formValues(form: HTMLFormElement): Record<string, string> {
  const data = new FormData(form);
  const out: Record<string, string> = {};
  data.forEach((value, key) => (out[key] = String(value)));
  return out;
}

async function openPaymentScreen(contractId: string): Promise<void> {
  const model = await flows.loadPaymentScreen(client, contractId);
  app().innerHTML = renderPaymentPanel(model.payment, model.me.wallet, walletConnected);
}

const actions: Record<string, (target: HTMLElement) => Promise<void>> = {
  async login(target) {
    const form = target.closest("form") as HTMLFormElement;
    const userId = formValues(form)["userId"] ?? "";
    session = await loginFlow(client, userId);
    flash(infoBanner(`Signed in as ${escapeHtml(userId)}`));
    await navigate();
  },
  async publish(target) {
    const form = document.getElementById("publish-form") as HTMLFormElement;
    const ids = await flows.publishFlow(client, formValues(form) as unknown as flows.PublishFormInput);
    flash(infoBanner(`Published advertisement ${escapeHtml(ids.advertise_id)}`));
    window.location.hash = "#/listings";
  },
  async "open-proposal"(target) {
    const adId = target.dataset["ad"]!;
    const cards = await flows.loadListings(client);
    const card = cards.find((c) => c.advertise_id === adId);
    if (card) app().insertAdjacentHTML("beforeend", renderProposalForm(card));
  },
  async "submit-proposal"(target) {
    const form = target.closest("form") as HTMLFormElement;
    const amount = formValues(form)["amount"] ?? "";
    await flows.proposeFlow(client, target.dataset["ad"]!, amount);
    flash(infoBanner("Proposal signed and submitted"));
    await navigate();
  },
  async accept(target) {
    const me = await client.getMe();
    const entries = await flows.loadInbox(client, session!.userId);
    const proposal = entries
      .flatMap((entry) => entry.proposals)
      .find((p) => p.proposal_id === target.dataset["proposal"]);
    if (proposal) {
      app().insertAdjacentHTML("beforeend", renderAcceptForm(proposal, me.wallet?.address ?? ""));
    }
  },
  async "confirm-accept"(target) {
    const form = target.closest("form") as HTMLFormElement;
    const values = formValues(form);
    await flows.decideFlow(client, target.dataset["proposal"]!, "ACCEPT", {
      token: values["token"] as "USDC" | "USDT",
      recipient_address: values["recipient_address"] ?? "",
      deadline_hours: Number(values["deadline_hours"] ?? 48),
    });
    flash(infoBanner("Accepted; payment details sent to the tenant"));
    await navigate();
  },
  async reject(target) {
    await flows.decideFlow(client, target.dataset["proposal"]!, "REJECT");
    flash(infoBanner("Proposal rejected"));
    await navigate();
  },
  async "connect-wallet"() {
    walletConnected = true;
    flash(infoBanner("Wallet connected"));
    await navigate();
  },
  async pay(target) {
    const paymentId = target.dataset["payment"]!;
    await flows.payFlow(client, paymentId);
    flash(infoBanner("Payment submitted; waiting for network confirmation"));
    const result = await flows.trackConfirmation(client, paymentId);
    flash(infoBanner(`Contract is now ${escapeHtml(result.contract_status)}`));
  },
  async poll(target) {
    const result = await client.pollPayment(target.dataset["payment"]!);
    flash(infoBanner(`Contract status: ${escapeHtml(result.contract_status)}`));
  },
  async "save-profile"() {
    const form = document.getElementById("profile-form") as HTMLFormElement;
    await client.updateMe(formValues(form));
    flash(infoBanner("Profile saved"));
  },
  async "export-data"() {
    const data = await client.exportMe();
    const blob = new Blob([JSON.stringify(data, null, 2)], { type: "application/json" });
    const link = document.createElement("a");
    link.href = URL.createObjectURL(blob);
    link.download = "my-rentchain-data.json";
    link.click();
  },
  async "delete-account"() {
    const outcome = await flows.deleteAccountFlow(client);
    if (!outcome.ok) {
      flash(renderDeleteConstraint(outcome.code ?? "", outcome.message ?? ""));
      return;
    }
    flash(renderDeletionReport(outcome.removedKeys ?? []));
    session = null;
    await navigate();
  },
};

document.addEventListener("click", async (event) => {
  const target = (event.target as HTMLElement).closest<HTMLElement>("[data-action]");
  if (!target) return;
  event.preventDefault();
  const action = actions[target.dataset["action"] ?? ""];
  if (!action) return;
  try {
    await action(target);
  } catch (error) {
    flash(describeError(error));
  }
});

document.addEventListener("click", (event) => {
  const card = (event.target as HTMLElement).closest<HTMLElement>(".contract-card");
  if (card?.dataset["contract"]) void openPaymentScreen(card.dataset["contract"]);
});

window.addEventListener("hashchange", () => void navigate());
window.addEventListener("DOMContentLoaded", () => void navigate());
