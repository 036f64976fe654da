/**
 * Page controllers: each one drives exactly one gateway orchestration
 * operation (or a read composition) and returns the data its view renders.
 * The e2e suite exercises these directly; the browser shell in app.ts only
 * adds DOM wiring on top.
 */

import {
  AdvertisementCard,
  ApiError,
  ContractAsset,
  GatewayClient,
  MeDocument,
  PaymentDetailsInput,
  PaymentRecord,
  PollResult,
  Proposal,
} from "./api.js";
import { InboxEntry } from "./views/inbox.js";
import { parseAmount } from "./money.js";
import { pollUntil, PollOptions } from "./poll.js";

export interface PublishFormInput {
  kind: string;
  typology?: string;
  address_details: string;
  term: string;
  initial_date: string;
  final_date: string;
  conditions: string;
  rent_amount: string;
  deadline_hours?: string;
}

export async function loadListings(
  client: GatewayClient,
  status: "OPEN" | "all" = "OPEN",
): Promise<AdvertisementCard[]> {
  return client.listAdvertisements(status);
}

export async function publishFlow(client: GatewayClient, form: PublishFormInput) {
  return client.publishAdvertisement({
    property: {
      kind: form.kind as "HOUSE" | "APARTMENT" | "ROOM",
      typology: form.typology || undefined,
      address_details: form.address_details,
    },
    contract: {
      term: form.term as ContractAsset["term"],
      initial_date: form.initial_date,
      final_date: form.final_date,
      conditions: form.conditions,
      rent_amount: parseAmount(form.rent_amount),
    },
    deadline_hours: form.deadline_hours ? Number(form.deadline_hours) : undefined,
  });
}

export async function proposeFlow(client: GatewayClient, advertiseId: string, amountText: string) {
  return client.submitProposal(advertiseId, parseAmount(amountText));
}

/** Proposals across all of the landlord's advertisements, newest listing first. */
export async function loadInbox(client: GatewayClient, userId: string): Promise<InboxEntry[]> {
  const ads = await client.listAdvertisements("all");
  const mine = ads.filter((ad) => ad.contract.landlord_id === userId);
  const entries: InboxEntry[] = [];
  for (const ad of mine) {
    const proposals = await client.evaluate<Proposal[]>("ListProposalsByContract", [
      ad.contract.contract_id,
    ]);
    entries.push({ ad, proposals });
  }
  return entries.reverse();
}

export async function decideFlow(
  client: GatewayClient,
  proposalId: string,
  decision: "ACCEPT" | "REJECT",
  paymentDetails?: PaymentDetailsInput,
) {
  return client.decideProposal(proposalId, decision, paymentDetails);
}

export interface PaymentScreenModel {
  payment: PaymentRecord;
  me: MeDocument;
  acceptedAmount: number;
}

/** Resolve the tenant's payment record for a contract via the chain indexes. */
export async function loadPaymentScreen(
  client: GatewayClient,
  contractId: string,
): Promise<PaymentScreenModel> {
  const paymentId = await client.evaluate<string>("ReadAsset", [`contractpay:${contractId}`]);
  const payment = await client.evaluate<PaymentRecord>("ReadAsset", [`payment:${paymentId}`]);
  const me = await client.getMe();
  return { payment, me, acceptedAmount: payment.amount };
}

export async function payFlow(client: GatewayClient, paymentId: string) {
  return client.payInstallment(paymentId);
}

/** Poll the gateway until the payment stops being PENDING on the network. */
export async function trackConfirmation(
  client: GatewayClient,
  paymentId: string,
  options: PollOptions = {},
): Promise<PollResult> {
  return pollUntil(async () => {
    const result = await client.pollPayment(paymentId);
    const firstPending = result.installments.some(
      (s) => s.status === "PENDING" && s.network_tx_id,
    );
    return firstPending ? null : result;
  }, options);
}

export async function loadContractStatus(
  client: GatewayClient,
  userId: string,
): Promise<ContractAsset[]> {
  return client.evaluate<ContractAsset[]>("ListAssetsByOwner", [userId, "contract"]);
}

export interface DeleteOutcome {
  ok: boolean;
  code?: string;
  message?: string;
  removedKeys?: string[];
}

/** DELETE /me; constraint refusals come back as data for the banner. */
export async function deleteAccountFlow(client: GatewayClient): Promise<DeleteOutcome> {
  try {
    const report = await client.deleteMe();
    return { ok: true, removedKeys: report.removed_keys };
  } catch (error) {
    if (error instanceof ApiError && error.status === 409) {
      return { ok: false, code: error.code, message: error.message };
    }
    throw error;
  }
}
