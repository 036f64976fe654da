/**
 * Typed client for the gateway HTTP API. Every mutation the UI performs goes
 * through one of these methods; there is no other write path.
 */

export interface PersonalData {
  name?: string;
  email?: string;
  contact?: string;
  identification?: string;
}

export interface PropertyDetails {
  kind: "HOUSE" | "APARTMENT" | "ROOM";
  typology?: string;
  address_details: string;
}

export interface ContractDetails {
  term: "FIXED_TERM" | "MONTH_TO_MONTH" | "SHORT_TERM" | "ROOM";
  initial_date: string;
  final_date: string;
  conditions: string;
  rent_amount: number;
}

export interface ContractAsset extends ContractDetails {
  contract_id: string;
  property_id: string;
  landlord_id: string;
  tenant_id: string | null;
  status: "DRAFT_PUBLISHED" | "AWAITING_PAYMENT" | "ACTIVE" | "ENDED";
  locked: boolean;
  accepted_proposal_id: string | null;
  landlord_signature?: unknown;
  tenant_signature?: unknown;
}

export interface AdvertisementCard {
  advertise_id: string;
  status: "OPEN" | "LOCKED" | "CLOSED";
  photo_refs: string[];
  property: PropertyDetails & { property_id: string; landlord_id: string };
  contract: ContractAsset;
}

export interface Proposal {
  proposal_id: string;
  contract_id: string;
  tenant_id: string;
  amount: number;
  status: "PENDING" | "ACCEPTED" | "REJECTED";
}

export interface Installment {
  status: "PENDING" | "CONFIRMED" | "EXPIRED";
  network_tx_id: string | null;
  due_at: string | null;
}

export interface PaymentRecord {
  payment_id: string;
  contract_id: string;
  amount: number;
  token: "USDC" | "USDT";
  recipient_address: string;
  sender_address: string | null;
  tenant_id: string;
  landlord_id: string;
  first_payment_expires_at: string;
  statuses: Installment[];
  final_date: string;
}

export interface WalletInfo {
  address: string;
  balances: Record<string, number>;
}

export interface MeDocument {
  user_id: string;
  personal: PersonalData;
  app_attributes: Record<string, unknown>;
  wallet?: WalletInfo;
}

export interface PaymentDetailsInput {
  token: "USDC" | "USDT";
  recipient_address: string;
  deadline_hours?: number;
}

export interface PollResult {
  payment_id: string;
  mutated: boolean;
  contract_status: ContractAsset["status"];
  installments: Installment[];
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

export class GatewayClient {
  token: string | null = null;

  constructor(public baseUrl: string) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (path !== "/auth/token") {
      if (!this.token) throw new ApiError(0, "NO_SESSION", "log in before calling the API");
      headers["Authorization"] = `Bearer ${this.token}`;
    }
    const response = await fetch(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    const data = text ? JSON.parse(text) : {};
    if (!response.ok) {
      throw new ApiError(response.status, data.error ?? "HTTP_ERROR", data.message ?? text);
    }
    return data as T;
  }

  async issueToken(userId: string, ttlSeconds = 86400): Promise<string> {
    const data = await this.request<{ token: string }>("POST", "/auth/token", {
      user_id: userId,
      ttl_seconds: ttlSeconds,
    });
    return data.token;
  }

  signup(): Promise<{ user_id: string }> {
    return this.request("POST", "/signup");
  }

  login(): Promise<{ user_id: string; status: string }> {
    return this.request("POST", "/login");
  }

  evaluate<T = unknown>(functionName: string, args: string[]): Promise<T> {
    return this.request<{ result: T }>("POST", "/evaluate", {
      function: functionName,
      args,
    }).then((data) => data.result);
  }

  listAdvertisements(status: "OPEN" | "all" = "OPEN"): Promise<AdvertisementCard[]> {
    return this.request<{ advertisements: AdvertisementCard[] }>(
      "GET",
      `/advertisements?status=${status}`,
    ).then((data) => data.advertisements);
  }

  publishAdvertisement(input: {
    property: PropertyDetails;
    contract: ContractDetails;
    photos?: string[];
    deadline_hours?: number;
  }): Promise<{ advertise_id: string; property_id: string; contract_id: string }> {
    return this.request("POST", "/advertisements", input);
  }

  submitProposal(advertiseId: string, amount: number): Promise<{ proposal_id: string }> {
    return this.request("POST", `/advertisements/${advertiseId}/proposals`, { amount });
  }

  decideProposal(
    proposalId: string,
    decision: "ACCEPT" | "REJECT",
    paymentDetails?: PaymentDetailsInput,
  ): Promise<{ proposal_id: string; status: string; payment_id?: string }> {
    return this.request("POST", `/proposals/${proposalId}/decision`, {
      decision,
      payment_details: paymentDetails,
    });
  }

  payInstallment(paymentId: string): Promise<{ tx_id: string; installment_index: number }> {
    return this.request("POST", `/payments/${paymentId}/pay`);
  }

  pollPayment(paymentId: string): Promise<PollResult> {
    return this.request("POST", `/payments/${paymentId}/poll`);
  }

  getMe(): Promise<MeDocument> {
    return this.request("GET", "/me");
  }

  updateMe(personal: PersonalData): Promise<MeDocument> {
    return this.request("PUT", "/me", { personal });
  }

  exportMe(): Promise<Record<string, unknown>> {
    return this.request("GET", "/me/export");
  }

  deleteMe(): Promise<{ removed_keys: string[] }> {
    return this.request("DELETE", "/me");
  }

  /** Ops/testing helper: move the platform's simulated clock forward. */
  advanceTime(seconds: number): Promise<{ now: string }> {
    return this.request("POST", "/admin/time/advance", { seconds });
  }
}
