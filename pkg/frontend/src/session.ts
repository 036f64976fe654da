/** Session state: one token per browser session, set by the login flow. */

import { GatewayClient } from "./api.js";

export interface SessionState {
  userId: string;
  token: string;
}

/**
 * Sign the user in through the simulated authorization provider: mint a
 * token, register on first use, then run the encrypted-id login check.
 */
export async function loginFlow(client: GatewayClient, userId: string): Promise<SessionState> {
  client.token = await client.issueToken(userId);
  try {
    await client.signup();
  } catch (error) {
    // already registered: signup replays answer 409 and login proceeds
    if (!(error instanceof Error) || (error as { status?: number }).status !== 409) throw error;
  }
  await client.login();
  return { userId, token: client.token };
}

export function logout(client: GatewayClient): void {
  client.token = null;
}
