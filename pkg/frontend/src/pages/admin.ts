/**
 * Staff console: MOTD editor (educator), knowledge publishing, the pending
 * request queue with approve / reject / reschedule actions, and the policy
 * editor (admin). What the console shows is whatever the API lets this
 * session see; role gating lives server-side.
 */
import { ApiClient, CareRequest, Motd, Post } from "../api.js";

export interface AdminConsoleModel {
  pendingRequests: CareRequest[];
  policyText: string | null;
  error: string | null;
}

export async function buildAdminConsole(
  api: ApiClient,
): Promise<AdminConsoleModel> {
  let pendingRequests: CareRequest[] = [];
  let policyText: string | null = null;
  let error: string | null = null;
  try {
    pendingRequests = await api.requests({ state: "Pending" });
  } catch (err) {
    error = String(err);
  }
  try {
    policyText = await api.getPolicy();
  } catch {
    policyText = null; // not an admin; the panel simply does not render
  }
  return { pendingRequests, policyText, error };
}

export async function publishKnowledge(
  api: ApiClient,
  body: string,
): Promise<Post> {
  return api.post("KnowledgeItem", body);
}

export async function setPatientMotd(
  api: ApiClient,
  user: string,
  message: string,
  effectiveAt: string,
): Promise<Motd> {
  return api.setMotd(user, message, effectiveAt);
}

export async function decide(
  api: ApiClient,
  requestId: string,
  outcome: "Approved" | "Rejected" | "Rescheduled",
  counterOffer?: string,
): Promise<CareRequest> {
  return api.decideRequest(requestId, outcome, counterOffer);
}
