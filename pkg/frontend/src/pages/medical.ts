/**
 * Medical Record page model: chronological EMR (API order), grant
 * management, and the appointment / refill / referral request panel.
 *
 * Button availability mirrors server answers only: a refill button is
 * disabled exactly when the prescription has no refills left, and a
 * forbidden record view renders as a forbidden flag rather than a crash.
 */
import { ApiClient, ApiError, CareRequest, EmrEntry, Grant } from "../api.js";

export interface RefillButton {
  prescription: string;
  drug: string;
  enabled: boolean;
  reason: string | null;
}

export interface MedicalRecordModel {
  patient: string;
  entries: EmrEntry[];
  grants: Grant[];
  requests: CareRequest[];
  refillButtons: RefillButton[];
  forbidden: boolean;
  error: string | null;
}

export async function buildMedicalRecord(
  api: ApiClient,
  patient: string,
): Promise<MedicalRecordModel> {
  try {
    const entries = await api.emr(patient);
    const [grants, requests] = await Promise.all([
      api.grants(patient).catch(() => [] as Grant[]),
      api.requests({ patient }).catch(() => [] as CareRequest[]),
    ]);
    const refillButtons = entries
      .filter((e) => e.submodule === "EP")
      .map((e) => {
        const remaining = Number(e.payload["refills_remaining"] ?? 0);
        return {
          prescription: e.id,
          drug: String(e.payload["drug"] ?? ""),
          enabled: remaining > 0,
          reason: remaining > 0 ? null : "no refills remaining",
        };
      });
    return {
      patient,
      entries,
      grants,
      requests,
      refillButtons,
      forbidden: false,
      error: null,
    };
  } catch (err) {
    const forbidden = err instanceof ApiError && err.status === 403;
    return {
      patient,
      entries: [],
      grants: [],
      requests: [],
      refillButtons: [],
      forbidden,
      error: forbidden ? null : String(err),
    };
  }
}

export async function grantTrustedDoctor(
  api: ApiClient,
  patient: string,
  clinician: string,
  scope: string[] = ["XM", "EP", "TM", "RS"],
): Promise<Grant> {
  return api.grantAccess(patient, clinician, scope);
}

export async function revokeGrant(
  api: ApiClient,
  patient: string,
  grantId: string,
): Promise<Grant> {
  return api.revokeGrant(patient, grantId);
}

export async function bookAppointment(
  api: ApiClient,
  slotStart: string,
  slotEnd: string,
): Promise<CareRequest> {
  return api.submitRequest("Appointment", { slot: `${slotStart}/${slotEnd}` });
}

export async function requestRefill(
  api: ApiClient,
  prescription: string,
): Promise<CareRequest> {
  return api.submitRequest("Refill", { prescription });
}

export async function requestReferral(
  api: ApiClient,
  specialty: string,
): Promise<CareRequest> {
  return api.submitRequest("Referral", { specialty });
}
