/**
 * My Health page model: diary composer, timeline (API order), health plan,
 * and the account statement (view-only; payment is not offered).
 */
import { ApiClient, EmrEntry } from "../api.js";

export interface MyHealthModel {
  timeline: EmrEntry[];
  plan: EmrEntry | null;
  statement: { line_items: unknown[]; balance: number };
  error: string | null;
}

export async function buildMyHealth(api: ApiClient): Promise<MyHealthModel> {
  try {
    const [timeline, plan, statement] = await Promise.all([
      api.timeline(),
      api.plan(),
      api.account(),
    ]);
    return { timeline, plan, statement, error: null };
  } catch (err) {
    return {
      timeline: [],
      plan: null,
      statement: { line_items: [], balance: 0 },
      error: String(err),
    };
  }
}

export async function recordDiaryEntry(
  api: ApiClient,
  submodule: "HB" | "EX" | "SE",
  occurredAt: string,
  metrics: Record<string, number>,
  note: string,
  details: Record<string, string> = {},
) {
  return api.recordEntry({
    submodule,
    occurred_at: occurredAt,
    metrics,
    note,
    details,
  });
}
