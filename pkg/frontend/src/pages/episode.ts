/**
 * Episode board: a stage stepper with a loop badge, forms for each stage's
 * payload, and a read-only view once the episode closes. Stage names render
 * exactly as the API reports them; illegal moves surface the server error
 * verbatim.
 */
import { ApiClient, ApiError, Episode } from "../api.js";

export const STAGES = [
  "ProblemFinding",
  "ProblemSolving",
  "Choice",
  "Execution",
  "Evaluation",
] as const;

export interface EpisodeBoardModel {
  episode: Episode | null;
  stepper: { stage: string; current: boolean }[];
  cycleBadge: number;
  closed: boolean;
  report: Record<string, unknown> | null;
  inlineError: string | null;
  forbidden: boolean;
}

export async function buildEpisodeBoard(
  api: ApiClient,
  episodeId: string,
): Promise<EpisodeBoardModel> {
  try {
    const report = await api.episodeReport(episodeId);
    const episodes = await api.episodes(String(report["patient"]));
    const episode = episodes.find((e) => e.id === episodeId) ?? null;
    const stage = episode?.stage ?? "ProblemFinding";
    return {
      episode,
      stepper: STAGES.map((s) => ({ stage: s, current: s === stage })),
      cycleBadge: episode?.cycle_count ?? 1,
      closed: stage === "Closed",
      report,
      inlineError: null,
      forbidden: false,
    };
  } catch (err) {
    const forbidden = err instanceof ApiError && err.status === 403;
    return {
      episode: null,
      stepper: STAGES.map((s) => ({ stage: s, current: false })),
      cycleBadge: 1,
      closed: false,
      report: null,
      inlineError: forbidden ? null : String(err),
      forbidden,
    };
  }
}

/**
 * Submit one stage advance. Server rejections come back as the inline
 * error for the form, never as a crash.
 */
export async function advance(
  api: ApiClient,
  episodeId: string,
  toStage: string,
  payload: unknown,
): Promise<{ episode: Episode | null; inlineError: string | null }> {
  try {
    const episode = await api.advanceEpisode(episodeId, toStage, payload);
    return { episode, inlineError: null };
  } catch (err) {
    if (err instanceof ApiError) {
      return { episode: null, inlineError: `${err.error}: ${err.detail}` };
    }
    return { episode: null, inlineError: String(err) };
  }
}
