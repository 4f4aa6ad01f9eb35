/**
 * End-to-end flows against a live backend: the suite seeds a data
 * directory, boots the HTTP API as a child process, and drives the portal
 * through its own page models and renderers.
 */
import { spawn, spawnSync, ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { login, logout, UiSession } from "../src/session.js";
import { buildDashboard, postStatus } from "../src/pages/dashboard.js";
import {
  bookAppointment,
  buildMedicalRecord,
  grantTrustedDoctor,
  revokeGrant,
} from "../src/pages/medical.js";
import { buildAdminConsole, decide, publishKnowledge } from "../src/pages/admin.js";
import { knowledgeView } from "../src/pages/social.js";
import { buildEpisodeBoard, advance } from "../src/pages/episode.js";
import { renderDashboard, renderMedicalRecord, renderPost } from "../src/render.js";

const HERE = dirname(fileURLToPath(import.meta.url));
const FIXTURES = join(HERE, "..", "..", "src", "clinic2", "service",
                      "fixtures", "seed_demo.txt");

let proc: ChildProcess;
let base: string;
let dataDir: string;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.listen(0, "127.0.0.1", () => {
      const address = srv.address();
      if (address && typeof address === "object") {
        const port = address.port;
        srv.close(() => resolve(port));
      } else {
        reject(new Error("no port"));
      }
    });
  });
}

async function waitHealthy(url: string, timeoutMs = 30000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const resp = await fetch(`${url}/health`);
      if (resp.ok) return;
    } catch {
      await new Promise((r) => setTimeout(r, 200));
    }
  }
  throw new Error("backend did not come up");
}

beforeAll(async () => {
  dataDir = mkdtempSync(join(tmpdir(), "clinic2-e2e-"));
  const seeded = spawnSync(
    "python3",
    ["-m", "clinic2", "seed", "--fixtures", FIXTURES, "--data-dir", dataDir],
    { encoding: "utf-8" },
  );
  if (seeded.status !== 0) {
    throw new Error(`seed failed: ${seeded.stderr}`);
  }
  const port = await freePort();
  base = `http://127.0.0.1:${port}`;
  proc = spawn(
    "python3",
    ["-m", "clinic2", "serve", "--bind", `127.0.0.1:${port}`,
     "--data-dir", dataDir],
    { stdio: "ignore" },
  );
  await waitHealthy(base);
}, 60000);

afterAll(() => {
  proc?.kill("SIGKILL");
  rmSync(dataDir, { recursive: true, force: true });
});

function client(): ApiClient {
  return new ApiClient(base);
}

async function signIn(loginId: string): Promise<[ApiClient, UiSession]> {
  const api = client();
  const session = await login(api, loginId, `pw-${loginId}`);
  return [api, session];
}

describe("login and dashboard", () => {
  it("shows the seeded MOTD on the patient dashboard", async () => {
    const [api, session] = await signIn("alice");
    const model = await buildDashboard(api, session);
    expect(model.error).toBeNull();
    expect(model.motd?.message).toContain("meal plan");
    const html = renderDashboard(model);
    expect(html).toContain("meal plan");
    await logout(api);
  });

  it("populates suggestions for a patient without friends", async () => {
    const [api, session] = await signIn("cira");
    const model = await buildDashboard(api, session);
    expect(model.suggestions.length).toBeGreaterThan(0);
    await logout(api);
  });

  it("status posts land in a friend's feed in API order", async () => {
    const [apiAlice] = await signIn("alice");
    const post = await postStatus(apiAlice, "e2e status ping");
    const [apiBram, bram] = await signIn("bram");
    const model = await buildDashboard(apiBram, bram);
    expect(model.feed.map((f) => f.ref)).toContain(post.id);
    await logout(apiAlice);
    await logout(apiBram);
  });

  it("rejects a bad login without crashing the page", async () => {
    const api = client();
    await expect(login(api, "alice", "wrong")).rejects.toMatchObject({
      status: 401,
    });
  });
});

describe("appointment booking flow", () => {
  it("patient books, staff approves, patient sees Approved", async () => {
    const [apiAlice, alice] = await signIn("alice");
    const request = await bookAppointment(
      apiAlice,
      "2026-09-01T09:00:00+00:00",
      "2026-09-01T09:30:00+00:00",
    );
    expect(request.state).toBe("Pending");

    const [apiDoc] = await signIn("drhana");
    const console_ = await buildAdminConsole(apiDoc);
    const queued = console_.pendingRequests.find((r) => r.id === request.id);
    expect(queued).toBeDefined();
    const decided = await decide(apiDoc, request.id, "Approved");
    expect(decided.state).toBe("Approved");

    const record = await buildMedicalRecord(apiAlice, alice.principal);
    const mine = record.requests.find((r) => r.id === request.id);
    expect(mine?.state).toBe("Approved");
    const appts = await apiAlice.appointments(alice.principal);
    expect(appts.some((a) => a.slot.startsWith("2026-09-01T09:00"))).toBe(true);
    await logout(apiAlice);
    await logout(apiDoc);
  });
});

describe("EMR grant round-trip", () => {
  it("grant unlocks the clinician view, revoke locks it again", async () => {
    const [apiAlice, alice] = await signIn("alice");
    const [apiDoc, doc] = await signIn("drhana");

    // the seeded prescription exists; without a grant the view is forbidden
    const before = await buildMedicalRecord(apiDoc, alice.principal);
    expect(before.forbidden).toBe(true);
    expect(renderMedicalRecord(before)).toContain("do not have access");

    const grant = await grantTrustedDoctor(apiAlice, alice.principal,
                                           doc.principal);
    const unlocked = await buildMedicalRecord(apiDoc, alice.principal);
    expect(unlocked.forbidden).toBe(false);
    expect(unlocked.entries.length).toBeGreaterThan(0);

    // identical entry lists for patient and granted clinician
    const own = await buildMedicalRecord(apiAlice, alice.principal);
    expect(unlocked.entries.map((e) => e.id)).toEqual(
      own.entries.map((e) => e.id));

    await revokeGrant(apiAlice, alice.principal, grant.id);
    const locked = await buildMedicalRecord(apiDoc, alice.principal);
    expect(locked.forbidden).toBe(true);
    await logout(apiAlice);
    await logout(apiDoc);
  });

  it("refill button state follows the prescription", async () => {
    const [apiAlice, alice] = await signIn("alice");
    const record = await buildMedicalRecord(apiAlice, alice.principal);
    const rx = record.refillButtons.find((b) => b.drug === "Metformin");
    expect(rx?.enabled).toBe(true);
    await logout(apiAlice);
  });
});

describe("knowledge vs forum", () => {
  it("educator knowledge renders verified, patient forum unverified", async () => {
    const [apiEdu] = await signIn("edu");
    const item = await publishKnowledge(apiEdu, "Hydration guidelines for summer.");
    expect(item.verified).toBe(true);
    const itemHtml = renderPost(item);
    expect(itemHtml).toContain(`class="badge verified"`);

    const [apiAlice] = await signIn("alice");
    const forum = await apiAlice.post("ForumThread", "My recovery diary week 1");
    expect(forum.verified).toBe(false);
    expect(renderPost(forum)).toContain(`class="badge unverified"`);

    const view = await knowledgeView(apiAlice, item.id);
    expect(view.badge).toBe("verified");
    await logout(apiEdu);
    await logout(apiAlice);
  });

  it("patients cannot publish into the knowledge base", async () => {
    const [apiAlice] = await signIn("alice");
    await expect(publishKnowledge(apiAlice, "unreviewed advice"))
      .rejects.toMatchObject({ status: 403 });
    await logout(apiAlice);
  });
});

describe("episode board", () => {
  it("loops back to problem finding with a cycle badge of 2", async () => {
    const [apiAlice, alice] = await signIn("alice");
    const episode = await apiAlice.openEpisode("sleep trouble");
    await advance(apiAlice, episode.id, "ProblemSolving",
                  [{ description: "less caffeine", proposed_by: alice.principal }]);
    await advance(apiAlice, episode.id, "Choice", 0);
    const entry = await apiAlice.recordEntry({
      submodule: "HB", occurred_at: "2026-02-01T08:00:00+00:00",
      metrics: { slept_hours: 6 },
    });
    await advance(apiAlice, episode.id, "Execution", entry.id);
    await advance(apiAlice, episode.id, "Evaluation",
                  { outcome_note: "not yet", resolved: false });
    const looped = await advance(apiAlice, episode.id, "ProblemFinding", null);
    expect(looped.episode?.stage).toBe("ProblemFinding");
    const board = await buildEpisodeBoard(apiAlice, episode.id);
    expect(board.cycleBadge).toBe(2);
    expect(board.stepper.find((s) => s.current)?.stage).toBe("ProblemFinding");
    await logout(apiAlice);
  });

  it("surfaces an illegal skip inline, verbatim from the API", async () => {
    const [apiAlice] = await signIn("alice");
    const episode = await apiAlice.openEpisode("knee pain");
    const result = await advance(apiAlice, episode.id, "Execution", "ref");
    expect(result.inlineError).toContain("IllegalTransition");
    await logout(apiAlice);
  });

  it("renders closed episodes read-only and rejects mutations", async () => {
    const [apiAlice, alice] = await signIn("alice");
    const episode = await apiAlice.openEpisode("resolved issue");
    await advance(apiAlice, episode.id, "ProblemSolving",
                  [{ description: "rest", proposed_by: alice.principal }]);
    await advance(apiAlice, episode.id, "Choice", 0);
    const entry = await apiAlice.recordEntry({
      submodule: "HB", occurred_at: "2026-02-02T08:00:00+00:00",
      metrics: {},
    });
    await advance(apiAlice, episode.id, "Execution", entry.id);
    await advance(apiAlice, episode.id, "Evaluation",
                  { outcome_note: "all good", resolved: true });
    await advance(apiAlice, episode.id, "Closed", null);
    const board = await buildEpisodeBoard(apiAlice, episode.id);
    expect(board.closed).toBe(true);
    const rejected = await advance(apiAlice, episode.id, "ProblemSolving",
                                   [{ description: "again",
                                      proposed_by: alice.principal }]);
    expect(rejected.inlineError).toContain("IllegalTransition");
    await logout(apiAlice);
  });
});

describe("quick logout", () => {
  it("one call terminates the session; the next call is unauthorized", async () => {
    const [api, session] = await signIn("bram");
    expect(session.role).toBe("Patient");
    await logout(api);
    api.setToken(session.token);
    await expect(api.me()).rejects.toMatchObject({ status: 401 });
  });
});
