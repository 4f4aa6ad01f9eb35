/**
 * Browser entry: a single-page shell with the top menu (search box,
 * My Health, Medical Record, Logout, MOTD, status, conversation, profile,
 * group) and hash routing between views. All state flows through the page
 * models; this file only mounts them into the DOM and wires events.
 */
import { ApiClient } from "./api.js";
import { startPolling, Poller } from "./poll.js";
import { buildDashboard, postStatus } from "./pages/dashboard.js";
import { buildMyHealth } from "./pages/myhealth.js";
import { buildMedicalRecord } from "./pages/medical.js";
import { buildEpisodeBoard } from "./pages/episode.js";
import { buildSocial } from "./pages/social.js";
import { buildAdminConsole } from "./pages/admin.js";
import { login, logout, refreshUnread, UiSession, isStaff } from "./session.js";
import {
  renderDashboard,
  renderEpisodeBoard,
  renderInbox,
  renderMedicalRecord,
  escapeHtml,
} from "./render.js";

const API_BASE =
  (globalThis as { CLINIC2_API_BASE?: string }).CLINIC2_API_BASE ??
  "http://127.0.0.1:8470";

const api = new ApiClient(API_BASE);
let session: UiSession | null = null;
let poller: Poller | null = null;

function mount(html: string): void {
  const root = document.getElementById("app");
  if (root) root.innerHTML = html;
}

function renderLogin(error = ""): void {
  mount(
    `<form id="login-form" class="login">` +
      `<input name="login" placeholder="login id" />` +
      `<input name="password" type="password" placeholder="password" />` +
      `<button type="submit">Sign in</button>` +
      (error ? `<div class="error">${escapeHtml(error)}</div>` : "") +
      `</form>`,
  );
  document.getElementById("login-form")?.addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const form = ev.target as HTMLFormElement;
    const data = new FormData(form);
    try {
      session = await login(api, String(data.get("login")),
                            String(data.get("password")));
      startSessionPolling();
      location.hash = "#/dashboard";
      await route();
    } catch (err) {
      renderLogin(String(err));
    }
  });
}

function renderChrome(content: string): void {
  if (!session) return;
  const staffNav = isStaff(session)
    ? `<a href="#/console">Console</a>`
    : "";
  mount(
    `<nav class="top-menu">` +
      `<input id="search-box" placeholder="search" />` +
      `<a href="#/myhealth">My Health</a>` +
      `<a href="#/medical">Medical Record</a>` +
      `<a href="#/social">Conversation</a>` +
      `<a href="#/dashboard">Home</a>` +
      staffNav +
      `<button id="logout-btn">Logout</button>` +
      `<span id="unread">${session.unreadCount}</span>` +
      `</nav><div id="view">${content}</div>`,
  );
  // quick logout: one click, no confirmation prompt
  document.getElementById("logout-btn")?.addEventListener("click", async () => {
    await logout(api);
    session = null;
    poller?.stop();
    renderLogin();
  });
  document.getElementById("search-box")?.addEventListener("change", async (ev) => {
    const q = (ev.target as HTMLInputElement).value;
    const result = await api.search(q);
    const hits = result.posts.map((p) => `<li>${escapeHtml(p.body)}</li>`);
    const view = document.getElementById("view");
    if (view) view.innerHTML = `<ul class="search-hits">${hits.join("")}</ul>`;
  });
}

function startSessionPolling(): void {
  poller?.stop();
  poller = startPolling(async () => {
    if (!session) return;
    session = await refreshUnread(api, session);
    const badge = document.getElementById("unread");
    if (badge) badge.textContent = String(session.unreadCount);
  });
}

async function route(): Promise<void> {
  if (!session) {
    renderLogin();
    return;
  }
  const hash = location.hash || "#/dashboard";
  if (hash.startsWith("#/myhealth")) {
    const model = await buildMyHealth(api);
    renderChrome(
      `<h1>My Health</h1>` +
        `<div>balance: ${model.statement.balance}</div>` +
        `<ul>${model.timeline
          .map((e) => `<li>[${e.submodule}] ${escapeHtml(e.payload["note"] as string ?? "")}</li>`)
          .join("")}</ul>`,
    );
  } else if (hash.startsWith("#/medical")) {
    const model = await buildMedicalRecord(api, session.principal);
    renderChrome(renderMedicalRecord(model));
  } else if (hash.startsWith("#/episode/")) {
    const id = hash.split("/")[2];
    const model = await buildEpisodeBoard(api, id);
    renderChrome(renderEpisodeBoard(model));
  } else if (hash.startsWith("#/social")) {
    const model = await buildSocial(api, session.principal);
    renderChrome(`<h1>Conversation</h1>` + renderInbox(model.inbox));
  } else if (hash.startsWith("#/console")) {
    const model = await buildAdminConsole(api);
    renderChrome(
      `<h1>Console</h1><ul>${model.pendingRequests
        .map((r) => `<li>${r.kind} from ${escapeHtml(r.patient)}</li>`)
        .join("")}</ul>`,
    );
  } else {
    const model = await buildDashboard(api, session);
    renderChrome(renderDashboard(model));
    document.querySelector(".composer")?.addEventListener("submit", async (ev) => {
      ev.preventDefault();
      const textarea = (ev.target as HTMLFormElement)
        .querySelector("textarea") as HTMLTextAreaElement;
      if (textarea.value.trim()) {
        await postStatus(api, textarea.value);
        await route();
      }
    });
  }
}

if (typeof window !== "undefined") {
  window.addEventListener("hashchange", () => void route());
  window.addEventListener("DOMContentLoaded", () => void route());
}
