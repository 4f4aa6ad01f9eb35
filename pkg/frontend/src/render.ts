/**
 * HTML renderers for the page models. Pure string builders: the models
 * arrive in API order and render in that order, no client re-sorting.
 */
import { EmrEntry, FeedItem, Message, Motd, Notification, Post } from "./api.js";
import { DashboardModel } from "./pages/dashboard.js";
import { EpisodeBoardModel } from "./pages/episode.js";
import { MedicalRecordModel } from "./pages/medical.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderMotd(motd: Motd | null): string {
  if (!motd) return `<div class="motd empty">No message today.</div>`;
  return `<div class="motd">${escapeHtml(motd.message)}` +
    `<span class="motd-by">set by ${escapeHtml(motd.set_by)}</span></div>`;
}

export function renderFeed(items: FeedItem[]): string {
  const rows = items.map(
    (i) =>
      `<li class="feed-item kind-${i.kind}" data-ref="${escapeHtml(i.ref)}">` +
      `${escapeHtml(i.kind)} from ${escapeHtml(i.subject)}</li>`,
  );
  return `<ul class="feed">${rows.join("")}</ul>`;
}

export function renderNotificationsBadge(notes: Notification[]): string {
  const unread = notes.filter((n) => !n.read).length;
  return `<span class="badge">${unread}</span>`;
}

export function renderPost(post: Post): string {
  const badge = post.verified
    ? `<span class="badge verified">verified</span>`
    : `<span class="badge unverified">unverified</span>`;
  return (
    `<article class="post kind-${post.kind}" data-id="${post.id}">` +
    `${badge}<p>${escapeHtml(post.body)}</p>` +
    `<footer>${escapeHtml(post.author)} · likes ${post.likes}</footer>` +
    `</article>`
  );
}

export function renderInbox(messages: Message[]): string {
  const rows = messages.map(
    (m) =>
      `<li data-id="${m.id}">${escapeHtml(m.from)}: ${escapeHtml(m.body)}</li>`,
  );
  return `<ul class="inbox">${rows.join("")}</ul>`;
}

export function renderEmrList(entries: EmrEntry[]): string {
  const rows = entries.map(
    (e) =>
      `<li class="emr-entry" data-id="${e.id}">` +
      `[${e.submodule}] ${escapeHtml(e.created_at)} by ${escapeHtml(e.author)}</li>`,
  );
  return `<ul class="emr">${rows.join("")}</ul>`;
}

export function renderMedicalRecord(model: MedicalRecordModel): string {
  if (model.forbidden) {
    return `<div class="forbidden">You do not have access to this record.</div>`;
  }
  const buttons = model.refillButtons.map((b) => {
    const attrs = b.enabled
      ? `data-rx="${b.prescription}"`
      : `disabled title="${escapeHtml(b.reason ?? "")}"`;
    return `<button class="refill" ${attrs}>Refill ${escapeHtml(b.drug)}</button>`;
  });
  const grants = model.grants.map(
    (g) =>
      `<li data-id="${g.id}" class="${g.active ? "active" : "revoked"}">` +
      `${escapeHtml(g.grantee)} (${g.scope.join(", ")})</li>`,
  );
  return (
    `<section class="medical-record">` +
    renderEmrList(model.entries) +
    `<div class="grants"><ul>${grants.join("")}</ul></div>` +
    `<div class="actions">${buttons.join("")}</div>` +
    `</section>`
  );
}

export function renderEpisodeBoard(model: EpisodeBoardModel): string {
  const steps = model.stepper
    .map(
      (s) =>
        `<li class="${s.current ? "current" : ""}">${escapeHtml(s.stage)}</li>`,
    )
    .join("");
  const cycle = `<span class="cycle-badge">${model.cycleBadge}</span>`;
  const lock = model.closed ? `<div class="closed">Episode closed</div>` : "";
  const error = model.inlineError
    ? `<div class="inline-error">${escapeHtml(model.inlineError)}</div>`
    : "";
  return `<section class="episode"><ol class="stepper">${steps}</ol>${cycle}${lock}${error}</section>`;
}

export function renderDashboard(model: DashboardModel): string {
  return (
    `<main class="dashboard">` +
    renderMotd(model.motd) +
    `<form class="composer"><textarea name="status"></textarea>` +
    `<button type="submit">Share</button></form>` +
    renderFeed(model.feedPages[0] ?? []) +
    `<aside class="online">${model.onlineFriends.map(escapeHtml).join(", ")}</aside>` +
    `<aside class="suggestions">${model.suggestions.map(escapeHtml).join(", ")}</aside>` +
    renderNotificationsBadge(model.notifications) +
    `</main>`
  );
}
