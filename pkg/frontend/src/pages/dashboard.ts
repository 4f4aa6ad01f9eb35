/**
 * Dashboard page model: MOTD, status composer, feed page, notifications
 * badge, online friends, and friend suggestions.
 *
 * The model contains exactly what the API returned for this session, in
 * API order. Authorization failures surface as page state, never throw
 * past the builder.
 */
import { ApiClient, FeedItem, Motd, Notification } from "../api.js";
import { UiSession } from "../session.js";

export interface DashboardModel {
  motd: Motd | null;
  feed: FeedItem[];
  feedPages: FeedItem[][];
  notifications: Notification[];
  unreadCount: number;
  onlineFriends: string[];
  suggestions: string[];
  error: string | null;
}

export const FEED_PAGE_SIZE = 10;

export function paginate<T>(items: T[], pageSize: number): T[][] {
  const pages: T[][] = [];
  for (let i = 0; i < items.length; i += pageSize) {
    pages.push(items.slice(i, i + pageSize));
  }
  return pages;
}

export async function buildDashboard(
  api: ApiClient,
  _session: UiSession,
  feedLimit = 30,
): Promise<DashboardModel> {
  try {
    const [motd, feed, notifications, online, suggested] = await Promise.all([
      api.motd(),
      api.feed(feedLimit),
      api.notifications(),
      api.onlineFriends(),
      api.suggestions(5),
    ]);
    return {
      motd,
      feed,
      feedPages: paginate(feed, FEED_PAGE_SIZE),
      notifications,
      unreadCount: notifications.filter((n) => !n.read).length,
      onlineFriends: online.online,
      suggestions: suggested.candidates,
      error: null,
    };
  } catch (err) {
    return {
      motd: null,
      feed: [],
      feedPages: [],
      notifications: [],
      unreadCount: 0,
      onlineFriends: [],
      suggestions: [],
      error: String(err),
    };
  }
}

/** Post a status from the composer; the caller refreshes the feed after. */
export async function postStatus(api: ApiClient, body: string) {
  return api.post("Status", body);
}
