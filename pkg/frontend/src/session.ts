/**
 * UI session: holds the bearer token and the signed-in identity.
 * Logout is a single call with no confirmation step, by design.
 */
import { ApiClient } from "./api.js";

export interface UiSession {
  token: string;
  principal: string;
  role: string;
  displayName: string;
  unreadCount: number;
}

export async function login(
  api: ApiClient,
  loginId: string,
  password: string,
): Promise<UiSession> {
  const resp = await api.login(loginId, password);
  api.setToken(resp.token);
  return {
    token: resp.token,
    principal: resp.principal,
    role: resp.role,
    displayName: resp.display_name,
    unreadCount: 0,
  };
}

/** Quick logout: one interaction, no confirmation dialog. */
export async function logout(api: ApiClient): Promise<void> {
  await api.logout();
  api.setToken(null);
}

export async function refreshUnread(
  api: ApiClient,
  session: UiSession,
): Promise<UiSession> {
  const me = await api.me();
  return { ...session, unreadCount: me.unread_notifications };
}

export const isStaff = (session: UiSession): boolean =>
  session.role === "Clinician" ||
  session.role === "HealthEducator" ||
  session.role === "Admin";

export const isEducator = (session: UiSession): boolean =>
  session.role === "HealthEducator";

export const isAdmin = (session: UiSession): boolean =>
  session.role === "Admin";
