/**
 * Typed client for the clinic2 HTTP API.
 *
 * Every call goes through request(), which attaches the bearer token and
 * normalizes errors into ApiError. The client performs no authorization
 * logic of its own: the server's answer is the only authority.
 */

export interface LoginResponse {
  token: string;
  principal: string;
  role: string;
  display_name: string;
}

export interface Motd {
  user: string;
  message: string;
  set_by: string;
  effective_at: string;
}

export interface FeedItem {
  subject: string;
  kind: string;
  ref: string;
  created_at: string;
}

export interface Post {
  id: string;
  author: string;
  kind: string;
  body: string;
  parent: string | null;
  group: string | null;
  verified: boolean;
  likes: number;
  created_at: string;
}

export interface Notification {
  id: string;
  kind: string;
  ref: string;
  read: boolean;
  created_at: string;
}

export interface EmrEntry {
  id: string;
  object_class: string;
  submodule: string;
  owner: string;
  author: string;
  payload: Record<string, unknown>;
  created_at: string;
  updated_at: string;
  version: number;
}

export interface Grant {
  id: string;
  patient: string;
  grantee: string;
  scope: string[];
  granted_at: string;
  revoked_at: string | null;
  active: boolean;
}

export interface CareRequest {
  id: string;
  patient: string;
  kind: string;
  detail: Record<string, unknown>;
  state: string;
  decided_by: string | null;
  counter_offer: string | null;
  created_at: string;
}

export interface Episode {
  id: string;
  patient: string;
  stage: string;
  problem_statement: string;
  alternatives: { description: string; proposed_by: string }[];
  chosen: number | null;
  executions: string[];
  evaluations: { outcome_note: string; resolved: boolean }[];
  cycle_count: number;
  parent_episode: string | null;
  created_at: string;
}

export interface Message {
  id: string;
  from: string;
  to: string;
  body: string;
  created_at: string;
}

export interface Group {
  id: string;
  name: string;
  members: string[];
  moderators: string[];
}

export interface SearchResult {
  users: { id: string; display_name: string; role: string }[];
  posts: { id: string; kind: string; author: string; body: string; verified: boolean }[];
}

export interface MeInfo {
  principal: string;
  role: string;
  display_name: string;
  unread_notifications: number;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public error: string,
    public detail: string,
  ) {
    super(`${error}: ${detail}`);
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private token: string | null = null,
  ) {}

  setToken(token: string | null): void {
    this.token = token;
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    const resp = await fetch(`${this.baseUrl}${path}`, {
      method,
      headers,
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    const text = await resp.text();
    if (!resp.ok) {
      try {
        const doc = JSON.parse(text);
        throw new ApiError(resp.status, doc.error ?? "Error", doc.detail ?? text);
      } catch (err) {
        if (err instanceof ApiError) throw err;
        throw new ApiError(resp.status, "Error", text);
      }
    }
    return (text ? JSON.parse(text) : null) as T;
  }

  // auth
  login(login: string, password: string): Promise<LoginResponse> {
    return this.request("POST", "/auth/login", { login, password });
  }

  logout(): Promise<{ ok: boolean }> {
    return this.request("POST", "/auth/logout");
  }

  me(): Promise<MeInfo> {
    return this.request("GET", "/me");
  }

  // dashboard pieces
  motd(): Promise<Motd | null> {
    return this.request("GET", "/motd");
  }

  setMotd(user: string, message: string, effectiveAt: string): Promise<Motd> {
    return this.request("POST", "/motd", {
      user,
      message,
      effective_at: effectiveAt,
    });
  }

  feed(limit = 10): Promise<FeedItem[]> {
    return this.request("GET", `/feed?limit=${limit}`);
  }

  notifications(unreadOnly = false): Promise<Notification[]> {
    return this.request("GET", `/notifications?unread_only=${unreadOnly}`);
  }

  markRead(ids: string[]): Promise<{ changed: number }> {
    return this.request("POST", "/notifications/read", { ids });
  }

  onlineFriends(): Promise<{ online: string[] }> {
    return this.request("GET", "/friends/online");
  }

  suggestions(k = 5): Promise<{ candidates: string[] }> {
    return this.request("GET", `/suggestions?k=${k}`);
  }

  search(q: string): Promise<SearchResult> {
    return this.request("GET", `/search?q=${encodeURIComponent(q)}`);
  }

  // social
  post(kind: string, body: string, parent?: string, group?: string): Promise<Post> {
    return this.request("POST", "/posts", {
      kind,
      body,
      parent: parent ?? null,
      group: group ?? null,
    });
  }

  getPost(id: string): Promise<Post> {
    return this.request("GET", `/posts/${id}`);
  }

  replies(id: string): Promise<Post[]> {
    return this.request("GET", `/posts/${id}/replies`);
  }

  like(id: string): Promise<{ likes: number }> {
    return this.request("POST", `/posts/${id}/like`);
  }

  connections(): Promise<{ friends: string[] }> {
    return this.request("GET", "/connections");
  }

  manageConnection(target: string, verb: string): Promise<unknown> {
    return this.request("POST", "/connections", { target, verb });
  }

  groups(): Promise<Group[]> {
    return this.request("GET", "/groups");
  }

  joinGroup(id: string): Promise<Group> {
    return this.request("POST", `/groups/${id}/join`);
  }

  inbox(): Promise<Message[]> {
    return this.request("GET", "/messages");
  }

  sendMessage(to: string, body: string): Promise<Message> {
    return this.request("POST", "/messages", { to, body });
  }

  // personal health
  recordEntry(entry: {
    submodule: string;
    occurred_at: string;
    metrics?: Record<string, number>;
    note?: string;
    details?: Record<string, string>;
  }): Promise<EmrEntry> {
    return this.request("POST", "/me/entries", entry);
  }

  timeline(): Promise<EmrEntry[]> {
    return this.request("GET", "/me/timeline");
  }

  plan(): Promise<EmrEntry | null> {
    return this.request("GET", "/me/plan");
  }

  putPlan(goals: { title: string; target_metric?: string; due_date: string; status?: string }[],
          note = ""): Promise<unknown> {
    return this.request("PUT", "/me/plan", { goals, note });
  }

  account(): Promise<{ line_items: unknown[]; balance: number }> {
    return this.request("GET", "/me/account");
  }

  // medical
  emr(patient: string, kinds?: string[]): Promise<EmrEntry[]> {
    const query = kinds ? `?kinds=${kinds.join(",")}` : "";
    return this.request("GET", `/patients/${patient}/emr${query}`);
  }

  grants(patient: string): Promise<Grant[]> {
    return this.request("GET", `/patients/${patient}/grants`);
  }

  grantAccess(patient: string, clinician: string, scope: string[]): Promise<Grant> {
    return this.request("POST", `/patients/${patient}/grants`, {
      clinician,
      scope,
    });
  }

  revokeGrant(patient: string, grantId: string): Promise<Grant> {
    return this.request("POST", `/patients/${patient}/grants/${grantId}/revoke`);
  }

  submitRequest(kind: string, detail: Record<string, unknown>): Promise<CareRequest> {
    return this.request("POST", "/requests", { kind, detail });
  }

  requests(params: { patient?: string; state?: string } = {}): Promise<CareRequest[]> {
    const query = new URLSearchParams();
    if (params.patient) query.set("patient", params.patient);
    if (params.state) query.set("state", params.state);
    const qs = query.toString();
    return this.request("GET", `/requests${qs ? "?" + qs : ""}`);
  }

  decideRequest(id: string, outcome: string, counterOffer?: string): Promise<CareRequest> {
    return this.request("POST", `/requests/${id}/decision`, {
      outcome,
      counter_offer: counterOffer ?? null,
    });
  }

  appointments(patient: string): Promise<{ id: string; slot: string }[]> {
    return this.request("GET", `/patients/${patient}/appointments`);
  }

  recordEmr(patient: string, body: Record<string, unknown>): Promise<EmrEntry> {
    return this.request("POST", `/patients/${patient}/emr`, body);
  }

  // episodes
  openEpisode(problem: string, patient?: string): Promise<Episode> {
    return this.request("POST", "/episodes", {
      problem_statement: problem,
      patient: patient ?? null,
    });
  }

  episodes(patient?: string): Promise<Episode[]> {
    const qs = patient ? `?patient=${patient}` : "";
    return this.request("GET", `/episodes${qs}`);
  }

  advanceEpisode(id: string, toStage: string, payload: unknown): Promise<Episode> {
    return this.request("POST", `/episodes/${id}/advance`, {
      to_stage: toStage,
      payload,
    });
  }

  episodeReport(id: string): Promise<Record<string, unknown>> {
    return this.request("GET", `/episodes/${id}/report`);
  }

  // admin
  async getPolicy(): Promise<string> {
    const headers: Record<string, string> = {};
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    const resp = await fetch(`${this.baseUrl}/policy`, { headers });
    const text = await resp.text();
    if (!resp.ok) throw new ApiError(resp.status, "Error", text);
    return text;
  }

  putPolicy(text: string): Promise<{ version: number }> {
    return this.request("PUT", "/policy", { text });
  }
}
