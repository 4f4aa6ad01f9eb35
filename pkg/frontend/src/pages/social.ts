/**
 * Social page model: knowledge base (verified) vs forum (unverified),
 * groups with opt-in membership, and the message inbox in API order.
 */
import { ApiClient, Group, Message, Post, SearchResult } from "../api.js";

export interface SocialModel {
  inbox: Message[];
  groups: Group[];
  myGroups: string[];
  error: string | null;
}

export async function buildSocial(
  api: ApiClient,
  principal: string,
): Promise<SocialModel> {
  try {
    const [inbox, groups] = await Promise.all([api.inbox(), api.groups()]);
    return {
      inbox,
      groups,
      myGroups: groups.filter((g) => g.members.includes(principal)).map((g) => g.id),
      error: null,
    };
  } catch (err) {
    return { inbox: [], groups: [], myGroups: [], error: String(err) };
  }
}

export interface KnowledgeView {
  item: Post;
  badge: "verified" | "unverified";
  questions: Post[];
}

/** Knowledge items carry the verified badge; forum content never does. */
export async function knowledgeView(
  api: ApiClient,
  postId: string,
): Promise<KnowledgeView> {
  const item = await api.getPost(postId);
  const children = await api.replies(postId);
  return {
    item,
    badge: item.verified ? "verified" : "unverified",
    questions: children.filter((c) => c.kind === "KnowledgeQuestion"),
  };
}

export async function askQuestion(
  api: ApiClient,
  itemId: string,
  body: string,
): Promise<Post> {
  return api.post("KnowledgeQuestion", body, itemId);
}

export async function searchBox(api: ApiClient, q: string): Promise<SearchResult> {
  return api.search(q);
}

/**
 * Optimistic like: bump the count locally, reconcile with the server's
 * answer (likes are the only optimistic mutation in the portal).
 */
export async function likeOptimistic(
  api: ApiClient,
  post: Post,
): Promise<number> {
  const optimistic = post.likes + 1;
  try {
    const { likes } = await api.like(post.id);
    return likes;
  } catch {
    return optimistic - 1; // roll back
  }
}
