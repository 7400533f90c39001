/** Typed fetch client; every request goes to a documented endpoint. */

import type {
  AttemptResult,
  KnowledgeState,
  Offering,
  Profile,
  ResourceCard,
  ResourceDetail,
  SearchParams,
  Session,
} from "./types";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

let baseUrl = "";
let session: Session | null = null;

export const configure = (url: string, active: Session | null): void => {
  baseUrl = url.replace(/\/$/, "");
  session = active;
};

export const currentSession = (): Session | null => session;

const request = async <T>(
  method: string,
  path: string,
  body?: unknown,
  raw = false,
): Promise<T> => {
  const headers: Record<string, string> = {};
  if (session) headers["Authorization"] = `Bearer ${session.token}`;
  if (body !== undefined) headers["Content-Type"] = "application/json";
  const response = await fetch(baseUrl + path, {
    method,
    headers,
    body: body === undefined ? undefined : JSON.stringify(body),
  });
  if (!response.ok) {
    let code = "error";
    let message = response.statusText;
    try {
      const envelope = await response.json();
      code = envelope.code ?? code;
      message = envelope.message ?? message;
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(response.status, code, message);
  }
  return (raw ? response.text() : response.json()) as Promise<T>;
};

export const register = (displayName: string): Promise<Session> =>
  request("POST", "/auth/register", { display_name: displayName });

export const login = (userId: string): Promise<Session> =>
  request("POST", "/auth/login", { user_id: userId });

export const listOfferings = (): Promise<Offering[]> => request("GET", "/offerings");

export const getOffering = (id: string): Promise<Offering> =>
  request("GET", `/offerings/${id}`);

export const createOffering = (body: unknown): Promise<Offering> =>
  request("POST", "/offerings", body);

export const enrol = (offeringId: string, code: string): Promise<unknown> =>
  request("POST", `/offerings/${offeringId}/enrol`, { code });

export const knowledgeState = (
  offeringId: string,
  mode: "current" | "overtime",
): Promise<KnowledgeState> =>
  request("GET", `/offerings/${offeringId}/learner/state?mode=${mode}`);

export const searchResources = (
  offeringId: string,
  params: SearchParams,
): Promise<ResourceCard[]> => {
  const query = new URLSearchParams();
  for (const [key, value] of Object.entries(params)) {
    if (value !== undefined && value !== "") query.set(key, String(value));
  }
  const suffix = query.toString() ? `?${query.toString()}` : "";
  return request("GET", `/offerings/${offeringId}/resources${suffix}`);
};

export const recommendations = (offeringId: string, n: number): Promise<ResourceCard[]> =>
  request("GET", `/offerings/${offeringId}/recommendations?n=${n}`);

export const getResource = (id: string): Promise<ResourceDetail> =>
  request("GET", `/resources/${id}`);

export const authorResource = (offeringId: string, body: unknown): Promise<ResourceDetail> =>
  request("POST", `/offerings/${offeringId}/resources`, body);

export const submitAttempt = (
  resourceId: string,
  chosenIndex: number | null,
): Promise<AttemptResult> =>
  request("POST", `/resources/${resourceId}/attempts`, { chosen_index: chosenIndex });

export const rateResource = (resourceId: string, stars: number): Promise<unknown> =>
  request("POST", `/resources/${resourceId}/ratings`, { stars });

export const commentResource = (resourceId: string, text: string): Promise<unknown> =>
  request("POST", `/resources/${resourceId}/comments`, { text });

export const flagResource = (resourceId: string, reason: string): Promise<unknown> =>
  request("POST", `/resources/${resourceId}/flags`, { reason });

export const moderateResource = (
  resourceId: string,
  decision: "approve" | "reject",
  note?: string,
): Promise<unknown> =>
  request("POST", `/resources/${resourceId}/moderate`, { decision, note });

export const peerReview = (
  resourceId: string,
  verdict: "approve" | "reject",
  rationale: string,
): Promise<unknown> =>
  request("POST", `/resources/${resourceId}/reviews`, { verdict, rationale });

export const moderationQueue = (offeringId: string): Promise<ResourceDetail[]> =>
  request("GET", `/offerings/${offeringId}/moderation-queue`);

export const profile = (offeringId: string): Promise<Profile> =>
  request("GET", `/offerings/${offeringId}/profile`);

export const evaluateBadges = (offeringId: string): Promise<unknown> =>
  request("POST", `/offerings/${offeringId}/badges/evaluate`);
