/**
 * Thin typed client for the mentoring service HTTP API.
 *
 * The bearer token travels only in the Authorization header; it is
 * never interpolated into a URL. Non-2xx responses become ApiError
 * with the service's {code, message} body.
 */

export interface HistoryEntry {
  speaker: "bot" | "student" | "system";
  kind: "text" | "upload" | "feedback-link" | "event";
  content: string;
  at: string;
  document_id?: string;
}

export interface ReplyPayload {
  text: string;
  kind: string;
  document_id?: string;
}

export interface SessionPayload {
  session_id: string;
  state: string;
  assignment_id?: string;
  history: HistoryEntry[];
  replies?: ReplyPayload[];
  busy?: boolean;
  submission_id?: string;
}

export interface MessageResponse {
  state: string;
  replies: ReplyPayload[];
  busy?: boolean;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly token: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request(method: string, path: string, init: RequestInit = {}): Promise<Response> {
    const headers = new Headers(init.headers);
    headers.set("Authorization", `Bearer ${this.token}`);
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      ...init,
      method,
      headers,
    });
    if (!response.ok) {
      let code = "http_error";
      let message = `${response.status}`;
      try {
        const body = await response.json();
        code = body.code ?? code;
        message = body.message ?? message;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(response.status, code, message);
    }
    return response;
  }

  private async requestJson<T>(method: string, path: string, init: RequestInit = {}): Promise<T> {
    const response = await this.request(method, path, init);
    return (await response.json()) as T;
  }

  createSession(assignmentId?: string): Promise<SessionPayload> {
    return this.requestJson<SessionPayload>("POST", "/sessions", {
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(assignmentId ? { assignment_id: assignmentId } : {}),
    });
  }

  getSession(sessionId: string): Promise<SessionPayload> {
    return this.requestJson<SessionPayload>("GET", `/sessions/${sessionId}`);
  }

  sendMessage(sessionId: string, text: string): Promise<MessageResponse> {
    return this.requestJson<MessageResponse>("POST", `/sessions/${sessionId}/messages`, {
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text }),
    });
  }

  uploadText(sessionId: string, data: Blob, filename: string): Promise<MessageResponse> {
    const form = new FormData();
    form.append("file", data, filename);
    return this.requestJson<MessageResponse>("POST", `/sessions/${sessionId}/upload`, {
      body: form,
    });
  }

  async fetchDocument(documentId: string): Promise<string> {
    const response = await this.request("GET", `/documents/${documentId}`);
    return await response.text();
  }
}
