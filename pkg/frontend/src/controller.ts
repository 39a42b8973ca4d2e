/**
 * Orchestrates the conversation: session start/resume, optimistic
 * message sending with retry, gated text uploads, and status polling
 * until feedback arrives. All displayed content comes from the API.
 */

import { ApiClient, ApiError } from "./api.js";
import type { SessionPayload } from "./api.js";
import {
  ChatMessage,
  ChatViewState,
  emptyState,
  latestFeedbackLink,
  messageFromReply,
  messagesFromHistory,
  uploadAllowed,
} from "./state.js";

export interface UploadFile {
  name: string;
  type: string;
  size: number;
  data: Blob;
}

export interface ControllerOptions {
  /** polling interval while the service processes an upload */
  pollIntervalMs?: number;
  /** give up polling after this long */
  pollTimeoutMs?: number;
  /** client-side upload size gate */
  maxUploadBytes?: number;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export class ChatController {
  state: ChatViewState = emptyState();
  onChange: (state: ChatViewState) => void = () => {};

  private readonly pollIntervalMs: number;
  private readonly pollTimeoutMs: number;
  private readonly maxUploadBytes: number;
  private readonly sleep: (ms: number) => Promise<void>;

  constructor(
    private readonly api: ApiClient,
    options: ControllerOptions = {},
  ) {
    this.pollIntervalMs = options.pollIntervalMs ?? 2000;
    this.pollTimeoutMs = options.pollTimeoutMs ?? 120_000;
    this.maxUploadBytes = options.maxUploadBytes ?? 1_048_576;
    this.sleep = options.sleep ?? defaultSleep;
  }

  private emit() {
    this.onChange(this.state);
  }

  private syncFromPayload(payload: SessionPayload) {
    this.state.sessionId = payload.session_id;
    this.state.dialogState = payload.state;
    this.state.messages = messagesFromHistory(payload.history);
  }

  /** Open a new session, or restore one by id (page reload). */
  async start(resumeSessionId?: string): Promise<boolean> {
    try {
      const payload = resumeSessionId
        ? await this.api.getSession(resumeSessionId)
        : await this.api.createSession();
      this.state = emptyState();
      this.syncFromPayload(payload);
      this.emit();
      return true;
    } catch (error) {
      if (error instanceof ApiError && error.status === 401) {
        this.state.banner = `Sign-in failed: ${error.message}`;
      } else if (error instanceof ApiError) {
        this.state.banner = `Could not open a session: ${error.message}`;
      } else {
        this.state.banner = "Could not reach the service.";
      }
      this.emit();
      return false;
    }
  }

  /** Optimistic send; on network failure the bubble gets a retry flag. */
  async sendMessage(text: string): Promise<void> {
    const trimmed = text.trim();
    if (!trimmed || !this.state.sessionId) {
      return;
    }
    const bubble: ChatMessage = {
      speaker: "student",
      kind: "text",
      content: trimmed,
      at: new Date().toISOString(),
      pending: true,
    };
    this.state.messages.push(bubble);
    this.state.composer = "";
    this.emit();
    try {
      const response = await this.api.sendMessage(this.state.sessionId, trimmed);
      bubble.pending = false;
      this.state.dialogState = response.state;
      for (const reply of response.replies) {
        this.state.messages.push(messageFromReply(reply));
      }
    } catch (error) {
      if (error instanceof ApiError) {
        bubble.pending = false;
        bubble.failed = true;
        this.state.banner = error.message;
      } else {
        bubble.pending = false;
        bubble.failed = true;
      }
    }
    this.emit();
  }

  /** Re-send a bubble whose first attempt failed. */
  async retryMessage(message: ChatMessage): Promise<void> {
    if (!message.failed) {
      return;
    }
    const index = this.state.messages.indexOf(message);
    if (index >= 0) {
      this.state.messages.splice(index, 1);
    }
    await this.sendMessage(message.content);
  }

  canUpload(): boolean {
    const busy =
      this.state.uploadStatus.phase === "uploading" ||
      this.state.uploadStatus.phase === "processing";
    return uploadAllowed(this.state.dialogState) && !busy;
  }

  /** Client-side gate: text files under the size limit only. */
  rejectReason(file: UploadFile): string {
    const isText =
      file.type.startsWith("text/") ||
      (file.type === "" && file.name.toLowerCase().endsWith(".txt"));
    if (!isText) {
      return `only plain text files can be submitted (got ${file.type || file.name})`;
    }
    if (file.size > this.maxUploadBytes) {
      return `the file is too large (${file.size} bytes, limit ${this.maxUploadBytes})`;
    }
    return "";
  }

  async uploadText(file: UploadFile): Promise<void> {
    if (!this.state.sessionId || !this.canUpload()) {
      return;
    }
    const rejection = this.rejectReason(file);
    if (rejection) {
      this.state.uploadStatus = { phase: "error", reason: rejection };
      this.emit();
      return;
    }
    this.state.uploadStatus = { phase: "uploading" };
    this.state.messages.push({
      speaker: "student",
      kind: "upload",
      content: file.name,
      at: new Date().toISOString(),
    });
    this.emit();
    try {
      const response = await this.api.uploadText(this.state.sessionId, file.data, file.name);
      this.state.dialogState = response.state;
      for (const reply of response.replies) {
        this.state.messages.push(messageFromReply(reply));
      }
      if (response.busy) {
        this.state.uploadStatus = {
          phase: "error",
          reason: response.replies[0]?.text ?? "service busy, retry shortly",
        };
        this.emit();
        return;
      }
      this.state.uploadStatus = { phase: "processing" };
      this.emit();
      await this.pollUntilSettled();
    } catch (error) {
      const reason = error instanceof ApiError ? error.message : "upload failed";
      this.state.uploadStatus = { phase: "error", reason };
      this.emit();
    }
  }

  /** Poll the session until feedback is delivered or processing fails. */
  private async pollUntilSettled(): Promise<void> {
    const deadline = Date.now() + this.pollTimeoutMs;
    while (Date.now() < deadline) {
      const payload = await this.api.getSession(this.state.sessionId);
      this.syncFromPayload(payload);
      if (payload.state === "FeedbackDelivered") {
        const link = latestFeedbackLink(this.state.messages);
        this.state.uploadStatus = link
          ? { phase: "ready", documentId: link.documentId! }
          : { phase: "error", reason: "feedback arrived without a document link" };
        this.emit();
        return;
      }
      if (payload.state !== "Processing") {
        // the pipeline rejected the submission; the reason is the last bot message
        const reason = [...this.state.messages]
          .reverse()
          .find((m) => m.speaker === "bot")?.content;
        this.state.uploadStatus = {
          phase: "error",
          reason: reason ?? "the submission could not be processed",
        };
        this.emit();
        return;
      }
      this.emit();
      await this.sleep(this.pollIntervalMs);
    }
    this.state.uploadStatus = { phase: "error", reason: "timed out waiting for feedback" };
    this.emit();
  }

  /** Fetch the feedback HTML for the sandboxed viewer pane. */
  async openDocument(documentId: string): Promise<void> {
    const html = await this.api.fetchDocument(documentId);
    this.state.document = { documentId, html };
    this.emit();
  }

  closeDocument(): void {
    this.state.document = undefined;
    this.emit();
  }
}
