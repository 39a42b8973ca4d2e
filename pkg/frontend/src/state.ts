/**
 * Chat view state: what the page shows, nothing more. Every measure
 * and concept the user sees originates from an API response; this
 * module only copies strings around.
 */

import type { HistoryEntry, ReplyPayload } from "./api.js";

export type Speaker = "bot" | "student";
export type MessageKind = "text" | "upload" | "feedback-link";

export interface ChatMessage {
  speaker: Speaker;
  kind: MessageKind;
  content: string;
  at: string;
  documentId?: string;
  /** optimistic, not yet confirmed by the server */
  pending?: boolean;
  /** send failed; offer retry */
  failed?: boolean;
}

export type UploadStatus =
  | { phase: "idle" }
  | { phase: "uploading" }
  | { phase: "processing" }
  | { phase: "ready"; documentId: string }
  | { phase: "error"; reason: string };

export interface DocumentView {
  documentId: string;
  html: string;
}

export interface ChatViewState {
  sessionId: string;
  dialogState: string;
  messages: ChatMessage[];
  composer: string;
  uploadStatus: UploadStatus;
  banner: string;
  document?: DocumentView;
}

export function emptyState(): ChatViewState {
  return {
    sessionId: "",
    dialogState: "",
    messages: [],
    composer: "",
    uploadStatus: { phase: "idle" },
    banner: "",
  };
}

/** Server history is authoritative; keep only user-visible entries, in order. */
export function messagesFromHistory(history: HistoryEntry[]): ChatMessage[] {
  const messages: ChatMessage[] = [];
  for (const entry of history) {
    if (entry.speaker === "system" || entry.kind === "event") {
      continue;
    }
    messages.push({
      speaker: entry.speaker,
      kind: entry.kind as MessageKind,
      content: entry.content,
      at: entry.at,
      documentId: entry.document_id,
    });
  }
  return messages;
}

export function messageFromReply(reply: ReplyPayload): ChatMessage {
  return {
    speaker: "bot",
    kind: (reply.kind as MessageKind) ?? "text",
    content: reply.text,
    at: new Date().toISOString(),
    documentId: reply.document_id,
  };
}

/** The dialog states in which the service accepts an upload. */
export function uploadAllowed(dialogState: string): boolean {
  return dialogState === "AwaitingSubmission" || dialogState === "FeedbackDelivered";
}

export function latestFeedbackLink(messages: ChatMessage[]): ChatMessage | undefined {
  for (let i = messages.length - 1; i >= 0; i--) {
    const message = messages[i];
    if (message && message.kind === "feedback-link" && message.documentId) {
      return message;
    }
  }
  return undefined;
}
