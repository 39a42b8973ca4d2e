/**
 * DOM rendering: a full re-render of the chat pane from view state.
 * The feedback document opens in a sandboxed iframe (srcdoc, no
 * scripts) with a download link built from a local Blob URL.
 */

import { ChatController } from "./controller.js";
import type { ChatMessage, ChatViewState } from "./state.js";

export function render(root: HTMLElement, state: ChatViewState, controller: ChatController): void {
  root.textContent = "";

  if (state.banner) {
    const banner = document.createElement("div");
    banner.className = "banner";
    banner.textContent = state.banner;
    root.appendChild(banner);
  }

  const list = document.createElement("div");
  list.className = "messages";
  for (const message of state.messages) {
    list.appendChild(renderMessage(message, controller));
  }
  root.appendChild(list);

  root.appendChild(renderStatus(state));
  root.appendChild(renderComposer(state, controller));
  if (state.document) {
    root.appendChild(renderViewer(state, controller));
  }
}

function renderMessage(message: ChatMessage, controller: ChatController): HTMLElement {
  const bubble = document.createElement("div");
  bubble.className = `bubble ${message.speaker}`;
  if (message.pending) bubble.classList.add("pending");
  if (message.failed) bubble.classList.add("failed");

  const content = document.createElement("p");
  content.textContent =
    message.kind === "upload" ? `uploaded: ${message.content}` : message.content;
  bubble.appendChild(content);

  if (message.kind === "feedback-link" && message.documentId) {
    const open = document.createElement("button");
    open.textContent = "Open feedback";
    open.className = "open-feedback";
    open.dataset.documentId = message.documentId;
    open.addEventListener("click", () => {
      void controller.openDocument(message.documentId!);
    });
    bubble.appendChild(open);
  }

  if (message.failed) {
    const retry = document.createElement("button");
    retry.textContent = "Retry";
    retry.className = "retry";
    retry.addEventListener("click", () => {
      void controller.retryMessage(message);
    });
    bubble.appendChild(retry);
  }
  return bubble;
}

function renderStatus(state: ChatViewState): HTMLElement {
  const status = document.createElement("div");
  status.className = `upload-status ${state.uploadStatus.phase}`;
  switch (state.uploadStatus.phase) {
    case "uploading":
      status.textContent = "Uploading your text...";
      break;
    case "processing":
      status.textContent = "The mentor is analyzing your text...";
      break;
    case "error":
      status.textContent = state.uploadStatus.reason;
      break;
    default:
      status.textContent = "";
  }
  return status;
}

function renderComposer(state: ChatViewState, controller: ChatController): HTMLElement {
  const composer = document.createElement("form");
  composer.className = "composer";

  const input = document.createElement("input");
  input.type = "text";
  input.value = state.composer;
  input.placeholder = "Write a message...";
  composer.appendChild(input);

  const send = document.createElement("button");
  send.type = "submit";
  send.textContent = "Send";
  composer.appendChild(send);

  composer.addEventListener("submit", (event) => {
    event.preventDefault();
    void controller.sendMessage(input.value);
  });

  if (controller.canUpload()) {
    const file = document.createElement("input");
    file.type = "file";
    file.accept = ".txt,text/plain";
    file.className = "upload-input";
    file.addEventListener("change", () => {
      const chosen = file.files?.[0];
      if (chosen) {
        void controller.uploadText({
          name: chosen.name,
          type: chosen.type,
          size: chosen.size,
          data: chosen,
        });
      }
    });
    composer.appendChild(file);
  }
  return composer;
}

function renderViewer(state: ChatViewState, controller: ChatController): HTMLElement {
  const viewer = document.createElement("section");
  viewer.className = "viewer";

  const bar = document.createElement("div");
  bar.className = "viewer-bar";

  const download = document.createElement("a");
  download.textContent = "Download";
  download.download = `feedback-${state.document!.documentId}.html`;
  download.href = URL.createObjectURL(
    new Blob([state.document!.html], { type: "text/html" }),
  );
  bar.appendChild(download);

  const close = document.createElement("button");
  close.textContent = "Close";
  close.addEventListener("click", () => controller.closeDocument());
  bar.appendChild(close);
  viewer.appendChild(bar);

  const frame = document.createElement("iframe");
  frame.className = "feedback-frame";
  frame.setAttribute("sandbox", ""); // no scripts, no same-origin
  frame.srcdoc = state.document!.html;
  viewer.appendChild(frame);
  return viewer;
}
