// @vitest-environment jsdom
import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { ChatController } from "../src/controller.js";
import { render } from "../src/dom.js";
import { emptyState } from "../src/state.js";
import { FakeApi } from "./fake_api.js";

let root: HTMLElement;
let controller: ChatController;
let fake: FakeApi;

beforeEach(() => {
  document.body.innerHTML = '<div id="root"></div>';
  root = document.getElementById("root") as HTMLElement;
  fake = new FakeApi();
  controller = new ChatController(new ApiClient("http://t", "tok", fake.fetch));
});

describe("render", () => {
  it("shows messages as speaker bubbles in order", () => {
    controller.state = {
      ...emptyState(),
      sessionId: "s",
      dialogState: "TaskOffered",
      messages: [
        { speaker: "bot", kind: "text", content: "welcome", at: "t1" },
        { speaker: "student", kind: "text", content: "hi there", at: "t2" },
      ],
    };
    render(root, controller.state, controller);
    const bubbles = [...root.querySelectorAll(".bubble")];
    expect(bubbles.map((b) => b.textContent)).toEqual(["welcome", "hi there"]);
    expect(bubbles[0]?.classList.contains("bot")).toBe(true);
    expect(bubbles[1]?.classList.contains("student")).toBe(true);
  });

  it("shows the upload input only when the dialog accepts uploads", () => {
    controller.state = { ...emptyState(), sessionId: "s", dialogState: "Greeting" };
    render(root, controller.state, controller);
    expect(root.querySelector(".upload-input")).toBeNull();

    controller.state = { ...emptyState(), sessionId: "s", dialogState: "AwaitingSubmission" };
    render(root, controller.state, controller);
    expect(root.querySelector(".upload-input")).not.toBeNull();
  });

  it("renders a feedback link button carrying the document id", () => {
    controller.state = {
      ...emptyState(),
      sessionId: "s",
      dialogState: "FeedbackDelivered",
      messages: [
        {
          speaker: "bot",
          kind: "feedback-link",
          content: "Your feedback is ready.",
          at: "t",
          documentId: "doc7",
        },
      ],
    };
    render(root, controller.state, controller);
    const button = root.querySelector(".open-feedback") as HTMLButtonElement;
    expect(button).not.toBeNull();
    expect(button.dataset.documentId).toBe("doc7");
  });

  it("shows the banner and the upload error reason", () => {
    controller.state = {
      ...emptyState(),
      banner: "Sign-in failed: bad token",
      uploadStatus: { phase: "error", reason: "text too short" },
    };
    render(root, controller.state, controller);
    expect(root.querySelector(".banner")?.textContent).toContain("Sign-in failed");
    expect(root.querySelector(".upload-status")?.textContent).toBe("text too short");
  });

  it("opens the document in a sandboxed iframe with the exact payload", () => {
    const html = '<html><body><span data-measure="concept_match">0.42</span></body></html>';
    controller.state = {
      ...emptyState(),
      sessionId: "s",
      dialogState: "FeedbackDelivered",
      document: { documentId: "doc7", html },
    };
    render(root, controller.state, controller);
    const frame = root.querySelector(".feedback-frame") as HTMLIFrameElement;
    expect(frame.getAttribute("sandbox")).toBe("");
    expect(frame.srcdoc).toBe(html);
    const download = root.querySelector(".viewer-bar a") as HTMLAnchorElement;
    expect(download.download).toContain("doc7");
  });
});
