/**
 * Page bootstrap: token entry, session start/resume, render loop.
 * Configuration is limited to the API base URL (meta tag or same
 * origin). The session id is kept in sessionStorage so a reload
 * restores the conversation; the token itself is only ever placed in
 * the Authorization header.
 */

import { ApiClient } from "./api.js";
import { ChatController } from "./controller.js";
import { render } from "./dom.js";

function apiBase(): string {
  const meta = document.querySelector('meta[name="textmentor-api-base"]');
  const configured = meta?.getAttribute("content")?.trim();
  return configured || window.location.origin;
}

window.addEventListener("DOMContentLoaded", () => {
  const login = document.getElementById("login") as HTMLFormElement;
  const tokenInput = document.getElementById("token") as HTMLInputElement;
  const chatRoot = document.getElementById("chat") as HTMLElement;

  login.addEventListener("submit", (event) => {
    event.preventDefault();
    const token = tokenInput.value.trim();
    if (!token) {
      return;
    }
    const controller = new ChatController(new ApiClient(apiBase(), token));
    controller.onChange = (state) => {
      if (state.sessionId) {
        sessionStorage.setItem("textmentor-session", state.sessionId);
      }
      render(chatRoot, state, controller);
    };
    const stored = sessionStorage.getItem("textmentor-session") ?? undefined;
    void controller.start(stored).then((ok) => {
      if (ok) {
        login.classList.add("hidden");
      } else if (stored) {
        // stored session may belong to an older service run; start fresh
        sessionStorage.removeItem("textmentor-session");
        void controller.start().then((retried) => {
          if (retried) login.classList.add("hidden");
        });
      }
    });
  });
});
