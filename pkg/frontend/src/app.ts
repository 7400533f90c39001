/** Hash-routed single-page client. All numbers come from the API. */

import * as api from "./api";
import { escapeHtml } from "./format";
import { renderAttemptPage } from "./render/attempt";
import { McqDraft, renderMcqForm, renderModerationQueue, renderPreview } from "./render/authoring";
import { FilterState, renderCardList, renderFilterPanel } from "./render/cards";
import {
  renderCurrentState,
  renderErrorBanner,
  renderModeToggle,
  renderOverTime,
} from "./render/learner";
import { renderProfile } from "./render/profile";
import type { AttemptResult, Offering, Session } from "./types";

const root = (): HTMLElement => document.getElementById("app")!;

const loadSession = (): Session | null => {
  const raw = localStorage.getItem("peerlearn-session");
  return raw ? (JSON.parse(raw) as Session) : null;
};

const saveSession = (session: Session): void => {
  localStorage.setItem("peerlearn-session", JSON.stringify(session));
  api.configure(API_BASE, session);
};

const API_BASE = (window as { PEERLEARN_API?: string }).PEERLEARN_API ?? "";
api.configure(API_BASE, loadSession());

const filterState: FilterState = {
  kinds: new Set(),
  topics: new Set(),
  status_filter: new Set(),
  keywords: "",
  sort_key: "recommended",
};
let vizMode: "current" | "overtime" = "current";

const withErrorBanner = async (container: HTMLElement, action: () => Promise<void>) => {
  try {
    await action();
  } catch (err) {
    const message = err instanceof Error ? err.message : "request failed";
    container.innerHTML = renderErrorBanner(message);
    container.querySelector("[data-action=retry]")?.addEventListener("click", () => {
      void withErrorBanner(container, action);
    });
  }
};

// ---------------------------------------------------------------------------
// views
// ---------------------------------------------------------------------------

const showLogin = (): void => {
  root().innerHTML = `
  <section class="login-page">
    <h1>peerlearn</h1>
    <form id="register-form">
      <label>Display name <input name="display_name" required></label>
      <button type="submit" class="primary">Create account</button>
    </form>
    <form id="login-form">
      <label>Existing user id <input name="user_id"></label>
      <button type="submit">Sign in</button>
    </form>
  </section>`;
  document.getElementById("register-form")!.addEventListener("submit", (e) => {
    e.preventDefault();
    const name = new FormData(e.target as HTMLFormElement).get("display_name") as string;
    void withErrorBanner(root(), async () => {
      saveSession(await api.register(name));
      location.hash = "#/offerings";
    });
  });
  document.getElementById("login-form")!.addEventListener("submit", (e) => {
    e.preventDefault();
    const userId = new FormData(e.target as HTMLFormElement).get("user_id") as string;
    void withErrorBanner(root(), async () => {
      saveSession(await api.login(userId));
      location.hash = "#/offerings";
    });
  });
};

const showOfferings = (): void => {
  void withErrorBanner(root(), async () => {
    const offerings = await api.listOfferings();
    const rows = offerings
      .map(
        (o) => `
      <li><a href="#/offering/${escapeHtml(o.id)}">
        ${escapeHtml(o.course_code)} — ${escapeHtml(o.course_name)}
        (${escapeHtml(o.semester)})</a></li>`,
      )
      .join("");
    root().innerHTML = `
    <section>
      <h1>Your offerings</h1>
      <ul class="offering-list">${rows || "<li>None yet.</li>"}</ul>
      <h2>Join with an access code</h2>
      <form id="enrol-form">
        <input name="offering_id" placeholder="offering id" required>
        <input name="code" placeholder="access code" required>
        <button type="submit">Enrol</button>
      </form>
      <h2>Create an offering</h2>
      <form id="create-form">
        <input name="course_code" placeholder="course code" required>
        <input name="course_name" placeholder="course name" required>
        <input name="topics" placeholder="topics, comma separated" required>
        <button type="submit" class="primary">Create</button>
      </form>
    </section>`;
    document.getElementById("enrol-form")!.addEventListener("submit", (e) => {
      e.preventDefault();
      const data = new FormData(e.target as HTMLFormElement);
      void withErrorBanner(root(), async () => {
        await api.enrol(data.get("offering_id") as string, data.get("code") as string);
        location.hash = `#/offering/${data.get("offering_id")}`;
      });
    });
    document.getElementById("create-form")!.addEventListener("submit", (e) => {
      e.preventDefault();
      const data = new FormData(e.target as HTMLFormElement);
      void withErrorBanner(root(), async () => {
        const offering = await api.createOffering({
          course_code: data.get("course_code"),
          course_name: data.get("course_name"),
          topics: (data.get("topics") as string).split(",").map((t) => t.trim()),
        });
        location.hash = `#/offering/${offering.id}`;
      });
    });
  });
};

const searchParamsFromState = () => ({
  kinds: [...filterState.kinds].join(","),
  topics: [...filterState.topics].join(","),
  status_filter: [...filterState.status_filter].join(","),
  keywords: filterState.keywords,
  sort_key: filterState.sort_key,
});

/** Main page: open learner model on top, search and recommendation below. */
const showOffering = (offeringId: string): void => {
  void withErrorBanner(root(), async () => {
    const offering = await api.getOffering(offeringId);
    const state = await api.knowledgeState(offeringId, vizMode);
    const cards = await api.searchResources(offeringId, searchParamsFromState());
    const chart =
      state.mode === "current" ? renderCurrentState(state) : renderOverTime(state);
    root().innerHTML = `
    <nav class="crumbs">
      <a href="#/offerings">‹ offerings</a>
      <a href="#/offering/${escapeHtml(offeringId)}/author">Author</a>
      <a href="#/offering/${escapeHtml(offeringId)}/moderation">Moderation</a>
      <a href="#/offering/${escapeHtml(offeringId)}/profile">Profile</a>
    </nav>
    <h1>${escapeHtml(offering.course_code)} — ${escapeHtml(offering.course_name)}</h1>
    <section class="olm-panel">
      ${renderModeToggle(vizMode)}
      <div id="olm-chart">${chart}</div>
    </section>
    <section class="repository-panel">
      <div id="filters">${renderFilterPanel(offering.topics, filterState)}</div>
      <div id="results">${renderCardList(cards, offering.topics)}</div>
    </section>`;

    document.getElementById("viz-mode")!.addEventListener("change", (e) => {
      vizMode = (e.target as HTMLSelectElement).value as typeof vizMode;
      showOffering(offeringId);
    });
    const panel = document.getElementById("filter-panel")!;
    panel.addEventListener("change", () => {
      const form = panel as HTMLFormElement;
      const collect = (name: string): Set<string> =>
        new Set(
          [...form.querySelectorAll<HTMLInputElement>(`input[name=${name}]:checked`)].map(
            (el) => el.value,
          ),
        );
      filterState.kinds = collect("kinds");
      filterState.topics = collect("topics");
      filterState.status_filter = collect("status_filter");
      filterState.keywords = (form.querySelector("[name=keywords]") as HTMLInputElement).value;
      filterState.sort_key = (form.querySelector("[name=sort_key]") as HTMLSelectElement).value;
      showOffering(offeringId);
    });
    panel.addEventListener("submit", (e) => e.preventDefault());
  });
};

const showResource = (resourceId: string, result: AttemptResult | null = null): void => {
  void withErrorBanner(root(), async () => {
    const resource = await api.getResource(resourceId);
    root().innerHTML = `
    <nav class="crumbs"><a href="#/offering/${escapeHtml(resource.offering_id)}">‹ back</a></nav>
    ${renderAttemptPage(resource, result)}`;

    const form = document.getElementById("attempt-form");
    form?.addEventListener("submit", (e) => {
      e.preventDefault();
      const picked = (form as HTMLFormElement).querySelector<HTMLInputElement>(
        "input[name=choice]:checked",
      );
      if (!picked) return;
      void withErrorBanner(root(), async () => {
        const outcome = await api.submitAttempt(resourceId, Number(picked.value));
        showResource(resourceId, outcome);
      });
    });
    if (resource.kind !== "mcq" && result === null) {
      // viewing a note or worked example records engagement
      void api.submitAttempt(resourceId, null).then(
        () => undefined,
        () => undefined,
      );
    }
    for (const star of document.querySelectorAll<HTMLButtonElement>(".star:not([disabled])")) {
      star.addEventListener("click", () => {
        void withErrorBanner(root(), async () => {
          await api.rateResource(resourceId, Number(star.dataset.stars));
          showResource(resourceId, result);
        });
      });
    }
    document.getElementById("comment-form")?.addEventListener("submit", (e) => {
      e.preventDefault();
      const text = new FormData(e.target as HTMLFormElement).get("text") as string;
      if (!text.trim()) return;
      void withErrorBanner(root(), async () => {
        await api.commentResource(resourceId, text);
        showResource(resourceId, result);
      });
    });
    document.querySelector("[data-action=flag]")?.addEventListener("click", () => {
      const reason = prompt("Why is this resource inappropriate?");
      if (!reason) return;
      void withErrorBanner(root(), async () => {
        await api.flagResource(resourceId, reason);
        showResource(resourceId, result);
      });
    });
  });
};

const emptyDraft = (): McqDraft => ({
  body: "",
  tags: [],
  choices: ["", "", "", ""],
  correct_index: 0,
  explanation: "",
});

const showAuthoring = (offeringId: string): void => {
  void withErrorBanner(root(), async () => {
    const offering = await api.getOffering(offeringId);
    const draft = emptyDraft();
    root().innerHTML = `
    <nav class="crumbs"><a href="#/offering/${escapeHtml(offeringId)}">‹ back</a></nav>
    <h1>Author a question</h1>
    ${renderMcqForm(offering.topics, draft)}`;
    wireAuthoring(offeringId, offering, draft);
  });
};

const wireAuthoring = (offeringId: string, offering: Offering, draft: McqDraft): void => {
  const form = document.getElementById("author-form") as HTMLFormElement;
  const readDraft = (): McqDraft => ({
    body: (form.querySelector("[name=body]") as HTMLTextAreaElement).value,
    tags: [...form.querySelectorAll<HTMLInputElement>("input[name=tags]:checked")].map(
      (el) => el.value,
    ),
    choices: [...form.querySelectorAll<HTMLInputElement>("input[name=choice]")].map(
      (el) => el.value,
    ),
    correct_index: Number(
      form.querySelector<HTMLInputElement>("input[name=correct_index]:checked")?.value ?? 0,
    ),
    explanation: (form.querySelector("[name=explanation]") as HTMLTextAreaElement).value,
  });

  form.querySelector("[data-action=preview]")!.addEventListener("click", () => {
    const pane = document.getElementById("author-preview")!;
    pane.hidden = false;
    pane.innerHTML = renderPreview(readDraft());
  });
  form.querySelector("[data-action=add-choice]")!.addEventListener("click", () => {
    const current = readDraft();
    current.choices.push("");
    root().querySelector(".author-form")!.outerHTML = renderMcqForm(offering.topics, current);
    wireAuthoring(offeringId, offering, current);
  });
  const send = (asDraft: boolean) => {
    const current = readDraft();
    void withErrorBanner(root(), async () => {
      await api.authorResource(offeringId, {
        kind: "mcq",
        body: current.body,
        tags: current.tags,
        content: {
          choices: current.choices.filter((c) => c.trim() !== ""),
          correct_index: current.correct_index,
          explanation: current.explanation,
        },
        draft: asDraft,
      });
      location.hash = `#/offering/${offeringId}`;
    });
  };
  form.querySelector("[data-action=save-draft]")!.addEventListener("click", () => send(true));
  form.addEventListener("submit", (e) => {
    e.preventDefault();
    send(false);
  });
};

const showModeration = (offeringId: string): void => {
  void withErrorBanner(root(), async () => {
    const pending = await api.moderationQueue(offeringId);
    root().innerHTML = `
    <nav class="crumbs"><a href="#/offering/${escapeHtml(offeringId)}">‹ back</a></nav>
    <h1>Moderation queue</h1>
    ${renderModerationQueue(pending)}`;
    for (const button of document.querySelectorAll<HTMLButtonElement>("[data-action=approve]")) {
      button.addEventListener("click", () => {
        void withErrorBanner(root(), async () => {
          await api.moderateResource(button.dataset.resource!, "approve");
          showModeration(offeringId);
        });
      });
    }
    for (const button of document.querySelectorAll<HTMLButtonElement>("[data-action=reject]")) {
      button.addEventListener("click", () => {
        const note = prompt("Note to the author") ?? "";
        void withErrorBanner(root(), async () => {
          await api.moderateResource(button.dataset.resource!, "reject", note);
          showModeration(offeringId);
        });
      });
    }
  });
};

const showProfile = (offeringId: string): void => {
  void withErrorBanner(root(), async () => {
    await api.evaluateBadges(offeringId).catch(() => undefined);
    const data = await api.profile(offeringId);
    root().innerHTML = `
    <nav class="crumbs"><a href="#/offering/${escapeHtml(offeringId)}">‹ back</a></nav>
    <h1>Profile</h1>
    ${renderProfile(data)}`;
  });
};

// ---------------------------------------------------------------------------
// router
// ---------------------------------------------------------------------------

const route = (): void => {
  const hash = location.hash || "#/offerings";
  if (!api.currentSession() && hash !== "#/login") {
    location.hash = "#/login";
    return;
  }
  const parts = hash.slice(2).split("/");
  if (parts[0] === "login") return showLogin();
  if (parts[0] === "offerings") return showOfferings();
  if (parts[0] === "offering" && parts[2] === "author") return showAuthoring(parts[1]);
  if (parts[0] === "offering" && parts[2] === "moderation") return showModeration(parts[1]);
  if (parts[0] === "offering" && parts[2] === "profile") return showProfile(parts[1]);
  if (parts[0] === "offering") return showOffering(parts[1]);
  if (parts[0] === "resource") return showResource(parts[1]);
  root().innerHTML = `<div class="empty-state">Page not found.</div>`;
};

window.addEventListener("hashchange", route);
window.addEventListener("DOMContentLoaded", route);
