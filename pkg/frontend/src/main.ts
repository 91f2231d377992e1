import { AnnotateScreen } from "./annotate.js";
import { ApiClient, RoundView, SectionView, TextbookView } from "./api.js";
import { loadDashboard, rowSummary } from "./dashboard.js";
import { el, renderBody, selectionOffsets } from "./dom.js";
import { QualifyScreen } from "./qualify.js";
import { ResolutionBoard, CloseScreen } from "./resolution.js";
import { ReviewScreen } from "./review.js";
import { ClientSession } from "./session.js";

interface Screens {
  annotate: AnnotateScreen | null;
  review: ReviewScreen | null;
  board: ResolutionBoard | null;
  close: CloseScreen | null;
  qualify: QualifyScreen | null;
}

const screens: Screens = { annotate: null, review: null, board: null, close: null, qualify: null };
let session: ClientSession | null = null;
let sections: SectionView[] = [];

function root(): HTMLElement {
  const node = document.getElementById("app");
  if (!node) throw new Error("missing #app container");
  return node;
}

function connectForm(): HTMLElement {
  const form = el("form", { class: "connect" });
  const base = el("input", { placeholder: "server url", value: localStorage.getItem("ska.base") ?? "http://127.0.0.1:8000" }) as HTMLInputElement;
  const token = el("input", { placeholder: "your access token", type: "password" }) as HTMLInputElement;
  const who = el("input", { placeholder: "annotator id", value: localStorage.getItem("ska.who") ?? "" }) as HTMLInputElement;
  form.append(
    el("h1", {}, "concept annotation workbench"),
    base, who, token,
    el("button", { type: "submit" }, "connect"),
  );
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    localStorage.setItem("ska.base", base.value);
    localStorage.setItem("ska.who", who.value);
    const api = new ApiClient(base.value.replace(/\/$/, ""), token.value);
    session = new ClientSession(api, who.value);
    void enterRound();
  });
  return form;
}

/** Join the first round this annotator participates in that is still open. */
async function enterRound(): Promise<void> {
  const s = session;
  if (!s) return;
  try {
    const rounds = await s.api.listRounds();
    const mine = rounds.filter(
      (r) => r.participants.includes(s.annotatorId) && r.phase !== "closed",
    );
    const active = mine[0];
    if (active) {
      s.reconcile(active);
      await loadSections(active);
    }
  } catch (err) {
    s.surface(err);
  }
  resetScreens();
  await draw();
}

async function loadSections(round: RoundView): Promise<void> {
  const s = session;
  if (!s) return;
  const textbookId = round.chapter_id.split(".")[0] ?? round.chapter_id;
  try {
    const book: TextbookView = await s.api.getTextbook(textbookId);
    const chapter = book.chapters.find((c) => c.id === round.chapter_id);
    sections = chapter ? chapter.sections : [];
  } catch (err) {
    s.surface(err);
  }
}

function resetScreens(): void {
  screens.annotate = null;
  screens.review = null;
  screens.board = null;
  screens.close = null;
  screens.qualify = null;
}

function messagesBlock(s: ClientSession): HTMLElement {
  const wrap = el("div", { class: "messages" });
  if (s.readOnly) {
    wrap.append(el("div", { class: "banner offline" }, "offline: read-only view"));
  }
  for (const message of s.messages.slice(-6)) {
    wrap.append(el("div", { class: `note ${message.kind}` }, message.text));
  }
  if (s.staleRound) {
    const refresh = el("button", {}, "refresh round");
    refresh.addEventListener("click", () => {
      void s.refreshRound().then(() => {
        resetScreens();
        void draw();
      });
    });
    wrap.append(el("div", { class: "banner stale" }, "round state changed on the server ", refresh));
  }
  return wrap;
}

function annotateView(s: ClientSession): HTMLElement {
  const screen = (screens.annotate ??= new AnnotateScreen(s, sections));
  const wrap = el("div", { class: "annotate" });
  for (const section of sections) {
    const bodyEl = el("div", { class: "body", "data-section": section.id });
    renderBody(bodyEl, section.body, screen.chips(section.id));
    bodyEl.addEventListener("mouseup", () => {
      const offsets = selectionOffsets(bodyEl);
      if (offsets) {
        screen.addSelection(section.id, offsets.start, offsets.end);
        void draw();
      }
    });
    const chips = el("div", { class: "chips" });
    screen.chips(section.id).forEach((tag) => {
      const chip = el("span", { class: "chip" }, tag.concept + " ");
      const remove = el("button", {}, "x");
      remove.addEventListener("click", () => {
        screen.removeTag(screen.tags.indexOf(tag));
        void draw();
      });
      chip.append(remove);
      chips.append(chip);
    });
    wrap.append(el("h3", {}, section.heading), bodyEl, chips);
  }
  const submit = el("button", {}, `submit ${screen.tags.length} tags`);
  submit.addEventListener("click", () => {
    void screen.submit().then(() => draw());
  });
  wrap.append(submit);
  return wrap;
}

function reviewView(s: ClientSession): HTMLElement {
  const screen = (screens.review ??= new ReviewScreen(s, sections));
  const wrap = el("div", { class: "review" });
  if (!screen.loaded) {
    void screen.load().then(() => draw());
    wrap.append(el("p", {}, "loading peer tags..."));
    return wrap;
  }
  if (screen.nothingMissed) {
    wrap.append(el("p", { class: "empty" }, "nothing missed: your tags already cover every peer tag"));
  }
  screen.items.forEach((item, index) => {
    const row = el("div", { class: "candidate" });
    row.append(
      el("b", {}, item.candidate.concept),
      el("span", {}, ` in ${item.candidate.section_id} (tagged by ${item.candidate.tagged_by.join(", ")})`),
    );
    const accept = el("button", {}, item.verdict === "accept" ? "[accept]" : "accept");
    const reject = el("button", {}, item.verdict === "reject" ? "[reject]" : "reject");
    accept.addEventListener("click", () => {
      screen.accept(index);
      void draw();
    });
    reject.addEventListener("click", () => {
      screen.reject(index);
      void draw();
    });
    row.append(accept, reject);
    if (item.verdict === "accept") {
      const body = sections.find((x) => x.id === item.candidate.section_id);
      if (body) {
        const bodyEl = el("div", { class: "body locate" });
        renderBody(bodyEl, body.body, item.located ? [item.located] : []);
        bodyEl.addEventListener("mouseup", () => {
          const offsets = selectionOffsets(bodyEl);
          if (offsets) {
            screen.locate(index, offsets.start, offsets.end);
            void draw();
          }
        });
        row.append(el("p", {}, "select the concept in the text:"), bodyEl);
        if (item.warning) row.append(el("p", { class: "warning" }, item.warning));
      }
    }
    wrap.append(row);
  });
  const submit = el("button", {}, "submit review") as HTMLButtonElement;
  submit.disabled = !screen.canSubmit;
  submit.addEventListener("click", () => {
    void screen.submit().then(() => draw());
  });
  wrap.append(submit);
  return wrap;
}

function boardView(s: ClientSession): HTMLElement {
  const board = (screens.board ??= new ResolutionBoard(s));
  const wrap = el("div", { class: "board" });
  if (!board.loaded) {
    void board.load().then(() => draw());
    wrap.append(el("p", {}, "loading disagreement cases..."));
    return wrap;
  }
  board.cases.forEach((c, index) => {
    const row = el("div", { class: "case" });
    row.append(
      el("b", {}, c.data.concept),
      el("span", {}, ` in ${c.data.section_id}, support ${c.data.support} (${c.data.tagged_by.join(", ")})`),
    );
    (["promote", "drop", "open"] as const).forEach((choice) => {
      const button = el("button", {}, c.choice === choice ? `[${choice}]` : choice);
      button.addEventListener("click", () => {
        board.choose(index, choice);
        void draw();
      });
      row.append(button);
    });
    wrap.append(row);
  });
  const submit = el("button", {}, `record ${board.decided} resolutions`);
  submit.addEventListener("click", () => {
    void board.submit().then(() => draw());
  });
  wrap.append(submit);
  return wrap;
}

function closeView(s: ClientSession): HTMLElement {
  const screen = (screens.close ??= new CloseScreen(s));
  const wrap = el("div", { class: "close" });
  const input = el("textarea", { placeholder: "new codebook rule..." }) as HTMLTextAreaElement;
  const add = el("button", {}, "add rule");
  add.addEventListener("click", () => {
    if (input.value.trim()) {
      screen.addRule(input.value.trim());
      input.value = "";
      void draw();
    }
  });
  const list = el("ul", {});
  screen.changes.forEach((change, index) => {
    const item = el("li", {}, `${change.action}: ${change.text} `);
    const remove = el("button", {}, "x");
    remove.addEventListener("click", () => {
      screen.removeChange(index);
      void draw();
    });
    item.append(remove);
    list.append(item);
  });
  const submit = el("button", {}, `close round with ${screen.changes.length} changes`);
  submit.addEventListener("click", () => {
    void screen.submit().then(() => draw());
  });
  wrap.append(el("p", {}, "codebook changes for this round:"), input, add, list, submit);
  return wrap;
}

async function dashboardView(s: ClientSession): Promise<HTMLElement> {
  const wrap = el("div", { class: "dashboard" });
  try {
    const data = await loadDashboard(s.api);
    const list = el("ul", {});
    for (const row of data.rows) {
      list.append(el("li", {}, rowSummary(row)));
    }
    wrap.append(el("h2", {}, "agreement by round"), list);
    if (data.convergence) {
      const at = data.convergence.converged_at;
      wrap.append(
        el("p", {}, at === null ? "codebook still growing" : `codebook converged at round ${at}`),
      );
    } else if (data.convergenceNote) {
      wrap.append(el("p", {}, data.convergenceNote));
    }
    wrap.append(el("h2", {}, `codebook (${data.rules.length} rules)`));
    const rules = el("ol", {});
    for (const rule of data.rules) {
      rules.append(el("li", {}, `${rule.id}: ${rule.text}`));
    }
    wrap.append(rules);
  } catch (err) {
    s.surface(err);
  }
  return wrap;
}

async function draw(): Promise<void> {
  const host = root();
  host.textContent = "";
  const s = session;
  if (!s) {
    host.append(connectForm());
    return;
  }
  host.append(messagesBlock(s));
  const round = s.activeRound;
  host.append(
    el(
      "p",
      { class: "status" },
      round
        ? `round ${round.id} (${round.chapter_id}) phase ${round.phase}, you are ${s.annotatorId}`
        : `no open round for ${s.annotatorId}`,
    ),
  );
  switch (s.view) {
    case "annotate":
      host.append(annotateView(s));
      break;
    case "review":
      host.append(reviewView(s));
      break;
    case "resolve":
      host.append(boardView(s));
      break;
    case "close":
      host.append(closeView(s));
      break;
    case "waiting": {
      const refresh = el("button", {}, "check again");
      refresh.addEventListener("click", () => {
        void s.refreshRound().then(() => {
          resetScreens();
          void draw();
        });
      });
      host.append(el("p", {}, "submitted; waiting for the rest of the group ", refresh));
      break;
    }
    case "dashboard":
    case "idle":
      host.append(await dashboardView(s));
      break;
  }
}

document.addEventListener("DOMContentLoaded", () => {
  void draw();
});
