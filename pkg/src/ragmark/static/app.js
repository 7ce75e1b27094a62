// src/api.ts
async function errorBody(response) {
  try {
    const body = await response.json();
    if (body && typeof body.message === "string") {
      return body;
    }
  } catch {
  }
  return { code: "http_error", message: `HTTP ${response.status}` };
}
async function fetchNextItem(grader) {
  const response = await fetch(`/api/next?grader=${encodeURIComponent(grader)}`);
  if (response.status === 204) {
    return null;
  }
  if (!response.ok) {
    const error = await errorBody(response);
    throw new Error(error.message);
  }
  return await response.json();
}
async function submitGrade(grader, questionId, score, reason) {
  let response;
  try {
    response = await fetch("/api/grades", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        grader_id: grader,
        question_id: questionId,
        score,
        reason
      })
    });
  } catch {
    return {
      ok: false,
      status: 0,
      error: { code: "network", message: "Network failure; grade not saved. Retry." }
    };
  }
  if (response.status === 201) {
    return { ok: true, grade: await response.json() };
  }
  return { ok: false, status: response.status, error: await errorBody(response) };
}
async function fetchProgress() {
  const response = await fetch("/api/progress");
  if (!response.ok) {
    throw new Error(`progress failed: HTTP ${response.status}`);
  }
  return await response.json();
}

// src/app.ts
var SCORES = [1, 2, 3, 4, 5];
var GradingApp = class {
  constructor(root2, grader) {
    this.phase = "loading";
    this.item = null;
    this.selectedScore = null;
    this.submitting = false;
    this.banner = "";
    this.progressText = "";
    this.reasonDraft = "";
    this.root = root2;
    this.grader = grader;
    this.doc = root2.ownerDocument;
    this.doc.addEventListener("keydown", (event) => this.onKeydown(event));
  }
  async start() {
    await this.refreshProgress();
    await this.loadNext();
  }
  async loadNext() {
    this.phase = "loading";
    this.render();
    try {
      this.item = await fetchNextItem(this.grader);
    } catch (err) {
      this.phase = "fatal";
      this.banner = err instanceof Error ? err.message : String(err);
      this.render();
      return;
    }
    this.selectedScore = null;
    this.reasonDraft = "";
    this.phase = this.item === null ? "done" : "grading";
    this.render();
  }
  async refreshProgress() {
    try {
      const progress = await fetchProgress();
      const mine = progress.graders.find((g) => g.grader_id === this.grader);
      if (mine) {
        this.progressText = `${mine.graded} / ${mine.total} graded`;
      }
    } catch {
    }
  }
  onKeydown(event) {
    if (this.phase !== "grading" || this.submitting) {
      return;
    }
    const target = event.target;
    if (target && target.tagName === "TEXTAREA") {
      return;
    }
    const score = Number.parseInt(event.key, 10);
    if (SCORES.includes(score)) {
      this.select(score);
    }
  }
  select(score) {
    this.selectedScore = score;
    this.banner = "";
    this.render();
  }
  async submit() {
    if (!this.item || this.selectedScore === null || this.submitting) {
      return;
    }
    this.submitting = true;
    this.banner = "";
    this.render();
    const result = await submitGrade(
      this.grader,
      this.item.question_id,
      this.selectedScore,
      this.reasonDraft.trim()
    );
    this.submitting = false;
    if (result.ok) {
      await this.refreshProgress();
      await this.loadNext();
      return;
    }
    this.banner = `${result.error.message}${result.status ? ` (HTTP ${result.status})` : ""}`;
    this.render();
  }
  /** Re-renders the whole view from state; small enough to stay simple. */
  render() {
    const doc = this.doc;
    this.root.textContent = "";
    const header = doc.createElement("header");
    const title = doc.createElement("h1");
    title.textContent = "Answer grading";
    const session = doc.createElement("div");
    session.className = "session";
    session.textContent = `grader: ${this.grader}`;
    const progress = doc.createElement("span");
    progress.className = "progress";
    progress.textContent = this.progressText;
    session.append(" \xB7 ", progress);
    header.append(title, session);
    this.root.append(header);
    if (this.banner) {
      const banner = doc.createElement("div");
      banner.className = "banner";
      banner.setAttribute("role", "alert");
      banner.textContent = this.banner;
      this.root.append(banner);
    }
    if (this.phase === "loading") {
      const note = doc.createElement("p");
      note.className = "loading";
      note.textContent = "Loading\u2026";
      this.root.append(note);
      return;
    }
    if (this.phase === "done") {
      const done = doc.createElement("section");
      done.className = "done";
      const heading = doc.createElement("h2");
      heading.textContent = "All items graded";
      const note = doc.createElement("p");
      note.textContent = "Thank you: this session is complete.";
      done.append(heading, note);
      this.root.append(done);
      return;
    }
    if (this.phase === "fatal" || !this.item) {
      return;
    }
    const item = this.item;
    const main = doc.createElement("main");
    main.className = "grading";
    const head = doc.createElement("div");
    head.className = "item-head";
    const badge = doc.createElement("span");
    badge.className = "badge subject";
    badge.textContent = item.subject_area;
    const qid = doc.createElement("span");
    qid.className = "qid";
    qid.textContent = item.question_id;
    head.append(badge, qid);
    const question = this.pane("question", "Question", item.question);
    const compare = doc.createElement("div");
    compare.className = "compare";
    compare.append(
      this.pane("label", "Label (reference answer)", item.label),
      this.pane("answer", "Application response", item.answer)
    );
    const rubric = doc.createElement("section");
    rubric.className = "pane rubric";
    const rubricTitle = doc.createElement("h2");
    rubricTitle.textContent = "Grading rubric";
    const rubricText = doc.createElement("pre");
    rubricText.className = "rubric-text";
    rubricText.textContent = item.rubric;
    const levels = doc.createElement("div");
    levels.className = "levels";
    for (const score of SCORES) {
      const button = doc.createElement("button");
      button.type = "button";
      button.className = "level";
      button.dataset.score = String(score);
      button.textContent = String(score);
      if (score === this.selectedScore) {
        button.classList.add("selected");
      }
      button.addEventListener("click", () => this.select(score));
      levels.append(button);
    }
    rubric.append(rubricTitle, rubricText, levels);
    const submitRow = doc.createElement("section");
    submitRow.className = "submit-row";
    const reason = doc.createElement("textarea");
    reason.className = "reason";
    reason.placeholder = "Reason (optional)";
    reason.value = this.reasonDraft;
    reason.addEventListener("input", () => {
      this.reasonDraft = reason.value;
    });
    const submit = doc.createElement("button");
    submit.type = "button";
    submit.className = "submit";
    submit.textContent = this.submitting ? "Submitting\u2026" : "Submit grade";
    submit.disabled = this.selectedScore === null || this.submitting;
    submit.addEventListener("click", () => void this.submit());
    submitRow.append(reason, submit);
    main.append(head, question, compare, rubric, submitRow);
    this.root.append(main);
  }
  pane(kind, heading, body) {
    const section = this.doc.createElement("section");
    section.className = `pane ${kind}`;
    const title = this.doc.createElement("h2");
    title.textContent = heading;
    const text = this.doc.createElement("pre");
    text.textContent = body;
    section.append(title, text);
    return section;
  }
};

// src/main.ts
function graderFromUrl() {
  return new URLSearchParams(window.location.search).get("grader") ?? "";
}
function renderGraderForm(root2) {
  const form = document.createElement("form");
  form.className = "grader-form";
  const heading = document.createElement("h1");
  heading.textContent = "Answer grading";
  const label = document.createElement("label");
  label.textContent = "Registered grader id";
  const input = document.createElement("input");
  input.name = "grader";
  input.required = true;
  input.placeholder = "e.g. alice";
  label.append(input);
  const go = document.createElement("button");
  go.type = "submit";
  go.textContent = "Start grading";
  form.append(heading, label, go);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const grader = input.value.trim();
    if (grader) {
      window.location.search = `?grader=${encodeURIComponent(grader)}`;
    }
  });
  root2.append(form);
}
var root = document.getElementById("root");
if (root) {
  const grader = graderFromUrl();
  if (grader) {
    void new GradingApp(root, grader).start();
  } else {
    renderGraderForm(root);
  }
}
