/**
 * Grading view: one item at a time, rubric-constrained score entry.
 *
 * The five level buttons (and keyboard shortcuts 1-5) are the only way to
 * set a score, so the client cannot produce a value outside the rubric
 * range. Submission is awaited and the server decides what comes next; no
 * client-side session state survives a submitted grade.
 */

import {
  fetchNextItem,
  fetchProgress,
  GradingItem,
  submitGrade,
} from "./api";

const SCORES = [1, 2, 3, 4, 5] as const;

type Phase = "loading" | "grading" | "done" | "fatal";

export class GradingApp {
  private readonly root: HTMLElement;
  private readonly grader: string;
  private readonly doc: Document;

  private phase: Phase = "loading";
  private item: GradingItem | null = null;
  private selectedScore: number | null = null;
  private submitting = false;
  private banner = "";
  private progressText = "";
  private reasonDraft = "";

  constructor(root: HTMLElement, grader: string) {
    this.root = root;
    this.grader = grader;
    this.doc = root.ownerDocument;
    this.doc.addEventListener("keydown", (event) => this.onKeydown(event));
  }

  async start(): Promise<void> {
    await this.refreshProgress();
    await this.loadNext();
  }

  private async loadNext(): Promise<void> {
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

  private async refreshProgress(): Promise<void> {
    try {
      const progress = await fetchProgress();
      const mine = progress.graders.find((g) => g.grader_id === this.grader);
      if (mine) {
        this.progressText = `${mine.graded} / ${mine.total} graded`;
      }
    } catch {
      // Progress display is cosmetic; grading still works without it.
    }
  }

  private onKeydown(event: KeyboardEvent): void {
    if (this.phase !== "grading" || this.submitting) {
      return;
    }
    const target = event.target as HTMLElement | null;
    if (target && target.tagName === "TEXTAREA") {
      return;
    }
    const score = Number.parseInt(event.key, 10);
    if (SCORES.includes(score as (typeof SCORES)[number])) {
      this.select(score);
    }
  }

  private select(score: number): void {
    this.selectedScore = score;
    this.banner = "";
    this.render();
  }

  private async submit(): Promise<void> {
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
      this.reasonDraft.trim(),
    );
    this.submitting = false;
    if (result.ok) {
      await this.refreshProgress();
      await this.loadNext();
      return;
    }
    // 409/422/network: show the error and stay on the item.
    this.banner = `${result.error.message}${result.status ? ` (HTTP ${result.status})` : ""}`;
    this.render();
  }

  /** Re-renders the whole view from state; small enough to stay simple. */
  private render(): void {
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
    session.append(" · ", progress);
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
      note.textContent = "Loading…";
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
      this.pane("answer", "Application response", item.answer),
    );

    const rubric = doc.createElement("section");
    rubric.className = "pane rubric";
    const rubricTitle = doc.createElement("h2");
    rubricTitle.textContent = "Grading rubric";
    const rubricText = doc.createElement("pre");
    rubricText.className = "rubric-text";
    rubricText.textContent = item.rubric; // verbatim as served
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
    submit.textContent = this.submitting ? "Submitting…" : "Submit grade";
    submit.disabled = this.selectedScore === null || this.submitting;
    submit.addEventListener("click", () => void this.submit());
    submitRow.append(reason, submit);

    main.append(head, question, compare, rubric, submitRow);
    this.root.append(main);
  }

  private pane(kind: string, heading: string, body: string): HTMLElement {
    const section = this.doc.createElement("section");
    section.className = `pane ${kind}`;
    const title = this.doc.createElement("h2");
    title.textContent = heading;
    const text = this.doc.createElement("pre");
    text.textContent = body;
    section.append(title, text);
    return section;
  }
}
