import { GradingApp } from "./app";

function graderFromUrl(): string {
  return new URLSearchParams(window.location.search).get("grader") ?? "";
}

function renderGraderForm(root: HTMLElement): void {
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
  root.append(form);
}

const root = document.getElementById("root");
if (root) {
  const grader = graderFromUrl();
  if (grader) {
    void new GradingApp(root, grader).start();
  } else {
    renderGraderForm(root);
  }
}
