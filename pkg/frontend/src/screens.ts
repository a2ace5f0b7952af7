// DOM builders for the single-page annotation flow. Everything shown to
// the annotator is server-provided text placed in anonymous left/right
// slots; labels never hint at which system produced an output.

import type {
  Choice,
  ClientTaskView,
  Grade,
  PreferenceSubmission,
  StrategySubmission,
} from "./types.js";
import { GRADES } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = "",
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

export function clear(root: HTMLElement): void {
  while (root.firstChild) root.removeChild(root.firstChild);
}

export function renderProgress(root: HTMLElement, done: number, total: number): void {
  const bar = el("div", "progress", `${done} / ${total}`);
  bar.setAttribute("data-role", "progress");
  root.appendChild(bar);
}

export function renderRetryBanner(root: HTMLElement, message: string, onRetry: () => void): void {
  const banner = el("div", "retry-banner");
  banner.setAttribute("data-role", "retry");
  banner.appendChild(el("span", "", message));
  const button = el("button", "", "Retry");
  button.addEventListener("click", onRetry);
  banner.appendChild(button);
  root.appendChild(banner);
}

export function renderLogin(
  root: HTMLElement,
  onSubmit: (annotatorId: string, token: string) => void,
  errorMessage = "",
): void {
  clear(root);
  const form = el("form", "login");
  form.appendChild(el("h1", "", "Annotation session"));
  if (errorMessage) {
    form.appendChild(el("p", "error", errorMessage));
  }
  const idInput = el("input");
  idInput.name = "annotator";
  idInput.placeholder = "annotator id";
  const tokenInput = el("input");
  tokenInput.name = "token";
  tokenInput.placeholder = "access token";
  tokenInput.type = "password";
  const submit = el("button", "", "Start");
  submit.type = "submit";
  form.append(idInput, tokenInput, submit);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    onSubmit(idInput.value.trim(), tokenInput.value.trim());
  });
  root.appendChild(form);
}

export function renderDone(root: HTMLElement, completed: number, total: number): void {
  clear(root);
  const box = el("div", "done");
  box.setAttribute("data-role", "done");
  box.appendChild(el("h1", "", "All tasks complete"));
  box.appendChild(el("p", "", `You finished ${completed} of ${total} tasks. Thank you!`));
  root.appendChild(box);
}

export interface PreferenceScreenHandle {
  /** submit button state, re-evaluated on every input */
  isComplete(): boolean;
  showError(message: string): void;
}

export function renderPreferenceScreen(
  root: HTMLElement,
  task: ClientTaskView,
  progress: { done: number; total: number },
  onSubmit: (submission: PreferenceSubmission) => void,
): PreferenceScreenHandle {
  clear(root);
  renderProgress(root, progress.done, progress.total);
  const container = el("section", "task preference");
  container.appendChild(el("h2", "", "Which output do you prefer?"));
  container.appendChild(el("p", "task-input", task.input));
  const errorBox = el("p", "error");
  errorBox.setAttribute("data-role", "inline-error");
  errorBox.hidden = true;
  container.appendChild(errorBox);

  const choices = new Map<Grade, Choice>();
  const reasons = new Map<Grade, string>();
  const submit = el("button", "submit", "Submit preferences");
  submit.type = "button";
  submit.disabled = true;

  const refresh = () => {
    submit.disabled = !isComplete();
  };

  const isComplete = () =>
    GRADES.every((g) => choices.has(g) && (reasons.get(g) ?? "").trim().length > 0);

  for (const grade of GRADES) {
    const panel = el("fieldset", "grade-panel");
    panel.setAttribute("data-grade", grade);
    const legend = el("legend", "", `Grade ${grade}`);
    panel.appendChild(legend);

    for (const side of ["left", "right"] as const) {
      const block = el("blockquote", `output ${side}`);
      block.setAttribute("data-slot", side);
      block.textContent = task.outputs[grade][side];
      panel.appendChild(block);
    }

    const options = el("div", "options");
    for (const value of ["left", "right", "tie"] as const) {
      const label = el("label");
      const radio = el("input");
      radio.type = "radio";
      radio.name = `choice-${grade}`;
      radio.value = value;
      radio.addEventListener("change", () => {
        choices.set(grade, value);
        refresh();
      });
      label.appendChild(radio);
      label.appendChild(document.createTextNode(value));
      options.appendChild(label);
    }
    panel.appendChild(options);

    const reason = el("textarea", "reason");
    reason.placeholder = "Explain the reason for your preference (required)";
    reason.addEventListener("input", () => {
      reasons.set(grade, reason.value);
      refresh();
    });
    panel.appendChild(reason);
    container.appendChild(panel);
  }

  submit.addEventListener("click", () => {
    if (!isComplete()) return;
    const submission: PreferenceSubmission = {
      task_id: task.task_id,
      choices: Object.fromEntries(
        GRADES.map((g) => [g, { choice: choices.get(g)!, reason: (reasons.get(g) ?? "").trim() }]),
      ) as PreferenceSubmission["choices"],
    };
    onSubmit(submission);
  });
  container.appendChild(submit);
  root.appendChild(container);

  return {
    isComplete,
    showError(message: string) {
      errorBox.hidden = false;
      errorBox.textContent = message;
    },
  };
}

export interface StrategyScreenHandle {
  showError(message: string): void;
}

export function renderStrategyScreen(
  root: HTMLElement,
  task: ClientTaskView,
  progress: { done: number; total: number },
  onSubmit: (submission: StrategySubmission) => void,
): StrategyScreenHandle {
  clear(root);
  renderProgress(root, progress.done, progress.total);
  const container = el("section", "task strategy");
  container.appendChild(el("h2", "", "Which strategies does each output use?"));
  container.appendChild(el("p", "task-input", task.input));
  const errorBox = el("p", "error");
  errorBox.setAttribute("data-role", "inline-error");
  errorBox.hidden = true;
  container.appendChild(errorBox);

  const selections = new Map<Grade, Set<string>>(GRADES.map((g) => [g, new Set<string>()]));

  for (const grade of GRADES) {
    const panel = el("fieldset", "grade-panel");
    panel.setAttribute("data-grade", grade);
    panel.appendChild(el("legend", "", `Grade ${grade}`));

    const output = el("blockquote", "output");
    output.setAttribute("data-slot", "left");
    output.textContent = task.outputs[grade].left;
    panel.appendChild(output);

    // checkbox labels are exactly the server-provided strategy strings
    for (const strategy of task.strategies?.[grade] ?? []) {
      const label = el("label", "strategy-option");
      const box = el("input");
      box.type = "checkbox";
      box.value = strategy;
      box.addEventListener("change", () => {
        const set = selections.get(grade)!;
        if (box.checked) set.add(strategy);
        else set.delete(strategy);
      });
      label.appendChild(box);
      label.appendChild(document.createTextNode(strategy));
      panel.appendChild(label);
    }
    container.appendChild(panel);
  }

  const submit = el("button", "submit", "Submit strategies");
  submit.type = "button";
  submit.addEventListener("click", () => {
    const submission: StrategySubmission = {
      task_id: task.task_id,
      selections: Object.fromEntries(
        GRADES.map((g) => [g, Array.from(selections.get(g)!)]),
      ) as StrategySubmission["selections"],
    };
    onSubmit(submission);
  });
  container.appendChild(submit);
  root.appendChild(container);

  return {
    showError(message: string) {
      errorBox.hidden = false;
      errorBox.textContent = message;
    },
  };
}
