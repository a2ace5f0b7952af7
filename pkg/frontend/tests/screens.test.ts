// Screen behavior: gating of the submit button, strategy checkboxes,
// and the no-system-identifiers blinding invariant.

import { beforeEach, describe, expect, it, vi } from "vitest";

import { renderPreferenceScreen, renderStrategyScreen } from "../src/screens.js";
import type { ClientTaskView, PreferenceSubmission, StrategySubmission } from "../src/types.js";
import { GRADES } from "../src/types.js";
import { MOCK_STRATEGIES } from "./mock_server.js";

const SYSTEM_IDENTIFIER = /system[\s_-]?(a|b|1|2)\b/i;

function preferenceTask(): ClientTaskView {
  return {
    task_id: "t0",
    input: "The original passage.",
    mode: "preference",
    outputs: Object.fromEntries(
      GRADES.map((g) => [g, { left: `L${g}`, right: `R${g}` }]),
    ) as ClientTaskView["outputs"],
    strategies: null,
  };
}

function strategyTask(): ClientTaskView {
  return {
    ...preferenceTask(),
    task_id: "s0",
    mode: "strategy",
    strategies: MOCK_STRATEGIES,
  };
}

function root(): HTMLElement {
  document.body.innerHTML = "<main id='app'></main>";
  return document.getElementById("app")!;
}

function fillGrade(grade: string, choice = "left", reason = "a reason"): void {
  const panel = document.querySelector(`fieldset[data-grade='${grade}']`)!;
  const radio = panel.querySelector(`input[value='${choice}']`) as HTMLInputElement;
  radio.checked = true;
  radio.dispatchEvent(new Event("change", { bubbles: true }));
  const textarea = panel.querySelector("textarea") as HTMLTextAreaElement;
  textarea.value = reason;
  textarea.dispatchEvent(new Event("input", { bubbles: true }));
}

function submitButton(): HTMLButtonElement {
  return document.querySelector("button.submit") as HTMLButtonElement;
}

describe("preference screen", () => {
  beforeEach(() => {
    document.body.innerHTML = "";
  });

  it("disables submit until all four grades have a choice and a reason", () => {
    renderPreferenceScreen(root(), preferenceTask(), { done: 0, total: 4 }, () => {});
    expect(submitButton().disabled).toBe(true);
    fillGrade("2");
    fillGrade("5");
    fillGrade("8");
    expect(submitButton().disabled).toBe(true);
    fillGrade("11");
    expect(submitButton().disabled).toBe(false);
  });

  it("keeps submit disabled when a reason is blank", () => {
    renderPreferenceScreen(root(), preferenceTask(), { done: 0, total: 4 }, () => {});
    for (const g of GRADES) fillGrade(g);
    fillGrade("8", "left", "   ");
    expect(submitButton().disabled).toBe(true);
  });

  it("submits the four collected choices", () => {
    const seen: PreferenceSubmission[] = [];
    renderPreferenceScreen(root(), preferenceTask(), { done: 0, total: 4 }, (s) => seen.push(s));
    fillGrade("2", "left");
    fillGrade("5", "right");
    fillGrade("8", "tie");
    fillGrade("11", "left", "  padded reason  ");
    submitButton().click();
    expect(seen).toHaveLength(1);
    expect(seen[0].task_id).toBe("t0");
    expect(seen[0].choices["5"].choice).toBe("right");
    expect(seen[0].choices["11"].reason).toBe("padded reason");
  });

  it("shows a server error inline without clearing the screen", () => {
    const handle = renderPreferenceScreen(root(), preferenceTask(), { done: 0, total: 4 }, () => {});
    handle.showError("server rejected the submission");
    const error = document.querySelector("[data-role='inline-error']") as HTMLElement;
    expect(error.hidden).toBe(false);
    expect(error.textContent).toContain("rejected");
    expect(document.querySelectorAll("fieldset[data-grade]")).toHaveLength(4);
  });

  it("renders progress and no system identifiers", () => {
    renderPreferenceScreen(root(), preferenceTask(), { done: 1, total: 4 }, () => {});
    expect(document.querySelector("[data-role='progress']")!.textContent).toBe("1 / 4");
    expect(document.body.innerHTML).not.toMatch(SYSTEM_IDENTIFIER);
  });
});

describe("strategy screen", () => {
  beforeEach(() => {
    document.body.innerHTML = "";
  });

  it("renders checkboxes labeled exactly with the server strings", () => {
    renderStrategyScreen(root(), strategyTask(), { done: 3, total: 4 }, () => {});
    const panel = document.querySelector("fieldset[data-grade='2']")!;
    const labels = Array.from(panel.querySelectorAll("label.strategy-option")).map(
      (l) => l.textContent,
    );
    expect(labels).toEqual(MOCK_STRATEGIES["2"]);
  });

  it("submits exactly the selected boxes, empty selections allowed", () => {
    const seen: StrategySubmission[] = [];
    renderStrategyScreen(root(), strategyTask(), { done: 3, total: 4 }, (s) => seen.push(s));
    const panel = document.querySelector("fieldset[data-grade='5']")!;
    const boxes = panel.querySelectorAll("input[type='checkbox']");
    for (const i of [0, 2]) {
      const box = boxes[i] as HTMLInputElement;
      box.checked = true;
      box.dispatchEvent(new Event("change", { bubbles: true }));
    }
    (document.querySelector("button.submit") as HTMLButtonElement).click();
    expect(seen).toHaveLength(1);
    expect(seen[0].selections["5"]).toEqual([MOCK_STRATEGIES["5"][0], MOCK_STRATEGIES["5"][2]]);
    expect(seen[0].selections["2"]).toEqual([]);
  });

  it("contains no system identifiers", () => {
    renderStrategyScreen(root(), strategyTask(), { done: 3, total: 4 }, () => {});
    expect(document.body.innerHTML).not.toMatch(SYSTEM_IDENTIFIER);
  });
});

describe("api client error mapping", () => {
  it("propagates status and detail", async () => {
    const { AnnoClient, ApiError } = await import("../src/api.js");
    const fetchImpl = vi.fn(async () =>
      new Response(JSON.stringify({ detail: "nope" }), { status: 401 }),
    );
    const client = new AnnoClient("http://mock", fetchImpl);
    await expect(
      client.createSession({ annotatorId: "x", token: "y" }),
    ).rejects.toMatchObject({ status: 401 });
    try {
      await client.createSession({ annotatorId: "x", token: "y" });
    } catch (err) {
      expect(err).toBeInstanceOf(ApiError);
      expect((err as InstanceType<typeof ApiError>).detail).toContain("nope");
    }
  });
});
