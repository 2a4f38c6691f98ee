/** DOM rendering for the workbench: no framework, direct node updates.
 *
 * Highlight chips are sliced out of the templated text using the offsets
 * the server sent; the client never re-searches the template, so the
 * highlights cannot drift from the stored annotations.
 */

import type { TaskSession, TurnEdit } from "./session.js";
import type { Progress, TaskTurn } from "./types.js";

export interface TaskHandlers {
  // fires after the session has absorbed an edit; debounce server calls here
  onChange(turnIndex: number): void;
  onSubmit(): void;
}

export interface MountedTask {
  root: HTMLElement;
  refresh(): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** Templated text with each verbatim value wrapped in a highlight chip. */
export function renderTemplate(turn: TaskTurn): HTMLElement {
  const p = el("p", "template");
  const chips = [...turn.values].sort((a, b) => a.start - b.start);
  let cursor = 0;
  for (const chip of chips) {
    if (chip.start > cursor) {
      p.append(turn.template.slice(cursor, chip.start));
    }
    const mark = el("mark", "chip", turn.template.slice(chip.start, chip.exclusive_end));
    mark.title = chip.slot;
    p.append(mark);
    cursor = chip.exclusive_end;
  }
  p.append(turn.template.slice(cursor));
  return p;
}

function statusLine(edit: TurnEdit): { text: string; accepted: boolean } {
  if (edit.verdict.accepted) {
    return {
      text: edit.confirmed ? "all values present (confirmed)" : "all values present",
      accepted: true,
    };
  }
  const lost = edit.verdict.missing
    .map(([slot, value]) => `"${value}" (${slot})`)
    .join(", ");
  return { text: `missing: ${lost}`, accepted: false };
}

export function mountTask(
  root: HTMLElement,
  session: TaskSession,
  handlers: TaskHandlers,
): MountedTask {
  root.replaceChildren();

  const header = el("div", "task-header");
  header.append(el("h1", undefined, `Dialogue ${session.task.task_id}`));
  header.append(
    el("span", "progress", session.task.services.join(", ")),
  );
  root.append(header);

  const statuses: HTMLElement[] = [];
  session.task.turns.forEach((turn, i) => {
    const card = el("section", "turn");
    card.append(el("div", "speaker", turn.speaker));
    card.append(renderTemplate(turn));

    const box = el("textarea", "paraphrase");
    box.value = session.turns[i]!.text;
    box.dataset.turn = String(i);
    box.addEventListener("input", () => {
      session.setText(i, box.value);
      refreshOne(i);
      refreshSubmit();
      handlers.onChange(i);
    });
    card.append(box);

    const status = el("p", "status");
    statuses.push(status);
    card.append(status);
    root.append(card);
  });

  const row = el("div", "submit-row");
  const submit = el("button", "submit", "Submit paraphrase");
  submit.addEventListener("click", () => {
    if (session.canSubmit()) handlers.onSubmit();
  });
  row.append(submit);
  root.append(row);

  function refreshOne(i: number): void {
    const line = statusLine(session.turns[i]!);
    const status = statuses[i]!;
    status.textContent = line.text;
    status.className = line.accepted ? "status accepted" : "status rejected";
  }

  function refreshSubmit(): void {
    submit.disabled = !session.canSubmit();
  }

  function refresh(): void {
    session.turns.forEach((_, i) => refreshOne(i));
    refreshSubmit();
  }

  refresh();
  return { root, refresh };
}

export function renderDone(root: HTMLElement, progress: Progress): void {
  root.replaceChildren();
  const box = el("div", "done");
  box.append(el("h1", undefined, "All dialogues paraphrased"));
  box.append(
    el(
      "p",
      undefined,
      `${progress.completed} of ${progress.total} tasks completed.`,
    ),
  );
  root.append(box);
}

export function showBanner(
  root: HTMLElement,
  message: string,
  onRetry?: () => void,
): void {
  clearBanner(root);
  const banner = el("div", "banner", message);
  if (onRetry) {
    const retry = el("button", undefined, "Retry");
    retry.addEventListener("click", onRetry);
    banner.append(retry);
  }
  root.prepend(banner);
}

export function clearBanner(root: HTMLElement): void {
  root.querySelector(".banner")?.remove();
}
