/** Editable client state for one paraphrasing task. */

import type { TaskPayload, TurnVerdict } from "./types.js";
import {
  validateTurnText,
  type ExpectedValue,
  type LocalVerdict,
} from "./validation.js";

export interface TurnEdit {
  text: string;
  verdict: LocalVerdict;
  // true once the current text's verdict came back from the server
  confirmed: boolean;
}

/** Values the annotator must keep verbatim in one turn. */
export function expectedValues(
  task: TaskPayload,
  turnIndex: number,
): ExpectedValue[] {
  return task.turns[turnIndex]!.values.map((chip) => [chip.slot, chip.value]);
}

function toLocal(verdict: TurnVerdict): LocalVerdict {
  return {
    accepted: verdict.accepted,
    spans: verdict.spans.map((s) => ({
      slot: s.slot,
      start: s.start,
      end: s.exclusive_end,
      value: s.value,
    })),
    missing: verdict.missing.map((m) => [m.slot, m.value]),
  };
}

/** Per-turn texts and verdicts driving the workbench view.
 *
 * Turns start as the templated text (or the stored paraphrase when the task
 * was already completed).  Every edit is re-checked immediately with the
 * ported rule; server verdicts overwrite local ones when the validated text
 * is still current, so a stale response never clobbers a newer edit.  The
 * submit control follows canSubmit() and can never fire with a value
 * missing.
 */
export class TaskSession {
  readonly turns: TurnEdit[];

  constructor(readonly task: TaskPayload) {
    this.turns = task.turns.map((turn, i) => {
      const text = task.paraphrases?.[i] ?? turn.template;
      return {
        text,
        verdict: validateTurnText(expectedValues(task, i), text),
        confirmed: false,
      };
    });
  }

  texts(): string[] {
    return this.turns.map((t) => t.text);
  }

  setText(turnIndex: number, text: string): void {
    const turn = this.turns[turnIndex]!;
    if (turn.text === text) return;
    turn.text = text;
    turn.verdict = validateTurnText(expectedValues(this.task, turnIndex), text);
    turn.confirmed = false;
  }

  /** Adopt server verdicts for every turn whose text is still `texts[i]`. */
  applyServerVerdicts(texts: string[], results: TurnVerdict[]): void {
    results.forEach((result, i) => {
      const turn = this.turns[i];
      if (turn === undefined || turn.text !== texts[i]) return;
      turn.verdict = toLocal(result);
      turn.confirmed = true;
    });
  }

  canSubmit(): boolean {
    return this.turns.every((t) => t.verdict.accepted);
  }
}
