/** Workbench entry point: task loop, debounced validation, submission. */

import { rejectionVerdict, WorkbenchClient } from "./api.js";
import { TaskSession } from "./session.js";
import {
  clearBanner,
  mountTask,
  renderDone,
  showBanner,
  type MountedTask,
} from "./view.js";

const VALIDATE_DEBOUNCE_MS = 300;

function debounce(ms: number, fn: () => void): () => void {
  let timer: ReturnType<typeof setTimeout> | undefined;
  return () => {
    clearTimeout(timer);
    timer = setTimeout(fn, ms);
  };
}

export function startApp(root: HTMLElement, client: WorkbenchClient): void {
  let session: TaskSession | null = null;
  let mounted: MountedTask | null = null;

  // server round trip per pause in typing, not per keystroke; a failed call
  // keeps the last known statuses and surfaces a warning instead
  const revalidate = debounce(VALIDATE_DEBOUNCE_MS, () => {
    if (!session) return;
    const texts = session.texts();
    client
      .validate(session.task.task_id, texts)
      .then((verdict) => {
        if (!session) return;
        session.applyServerVerdicts(texts, verdict.results);
        clearBanner(root);
        mounted?.refresh();
      })
      .catch(() => {
        showBanner(root, "Validation service unreachable; showing local checks.");
      });
  });

  async function submit(): Promise<void> {
    if (!session) return;
    const texts = session.texts();
    try {
      await client.submit(session.task.task_id, texts);
      await loadNext();
    } catch (err) {
      const verdict = rejectionVerdict(err);
      if (verdict && session) {
        session.applyServerVerdicts(texts, verdict.results);
        mounted?.refresh();
        showBanner(root, "Submission rejected; fix the flagged turns.");
      } else {
        showBanner(root, "Submission failed; try again.", () => void submit());
      }
    }
  }

  async function loadNext(): Promise<void> {
    try {
      const { done, task } = await client.nextTask();
      if (done || task === null) {
        renderDone(root, await client.progress());
        session = null;
        mounted = null;
        return;
      }
      session = new TaskSession(task);
      mounted = mountTask(root, session, {
        onChange: () => revalidate(),
        onSubmit: () => void submit(),
      });
    } catch {
      showBanner(root, "Cannot reach the workbench API.", () => void loadNext());
    }
  }

  void loadNext();
}

const appRoot = typeof document !== "undefined" ? document.getElementById("app") : null;
if (appRoot) {
  startApp(appRoot, new WorkbenchClient((input, init) => fetch(input, init)));
}
