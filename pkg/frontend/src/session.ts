/**
 * Session controller: a pure queue over the server's task sequence.
 *
 * The server-provided order is never changed except by an explicit skip,
 * which moves the current task to the back of the pending queue.  No
 * judgment lives only here: the queue is rebuilt from GET /api/tasks on
 * every (re)start, so a browser refresh resumes exactly where the journal
 * says the annotator is.
 */

import type { SessionView, TaskView } from "./types.js";

export class AnnotationSession {
  private readonly tasks: TaskView[];
  private pending: string[];
  private judged: Set<string>;

  constructor(readonly annotator: string, tasks: TaskView[]) {
    this.tasks = tasks.map((task) => ({ ...task }));
    this.pending = this.tasks.filter((task) => !task.judged).map((task) => task.task_id);
    this.judged = new Set(
      this.tasks.filter((task) => task.judged).map((task) => task.task_id),
    );
  }

  private byId(taskId: string): TaskView {
    const task = this.tasks.find((candidate) => candidate.task_id === taskId);
    if (!task) throw new Error(`unknown task: ${taskId}`);
    return task;
  }

  current(): TaskView | null {
    const head = this.pending[0];
    return head === undefined ? null : this.byId(head);
  }

  /** Remove a task from the queue once the server acknowledged it. */
  markJudged(taskId: string): void {
    if (this.judged.has(taskId)) return;
    this.judged.add(taskId);
    this.pending = this.pending.filter((pendingId) => pendingId !== taskId);
  }

  /** Defer the current task to the end of the queue; no server write. */
  skip(): void {
    const head = this.pending.shift();
    if (head !== undefined) this.pending.push(head);
  }

  get view(): SessionView {
    return {
      annotator: this.annotator,
      current: this.current(),
      judgedCount: this.judged.size,
      total: this.tasks.length,
      done: this.pending.length === 0,
    };
  }

  /** Pending ids in display order — used to assert order stability. */
  pendingOrder(): string[] {
    return [...this.pending];
  }
}
