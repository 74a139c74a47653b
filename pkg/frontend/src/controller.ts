import { ApiClient, ApiError } from "./api.js";
import type { Filter, Progress, ReviewItem, Verdict } from "./types.js";

export interface QueuedPost {
  itemId: string;
  verdict: Exclude<Verdict, "pending">;
  note?: string;
}

/**
 * Queue state and verdict flow, kept free of DOM concerns so it can run
 * against a live server in tests.  All mutation goes through the API;
 * displayed verdicts always reflect the last server response — an
 * optimistic update is rolled back whenever the POST fails, and offline
 * POSTs are parked in a retry queue rather than dropped.
 */
export class QueueController {
  items: ReviewItem[] = [];
  index = 0;
  filter: Filter = "pending";
  total = 0;
  progress: Progress | null = null;
  retryQueue: QueuedPost[] = [];
  lastError: string | null = null;

  private lastAction: QueuedPost | null = null;
  private listeners: Array<() => void> = [];

  constructor(readonly api: ApiClient) {}

  onChange(fn: () => void): void {
    this.listeners.push(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn();
  }

  async load(filter: Filter = this.filter, page = 0): Promise<void> {
    this.filter = filter;
    try {
      const listing = await this.api.listItems(filter, page);
      this.items = listing.items;
      this.total = listing.total;
      this.index = 0;
      this.progress = await this.api.progress();
      this.lastError = null;
    } catch (err) {
      this.lastError = err instanceof Error ? err.message : String(err);
    }
    this.emit();
  }

  current(): ReviewItem | null {
    return this.items[this.index] ?? null;
  }

  isDone(): boolean {
    return this.items.length === 0;
  }

  next(): void {
    if (this.index < this.items.length - 1) {
      this.index += 1;
      this.emit();
    }
  }

  prev(): void {
    if (this.index > 0) {
      this.index -= 1;
      this.emit();
    }
  }

  select(itemId: string): void {
    const i = this.items.findIndex((it) => it.item_id === itemId);
    if (i >= 0) {
      this.index = i;
      this.emit();
    }
  }

  async accept(note?: string): Promise<void> {
    await this.submit("accepted", note);
  }

  async reject(note?: string): Promise<void> {
    await this.submit("rejected", note);
  }

  async submit(verdict: Exclude<Verdict, "pending">, note?: string): Promise<void> {
    const item = this.current();
    if (!item) return;
    const previous = item.verdict;
    item.verdict = verdict; // optimistic
    this.emit();
    try {
      const updated = await this.api.submitVerdict(item.item_id, verdict, note);
      Object.assign(item, updated);
      this.lastAction = { itemId: item.item_id, verdict, note };
      this.lastError = null;
      await this.afterVerdict(item);
    } catch (err) {
      item.verdict = previous; // server truth wins
      if (err instanceof ApiError && err.status === 0) {
        this.retryQueue.push({ itemId: item.item_id, verdict, note });
        this.lastError = `offline: verdict queued (${this.retryQueue.length} pending)`;
      } else {
        this.lastError = err instanceof Error ? err.message : String(err);
      }
    }
    this.emit();
  }

  /** Re-POST the opposite of the last verdict and surface the server state. */
  async undo(): Promise<void> {
    if (!this.lastAction) return;
    const { itemId, verdict } = this.lastAction;
    const opposite = verdict === "accepted" ? "rejected" : "accepted";
    try {
      await this.api.submitVerdict(itemId, opposite);
      const fresh = await this.api.getItem(itemId);
      const i = this.items.findIndex((it) => it.item_id === itemId);
      if (i >= 0) {
        this.items[i] = fresh;
        this.index = i;
      } else if (this.filter === "all" || fresh.verdict === this.filter) {
        this.items.splice(this.index, 0, fresh);
      }
      this.lastAction = { itemId, verdict: opposite };
      this.progress = await this.api.progress();
      this.lastError = null;
    } catch (err) {
      this.lastError = err instanceof Error ? err.message : String(err);
    }
    this.emit();
  }

  /** Retry parked offline POSTs; failures stay queued. */
  async flush(): Promise<void> {
    const queued = this.retryQueue;
    this.retryQueue = [];
    for (const post of queued) {
      try {
        const updated = await this.api.submitVerdict(post.itemId, post.verdict, post.note);
        const i = this.items.findIndex((it) => it.item_id === post.itemId);
        if (i >= 0) Object.assign(this.items[i], updated);
        this.lastError = null;
      } catch (err) {
        if (err instanceof ApiError && err.status === 0) {
          this.retryQueue.push(post);
          this.lastError = `offline: verdict queued (${this.retryQueue.length} pending)`;
        } else {
          this.lastError = err instanceof Error ? err.message : String(err);
        }
      }
    }
    if (this.retryQueue.length === 0 && this.progress) {
      try {
        this.progress = await this.api.progress();
      } catch {
        /* banner already reflects connectivity */
      }
    }
    this.emit();
  }

  private async afterVerdict(item: ReviewItem): Promise<void> {
    try {
      this.progress = await this.api.progress();
    } catch {
      /* keep the stale counts; the banner reports connectivity */
    }
    if (this.filter !== "all" && item.verdict !== this.filter) {
      const i = this.items.indexOf(item);
      if (i >= 0) {
        this.items.splice(i, 1);
        this.total -= 1;
        if (this.index >= this.items.length) {
          this.index = Math.max(0, this.items.length - 1);
        }
      }
    } else {
      this.next();
    }
  }

  /** Keyboard bindings: a=accept, r=reject, u=undo, j/n=next, k/p=prev. */
  handleKey(key: string): boolean {
    switch (key) {
      case "a":
        void this.accept();
        return true;
      case "r":
        void this.reject();
        return true;
      case "u":
        void this.undo();
        return true;
      case "j":
      case "n":
      case "ArrowRight":
        this.next();
        return true;
      case "k":
      case "p":
      case "ArrowLeft":
        this.prev();
        return true;
      default:
        return false;
    }
  }
}
