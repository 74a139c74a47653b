import type { Filter, ItemContext, ItemList, Progress, ReviewItem, Verdict } from "./types.js";

/** status 0 means the request never reached the server (offline). */
export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

export class ApiClient {
  constructor(private base: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let resp: Response;
    try {
      resp = await fetch(this.base + path, init);
    } catch (err) {
      throw new ApiError(0, `network error: ${String(err)}`);
    }
    if (!resp.ok) {
      let detail = `HTTP ${resp.status}`;
      try {
        const body = (await resp.json()) as { error?: string };
        if (body && body.error) detail = body.error;
      } catch {
        /* non-JSON error body: keep the status text */
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  listItems(status: Filter = "pending", page = 0, pageSize = 200): Promise<ItemList> {
    return this.request(`/api/items?status=${status}&page=${page}&page_size=${pageSize}`);
  }

  getItem(id: string): Promise<ReviewItem> {
    return this.request(`/api/items/${encodeURIComponent(id)}`);
  }

  getContext(id: string): Promise<ItemContext> {
    return this.request(`/api/items/${encodeURIComponent(id)}/context`);
  }

  submitVerdict(id: string, verdict: Exclude<Verdict, "pending">,
                note?: string): Promise<ReviewItem> {
    return this.request(`/api/items/${encodeURIComponent(id)}/verdict`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(note === undefined ? { verdict } : { verdict, note }),
    });
  }

  progress(): Promise<Progress> {
    return this.request("/api/progress");
  }

  imageUrl(id: string): string {
    return `${this.base}/api/items/${encodeURIComponent(id)}/image`;
  }

  pageImageUrl(id: string): string {
    return `${this.base}/api/items/${encodeURIComponent(id)}/page`;
  }
}
