export interface Region {
  row_start: number;
  row_end: number;
  col_start: number;
  col_end: number;
  order_index: number;
}

export type Verdict = "pending" | "accepted" | "rejected";

export interface ReviewItem {
  item_id: string;
  page_id: string;
  source: string;
  region: Region;
  preview: string;
  page_image: string;
  page_height: number;
  page_width: number;
  verdict: Verdict;
  note: string | null;
  timestamp: string | null;
}

export interface ItemList {
  items: ReviewItem[];
  total: number;
  page: number;
  page_size: number;
}

export interface ItemContext {
  item_id: string;
  page_id: string;
  region: Region;
  page_height: number;
  page_width: number;
  page_image_url: string;
}

export interface Progress {
  pending: number;
  accepted: number;
  rejected: number;
  total: number;
}

export type Filter = Verdict | "all";
