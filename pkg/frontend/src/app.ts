import { ApiClient } from "./api.js";
import { QueueController } from "./controller.js";
import type { Filter, ReviewItem } from "./types.js";

const api = new ApiClient("");
const queue = new QueueController(api);

const $ = (sel: string): HTMLElement => {
  const el = document.querySelector(sel);
  if (!el) throw new Error(`missing element ${sel}`);
  return el as HTMLElement;
};

function renderProgress(): void {
  const p = queue.progress;
  $("#progress").textContent = p
    ? `${p.accepted} accepted · ${p.rejected} rejected · ${p.pending} pending of ${p.total}`
    : "";
}

function renderBanner(): void {
  const banner = $("#banner");
  if (queue.lastError) {
    banner.textContent = queue.lastError;
    banner.style.display = "block";
    if (queue.retryQueue.length > 0) {
      const retry = document.createElement("button");
      retry.textContent = "retry now";
      retry.onclick = () => void queue.flush();
      banner.append(" ", retry);
    }
  } else {
    banner.style.display = "none";
    banner.textContent = "";
  }
}

function thumb(item: ReviewItem, index: number): HTMLElement {
  const li = document.createElement("li");
  li.className = item.item_id === queue.current()?.item_id ? "selected" : "";
  const img = document.createElement("img");
  img.src = api.imageUrl(item.item_id);
  img.alt = item.item_id;
  const label = document.createElement("span");
  label.textContent = `${index + 1}. ${item.item_id} [${item.verdict}]`;
  li.append(img, label);
  li.onclick = () => queue.select(item.item_id);
  return li;
}

function renderList(): void {
  const list = $("#items");
  list.replaceChildren(...queue.items.map(thumb));
}

function renderCurrent(): void {
  const item = queue.current();
  const main = $("#current");
  if (!item) {
    main.replaceChildren();
    $("#done").style.display = queue.isDone() ? "block" : "none";
    return;
  }
  $("#done").style.display = "none";

  const title = document.createElement("h2");
  title.textContent = `${item.item_id} — ${item.verdict}`;

  const preview = document.createElement("img");
  preview.className = "preview";
  preview.src = api.imageUrl(item.item_id);
  preview.alt = `system preview ${item.item_id}`;

  // full page with the region rectangle: API coordinates map through the
  // display scale as plain percentages of the page dimensions
  const context = document.createElement("div");
  context.className = "context";
  const page = document.createElement("img");
  page.src = api.pageImageUrl(item.item_id);
  page.alt = `page ${item.page_id}`;
  page.onerror = () => {
    context.replaceChildren(placeholder("page image unavailable"));
  };
  const box = document.createElement("div");
  box.className = "region-box";
  const r = item.region;
  box.style.top = `${(100 * r.row_start) / item.page_height}%`;
  box.style.height = `${(100 * (r.row_end - r.row_start)) / item.page_height}%`;
  box.style.left = `${(100 * r.col_start) / item.page_width}%`;
  box.style.width = `${(100 * (r.col_end - r.col_start)) / item.page_width}%`;
  context.append(page, box);

  const controls = document.createElement("div");
  controls.className = "controls";
  for (const [label, fn] of [
    ["accept (a)", () => void queue.accept()],
    ["reject (r)", () => void queue.reject()],
    ["undo (u)", () => void queue.undo()],
  ] as const) {
    const b = document.createElement("button");
    b.textContent = label;
    b.onclick = fn;
    controls.append(b);
  }

  const position = document.createElement("p");
  position.textContent = `${queue.index + 1} / ${queue.items.length} in view`;
  main.replaceChildren(title, preview, context, controls, position);
}

function placeholder(text: string): HTMLElement {
  const div = document.createElement("div");
  div.className = "placeholder";
  div.textContent = text;
  return div;
}

function renderTabs(): void {
  for (const tab of document.querySelectorAll<HTMLButtonElement>("#tabs button")) {
    tab.classList.toggle("active", tab.dataset.filter === queue.filter);
  }
}

function render(): void {
  renderProgress();
  renderBanner();
  renderList();
  renderCurrent();
  renderTabs();
}

queue.onChange(render);

for (const tab of document.querySelectorAll<HTMLButtonElement>("#tabs button")) {
  tab.onclick = () => void queue.load(tab.dataset.filter as Filter);
}

document.addEventListener("keydown", (ev) => {
  if (ev.target instanceof HTMLInputElement || ev.target instanceof HTMLTextAreaElement) {
    return;
  }
  if (queue.handleKey(ev.key)) ev.preventDefault();
});

window.addEventListener("online", () => void queue.flush());

void queue.load("pending");
