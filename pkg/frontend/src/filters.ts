/* Faceted filter panel built from /corpus/summary. Count badges show the
 * service's own per-value counts (never client-side tallies over map data),
 * so the badge for a filter equals what the summary endpoint reports. */

import type { SummaryResponse } from "./types.js";

export interface FilterChange {
  field: string;
  values: string[];
}

/** Service-reported count for a filter selection: sum of the chosen values' counts. */
export function badgeCount(summary: SummaryResponse, field: string, values: string[]): number {
  const counts = summary.fields[field]?.values;
  if (!counts) return 0;
  return values.reduce((acc, v) => acc + (counts[v] ?? 0), 0);
}

export class FilterPanel {
  private readonly selections = new Map<string, Set<string>>();

  constructor(
    private readonly root: HTMLElement,
    private readonly summary: SummaryResponse,
    private readonly onChange: (change: FilterChange) => void,
  ) {}

  get fields(): string[] {
    return Object.keys(this.summary.fields).filter(
      (field) => this.summary.fields[field]?.values !== undefined,
    );
  }

  setSelection(field: string, values: string[]): void {
    if (values.length === 0) this.selections.delete(field);
    else this.selections.set(field, new Set(values));
    this.renderBadge(field);
    this.onChange({ field, values });
  }

  selection(field: string): string[] {
    return [...(this.selections.get(field) ?? [])].sort();
  }

  render(): void {
    this.root.textContent = "";
    for (const field of this.fields) {
      const section = document.createElement("details");
      section.className = "filter-field";
      section.dataset.field = field;
      const title = document.createElement("summary");
      title.textContent = field;
      const badge = document.createElement("span");
      badge.className = "badge";
      badge.dataset.badgeFor = field;
      title.appendChild(badge);
      section.appendChild(title);

      const counts = this.summary.fields[field]!.values!;
      for (const value of Object.keys(counts).sort()) {
        const row = document.createElement("label");
        const box = document.createElement("input");
        box.type = "checkbox";
        box.value = value;
        box.addEventListener("change", () => {
          const current = new Set(this.selections.get(field) ?? []);
          if (box.checked) current.add(value);
          else current.delete(value);
          this.setSelection(field, [...current]);
        });
        row.appendChild(box);
        row.appendChild(document.createTextNode(` ${value} (${counts[value]})`));
        section.appendChild(row);
      }
      this.root.appendChild(section);
      this.renderBadge(field);
    }
  }

  applyState(filters: Record<string, string[]>): void {
    for (const field of this.fields) {
      const values = filters[field] ?? [];
      if (values.length === 0) this.selections.delete(field);
      else this.selections.set(field, new Set(values));
      for (const box of this.root.querySelectorAll<HTMLInputElement>(
        `details[data-field="${field}"] input[type=checkbox]`,
      )) {
        box.checked = values.includes(box.value);
      }
      this.renderBadge(field);
    }
  }

  private renderBadge(field: string): void {
    const badge = this.root.querySelector<HTMLElement>(`[data-badge-for="${field}"]`);
    if (!badge) return;
    const selected = this.selection(field);
    badge.textContent = selected.length ? String(badgeCount(this.summary, field, selected)) : "";
  }
}
