/**
 * Rendering layer: pure functions from API payloads to DOM.
 *
 * Nothing here keeps state or talks to the network, so the same functions
 * serve the live console and the test suite.  Error rendering deliberately
 * touches only the banner element — results from the last successful
 * retrieval stay on screen.
 */

import type {
  ApiError,
  ResultRow,
  RetrieveDiagnostics,
  RetrieveResponse,
} from "./api.js";
import { barWidth, formatScore, formatWeight } from "./format.js";

/** Criterion display order, matching the engine's canonical order. */
const BAR_ORDER = ["impact", "condition", "frequency", "reproducibility"];

export function renderResults(
  container: HTMLElement,
  response: RetrieveResponse,
): void {
  container.replaceChildren();
  const active = response.diagnostics.active_effective;
  for (const row of response.results) {
    container.appendChild(renderResultCard(container.ownerDocument, row, active));
  }
  if (response.results.length === 0) {
    const empty = container.ownerDocument.createElement("p");
    empty.className = "empty-note";
    empty.textContent = "no results";
    container.appendChild(empty);
  }
}

function renderResultCard(
  doc: Document,
  row: ResultRow,
  activeCriteria: string[],
): HTMLElement {
  const card = doc.createElement("article");
  card.className = "result-card";
  card.dataset.trId = row.tr_id;

  const header = doc.createElement("header");
  const rank = doc.createElement("span");
  rank.className = "rank";
  rank.textContent = `#${row.rank}`;
  const title = doc.createElement("span");
  title.className = "tr-headline";
  title.textContent = `${row.tr_id} — ${row.headline}`;
  const aggregate = doc.createElement("span");
  aggregate.className = "aggregate";
  aggregate.textContent = formatScore(row.aggregated);
  header.append(rank, title, aggregate);
  card.appendChild(header);

  const bars = doc.createElement("div");
  bars.className = "bars";
  for (const criterion of BAR_ORDER) {
    if (!activeCriteria.includes(criterion)) continue;
    const value = row.scores[criterion];
    if (value === undefined) continue;
    bars.appendChild(renderBar(doc, criterion, value, row.weights_used[criterion]));
  }
  card.appendChild(bars);

  const excerpt = doc.createElement("p");
  excerpt.className = "excerpt";
  excerpt.textContent = row.answer_excerpt;
  card.appendChild(excerpt);
  return card;
}

function renderBar(
  doc: Document,
  criterion: string,
  value: number,
  weight: number | undefined,
): HTMLElement {
  const rowEl = doc.createElement("div");
  rowEl.className = "bar-row";
  rowEl.dataset.criterion = criterion;

  const label = doc.createElement("span");
  label.className = "bar-label";
  label.textContent =
    weight === undefined ? criterion : `${criterion} (${formatWeight(weight)})`;

  const track = doc.createElement("div");
  track.className = "bar-track";
  const fill = doc.createElement("div");
  fill.className = "bar-fill";
  fill.style.width = barWidth(value);
  track.appendChild(fill);

  const scoreText = doc.createElement("span");
  scoreText.className = "bar-value";
  scoreText.textContent = formatScore(value);

  rowEl.append(label, track, scoreText);
  return rowEl;
}

export function renderDiagnostics(
  container: HTMLElement,
  diagnostics: RetrieveDiagnostics,
): void {
  container.replaceChildren();
  const doc = container.ownerDocument;

  if (diagnostics.base_mode) {
    const note = doc.createElement("p");
    note.className = "base-mode-note";
    note.textContent =
      "base mode: no criteria available, ranking by the base query only";
    container.appendChild(note);
  }
  if (diagnostics.missing_criteria.length > 0) {
    const missing = doc.createElement("p");
    missing.className = "missing-note";
    missing.textContent = `not found in the report: ${diagnostics.missing_criteria.join(", ")}`;
    container.appendChild(missing);
  }
  for (const finding of diagnostics.parse) {
    const item = doc.createElement("p");
    item.className = "parse-note";
    item.dataset.kind = finding.kind;
    const where = finding.criterion ? ` [${finding.criterion}]` : "";
    const detail = finding.detail ? `: ${finding.detail}` : "";
    item.textContent = `parser: ${finding.kind}${where}${detail}`;
    container.appendChild(item);
  }
}

export function renderError(banner: HTMLElement, error: ApiError): void {
  banner.classList.add("error");
  banner.textContent = `${error.category}: ${error.message}`;
  banner.hidden = false;
}

export function clearError(banner: HTMLElement): void {
  banner.classList.remove("error");
  banner.textContent = "";
  banner.hidden = true;
}
