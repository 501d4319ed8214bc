/**
 * Console controller: holds the query state, issues retrievals through the
 * API client, and drives the rendering layer.
 *
 * Failure policy: a failed retrieval renders an error banner and leaves the
 * previous results untouched, so flaky connectivity never wipes an
 * investigation off the screen.
 */

import {
  ApiClient,
  ApiError,
  CRITERIA,
  type Criterion,
  type RetrieveRequest,
  type RetrieveResponse,
} from "./api.js";
import {
  clearError,
  renderDiagnostics,
  renderError,
  renderResults,
} from "./view.js";

export interface ConsoleElements {
  results: HTMLElement;
  diagnostics: HTMLElement;
  banner: HTMLElement;
}

export class ConsoleController {
  private readonly client: ApiClient;
  private readonly elements: ConsoleElements;

  private headline = "";
  private observationRaw = "";
  private active: Set<Criterion> = new Set(CRITERIA);
  lastResponse: RetrieveResponse | null = null;
  lastError: ApiError | null = null;

  constructor(client: ApiClient, elements: ConsoleElements) {
    this.client = client;
    this.elements = elements;
  }

  /** Criteria currently switched on, in canonical order. */
  get activeCriteria(): Criterion[] {
    return CRITERIA.filter((criterion) => this.active.has(criterion));
  }

  /** Run a fresh query with every criterion switched on. */
  async submit(headline: string, observationRaw: string): Promise<void> {
    this.headline = headline;
    this.observationRaw = observationRaw;
    this.active = new Set(CRITERIA);
    await this.retrieve();
  }

  /**
   * Switch one criterion off (or back on) and re-issue the same query with
   * the reduced active set; the engine renormalizes the remaining weights.
   */
  async toggle(criterion: Criterion): Promise<void> {
    if (this.active.has(criterion)) {
      this.active.delete(criterion);
    } else {
      this.active.add(criterion);
    }
    await this.retrieve();
  }

  isActive(criterion: Criterion): boolean {
    return this.active.has(criterion);
  }

  private async retrieve(): Promise<void> {
    const request: RetrieveRequest = {
      headline: this.headline,
      observation_raw: this.observationRaw,
      active: this.activeCriteria,
    };
    try {
      const response = await this.client.retrieve(request);
      this.lastResponse = response;
      this.lastError = null;
      clearError(this.elements.banner);
      renderResults(this.elements.results, response);
      renderDiagnostics(this.elements.diagnostics, response.diagnostics);
    } catch (error) {
      const apiError =
        error instanceof ApiError
          ? error
          : new ApiError("internal", String(error), 0);
      this.lastError = apiError;
      // Keep the previous results on screen; only the banner changes.
      renderError(this.elements.banner, apiError);
    }
  }
}
