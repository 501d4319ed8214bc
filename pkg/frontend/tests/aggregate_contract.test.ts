/**
 * Rendering contract for the scripted-query corpus: every aggregate and
 * per-criterion score shown on screen equals the API value within display
 * rounding, and bars appear exactly for the effective active criteria.
 *
 * The fixtures are recorded request/response pairs from the live engine
 * (see scripts/generate_fixtures.py), not hand-written mocks.
 */

import { beforeEach, describe, expect, it } from "vitest";

import raw from "./fixtures/scripted_queries.json";
import { DISPLAY_EPSILON, SCORE_DECIMALS } from "../src/format.js";
import { renderResults } from "../src/view.js";
import type { Fixtures } from "./helpers.js";

const fixtures = raw as unknown as Fixtures;

describe("scripted query rendering", () => {
  let container: HTMLElement;

  beforeEach(() => {
    document.body.replaceChildren();
    container = document.createElement("div");
    document.body.appendChild(container);
  });

  it("ships twenty scripted queries", () => {
    expect(fixtures.scripted_queries.length).toBe(20);
  });

  for (const scripted of fixtures.scripted_queries) {
    it(`renders ${scripted.name} faithfully`, () => {
      const response = scripted.response;
      renderResults(container, response);

      const cards = container.querySelectorAll<HTMLElement>(".result-card");
      expect(cards.length).toBe(response.results.length);

      response.results.forEach((row, i) => {
        const card = cards[i]!;
        expect(card.dataset.trId).toBe(row.tr_id);

        // The rendered aggregate is the API aggregate within rounding.
        const shown = card.querySelector(".aggregate")!.textContent!;
        expect(shown).toBe(row.aggregated.toFixed(SCORE_DECIMALS));
        expect(Math.abs(parseFloat(shown) - row.aggregated)).toBeLessThanOrEqual(
          DISPLAY_EPSILON,
        );

        // One bar per scored active criterion, none for anything else.
        const bars = card.querySelectorAll<HTMLElement>(".bar-row");
        const expected = response.diagnostics.active_effective.filter(
          (criterion) => row.scores[criterion] !== undefined,
        );
        expect(bars.length).toBe(expected.length);
        bars.forEach((bar) => {
          const criterion = bar.dataset.criterion!;
          expect(response.diagnostics.active_effective).toContain(criterion);
          const value = bar.querySelector(".bar-value")!.textContent!;
          expect(value).toBe(row.scores[criterion]!.toFixed(SCORE_DECIMALS));
          expect(
            Math.abs(parseFloat(value) - row.scores[criterion]!),
          ).toBeLessThanOrEqual(DISPLAY_EPSILON);
        });

        // Base mode renders no bars at all.
        if (response.diagnostics.base_mode) {
          expect(bars.length).toBe(0);
        }
      });
    });
  }
});
