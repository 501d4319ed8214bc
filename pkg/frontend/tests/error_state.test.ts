/**
 * Error handling: a failed retrieval shows a banner and leaves the previous
 * results untouched, for both service-reported errors (HTTP 4xx/5xx JSON
 * bodies) and plain connectivity failures.
 */

import { beforeEach, describe, expect, it } from "vitest";

import raw from "./fixtures/scripted_queries.json";
import { ApiClient, ApiError } from "../src/api.js";
import { ConsoleController } from "../src/console.js";
import {
  makeElements,
  queuedFetch,
  type Fixtures,
} from "./helpers.js";

const fixtures = raw as unknown as Fixtures;

function snapshot(results: HTMLElement) {
  const cards = results.querySelectorAll<HTMLElement>(".result-card");
  return {
    count: cards.length,
    ids: Array.from(cards, (card) => card.dataset.trId),
    aggregates: Array.from(
      cards,
      (card) => card.querySelector(".aggregate")!.textContent,
    ),
  };
}

describe("error states", () => {
  beforeEach(() => {
    document.body.replaceChildren();
  });

  it("keeps prior results when the service rejects the request", async () => {
    const good = fixtures.scripted_queries[0]!;
    const rejection = fixtures.error_responses.unknown_criterion!;
    const { fn } = queuedFetch([
      { status: 200, body: good.response },
      { status: rejection.status, body: rejection.body },
    ]);
    const elements = makeElements();
    const controller = new ConsoleController(
      new ApiClient("http://engine.test", fn),
      elements,
    );

    await controller.submit(
      good.request.headline ?? "",
      good.request.observation_raw ?? "",
    );
    const before = snapshot(elements.results);
    expect(before.count).toBeGreaterThan(0);

    await controller.toggle("impact");

    // The banner reports the service's own category and message...
    expect(elements.banner.hidden).toBe(false);
    expect(elements.banner.classList.contains("error")).toBe(true);
    expect(elements.banner.textContent).toContain(rejection.body.error);
    expect(elements.banner.textContent).toContain(rejection.body.message);
    expect(controller.lastError).toBeInstanceOf(ApiError);
    expect(controller.lastError!.status).toBe(rejection.status);

    // ...and the previous results are still on screen, unchanged.
    expect(snapshot(elements.results)).toEqual(before);
    expect(controller.lastResponse).not.toBeNull();
  });

  it("keeps prior results when the service is unreachable", async () => {
    const good = fixtures.scripted_queries[1]!;
    const { fn } = queuedFetch([
      { status: 200, body: good.response },
      { status: -1 }, // fetch rejects
    ]);
    const elements = makeElements();
    const controller = new ConsoleController(
      new ApiClient("http://engine.test", fn),
      elements,
    );

    await controller.submit(
      good.request.headline ?? "",
      good.request.observation_raw ?? "",
    );
    const before = snapshot(elements.results);

    await controller.toggle("condition");

    expect(elements.banner.textContent).toContain("unreachable");
    expect(snapshot(elements.results)).toEqual(before);
  });

  it("recovers after an error once a retrieval succeeds again", async () => {
    const good = fixtures.scripted_queries[0]!;
    const rejection = fixtures.error_responses.empty_query!;
    const { fn } = queuedFetch([
      { status: 200, body: good.response },
      { status: rejection.status, body: rejection.body },
      { status: 200, body: good.response },
    ]);
    const elements = makeElements();
    const controller = new ConsoleController(
      new ApiClient("http://engine.test", fn),
      elements,
    );

    await controller.submit(
      good.request.headline ?? "",
      good.request.observation_raw ?? "",
    );
    await controller.toggle("impact"); // fails, banner up
    expect(elements.banner.hidden).toBe(false);

    await controller.toggle("impact"); // succeeds, banner clears
    expect(elements.banner.hidden).toBe(true);
    expect(elements.banner.textContent).toBe("");
    expect(controller.lastError).toBeNull();
  });
});
