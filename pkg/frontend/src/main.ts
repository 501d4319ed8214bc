/**
 * Browser entry point: wires the static page to the controller.
 *
 * The API base URL comes from `window.CREST_API_URL` when set (so the page
 * can be served from anywhere) and falls back to same-origin.
 */

import { ApiClient, CRITERIA, type Criterion } from "./api.js";
import { ConsoleController } from "./console.js";

declare global {
  interface Window {
    CREST_API_URL?: string;
  }
}

function mustFind<T extends HTMLElement>(id: string): T {
  const element = document.getElementById(id);
  if (!element) throw new Error(`missing element #${id}`);
  return element as T;
}

export function bootstrap(): ConsoleController {
  const client = new ApiClient(window.CREST_API_URL ?? "");
  const controller = new ConsoleController(client, {
    results: mustFind("results"),
    diagnostics: mustFind("diagnostics"),
    banner: mustFind("banner"),
  });

  const headline = mustFind<HTMLInputElement>("headline");
  const observation = mustFind<HTMLTextAreaElement>("observation");
  const form = mustFind<HTMLFormElement>("query-form");
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    void controller.submit(headline.value, observation.value).then(syncToggles);
  });

  const toggles = mustFind("criterion-toggles");
  for (const criterion of CRITERIA) {
    const label = document.createElement("label");
    label.className = "criterion-toggle";
    const box = document.createElement("input");
    box.type = "checkbox";
    box.checked = true;
    box.dataset.criterion = criterion;
    box.addEventListener("change", () => {
      void controller.toggle(criterion as Criterion);
    });
    label.append(box, document.createTextNode(` ${criterion}`));
    toggles.appendChild(label);
  }

  function syncToggles(): void {
    toggles
      .querySelectorAll<HTMLInputElement>("input[data-criterion]")
      .forEach((box) => {
        box.checked = controller.isActive(box.dataset.criterion as Criterion);
      });
  }

  void client
    .health()
    .then((health) => {
      mustFind("health").textContent = `service: ${health.status}`;
    })
    .catch(() => {
      mustFind("health").textContent = "service: unreachable";
    });

  return controller;
}

if (typeof document !== "undefined" && document.getElementById("query-form")) {
  bootstrap();
}
