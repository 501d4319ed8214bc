/** Shared test scaffolding: fixture types, DOM roots, and a queued fetch. */

import type {
  RetrieveRequest,
  RetrieveResponse,
} from "../src/api.js";
import type { ConsoleElements } from "../src/console.js";

export interface ScriptedQuery {
  name: string;
  request: RetrieveRequest;
  response: RetrieveResponse;
}

export interface TogglePair {
  name: string;
  removed: string;
  full: { request: RetrieveRequest; response: RetrieveResponse };
  reduced: { request: RetrieveRequest; response: RetrieveResponse };
}

export interface ErrorResponse {
  status: number;
  body: { error: string; message: string };
}

export interface Fixtures {
  scripted_queries: ScriptedQuery[];
  toggle_pairs: TogglePair[];
  error_responses: Record<string, ErrorResponse>;
}

export function makeElements(): ConsoleElements {
  const make = (id: string) => {
    const element = document.createElement("div");
    element.id = id;
    document.body.appendChild(element);
    return element;
  };
  return {
    results: make("results"),
    diagnostics: make("diagnostics"),
    banner: make("banner"),
  };
}

export interface QueuedResponse {
  status: number; // -1 simulates a network failure (fetch rejects)
  body?: unknown;
}

export interface RecordedCall {
  url: string;
  init?: RequestInit;
}

export function queuedFetch(queue: QueuedResponse[]) {
  const calls: RecordedCall[] = [];
  const fn = async (url: string, init?: RequestInit): Promise<Response> => {
    calls.push({ url, init });
    const next = queue.shift();
    if (!next) throw new Error(`unexpected request to ${url}`);
    if (next.status === -1) throw new TypeError("network down");
    return new Response(JSON.stringify(next.body ?? {}), {
      status: next.status,
      headers: { "content-type": "application/json" },
    });
  };
  return { fn, calls };
}

export function requestBody(call: RecordedCall): Record<string, unknown> {
  return JSON.parse(String(call.init?.body)) as Record<string, unknown>;
}
