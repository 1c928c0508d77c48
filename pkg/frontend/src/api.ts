/** Thin typed client for the relay API. Concurrent GETs to the same URL are
 * deduplicated: callers share one in-flight request per endpoint.
 */

import type { ChemicalPage, Device, ReadingRecord } from "./types.js";

export interface ApiConfig {
  baseUrl: string;
  token?: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

const inflight = new Map<string, Promise<unknown>>();

async function getJson<T>(config: ApiConfig, path: string): Promise<T> {
  const url = config.baseUrl.replace(/\/+$/, "") + path;
  const pending = inflight.get(url);
  if (pending) return pending as Promise<T>;

  const headers: Record<string, string> = {};
  if (config.token) headers["Authorization"] = `Bearer ${config.token}`;
  const request = fetch(url, { headers })
    .then(async (response) => {
      if (!response.ok) {
        throw new ApiError(response.status, `${path} -> ${response.status}`);
      }
      return (await response.json()) as T;
    })
    .finally(() => inflight.delete(url));
  inflight.set(url, request);
  return request;
}

export function listDevices(config: ApiConfig): Promise<Device[]> {
  return getJson(config, "/api/v1/devices");
}

export function listReadings(
  config: ApiConfig,
  deviceId: string,
  options: { from?: string; to?: string; limit?: number } = {},
): Promise<ReadingRecord[]> {
  const params = new URLSearchParams();
  if (options.from) params.set("from", options.from);
  if (options.to) params.set("to", options.to);
  params.set("limit", String(options.limit ?? 1000));
  const query = params.toString();
  return getJson(
    config,
    `/api/v1/devices/${encodeURIComponent(deviceId)}/readings?${query}`,
  );
}

export function getChemicalPage(
  config: ApiConfig,
  kind: string,
): Promise<ChemicalPage> {
  return getJson(config, `/api/v1/chemicals/${encodeURIComponent(kind)}`);
}

/** Newest reading, or null when the device has none yet.
 *
 * The readings endpoint pages oldest-first with a 1000-row cap, so ask for
 * a recent window first (plenty at a 15-minute cadence) and only fall back
 * to the capped full list for devices that have been quiet for days.
 */
export async function fetchLatest(
  config: ApiConfig,
  deviceId: string,
  now: () => Date = () => new Date(),
): Promise<ReadingRecord | null> {
  const windowStart = new Date(now().getTime() - 48 * 3600 * 1000);
  const recent = await listReadings(config, deviceId, {
    from: windowStart.toISOString(),
    limit: 1000,
  });
  if (recent.length) return recent[recent.length - 1] ?? null;
  const all = await listReadings(config, deviceId, { limit: 1000 });
  return all.length ? (all[all.length - 1] ?? null) : null;
}
