/** Application shell: configuration, hash routing, 60-second polling. */

import {
  ApiError,
  fetchLatest,
  getChemicalPage,
  listDevices,
  listReadings,
  type ApiConfig,
} from "./api.js";
import { buildHistorySeries, renderHistoryChart } from "./chart.js";
import {
  renderDashboard,
  renderEmptyState,
  renderInfoPage,
  renderNotFound,
  renderOfflineBanner,
} from "./render.js";
import type { ChemicalKind, ChemicalPage, Device } from "./types.js";
import { TILE_ORDER } from "./types.js";
import {
  buildInfoViewModel,
  buildReadingViewModel,
  type PageMap,
} from "./viewmodel.js";

export const POLL_INTERVAL_MS = 60_000;
const HISTORY_DAYS = 7;

function readConfig(): ApiConfig {
  const params = new URLSearchParams(location.search);
  const baseUrl =
    params.get("api") ?? localStorage.getItem("sapsense.api") ?? location.origin;
  const token =
    params.get("token") ?? localStorage.getItem("sapsense.token") ?? undefined;
  if (params.get("api")) localStorage.setItem("sapsense.api", baseUrl);
  if (params.get("token")) localStorage.setItem("sapsense.token", token ?? "");
  return token ? { baseUrl, token } : { baseUrl };
}

interface AppState {
  config: ApiConfig;
  devices: Device[];
  deviceId: string | null;
  pages: PageMap;
  offline: boolean;
}

function deviceLabel(state: AppState): string {
  const device = state.devices.find((d) => d.deviceId === state.deviceId);
  return device?.label ?? state.deviceId ?? "device";
}

async function loadChemicalPages(config: ApiConfig): Promise<PageMap> {
  const pages: PageMap = {};
  await Promise.all(
    TILE_ORDER.map(async (kind) => {
      pages[kind] = await getChemicalPage(config, kind);
    }),
  );
  return pages;
}

function setContent(root: HTMLElement, ...nodes: HTMLElement[]): void {
  root.replaceChildren(...nodes);
}

async function showDashboard(root: HTMLElement, state: AppState): Promise<void> {
  if (!state.deviceId) {
    setContent(root, renderEmptyState("your device"));
    return;
  }
  const latest = await fetchLatest(state.config, state.deviceId);
  if (!latest) {
    setContent(root, renderEmptyState(deviceLabel(state)));
    return;
  }
  const model = buildReadingViewModel(deviceLabel(state), latest, state.pages);
  setContent(root, renderDashboard(model));
}

async function showHistory(
  root: HTMLElement,
  state: AppState,
  chemical: string,
): Promise<void> {
  if (!TILE_ORDER.includes(chemical as ChemicalKind) || !state.deviceId) {
    setContent(root, renderNotFound(chemical));
    return;
  }
  const kind = chemical as ChemicalKind;
  const page = state.pages[kind];
  if (!page) {
    setContent(root, renderNotFound(chemical));
    return;
  }
  const from = new Date(Date.now() - HISTORY_DAYS * 24 * 3600 * 1000);
  const rows = await listReadings(state.config, state.deviceId, {
    from: from.toISOString(),
    limit: 1000,
  });
  const series = buildHistorySeries(rows, kind);
  const wrap = document.createElement("div");
  wrap.className = "history-view";
  const title = document.createElement("h2");
  title.textContent = `${page.displayName}, last ${HISTORY_DAYS} days`;
  wrap.appendChild(title);
  if (series.some((p) => p.value !== null)) {
    wrap.appendChild(renderHistoryChart(series, page) as unknown as HTMLElement);
  } else {
    const empty = document.createElement("p");
    empty.className = "empty-hint";
    empty.textContent = "No usable readings in this range yet.";
    wrap.appendChild(empty);
  }
  setContent(root, wrap);
}

async function showChemicalInfo(
  root: HTMLElement,
  state: AppState,
  kind: string,
): Promise<void> {
  let page: ChemicalPage;
  try {
    page = await getChemicalPage(state.config, kind);
  } catch (error) {
    if (error instanceof ApiError && error.status === 404) {
      setContent(root, renderNotFound(kind));
      return;
    }
    throw error;
  }
  const latest = state.deviceId
    ? await fetchLatest(state.config, state.deviceId)
    : null;
  setContent(root, renderInfoPage(buildInfoViewModel(page, latest)));
}

async function route(root: HTMLElement, state: AppState): Promise<void> {
  const hash = location.hash.replace(/^#\/?/, "");
  const [head, tail] = hash.split("/", 2);
  try {
    if (head === "history" && tail) {
      await showHistory(root, state, tail);
    } else if (head === "chemical" && tail) {
      await showChemicalInfo(root, state, tail);
    } else {
      await showDashboard(root, state);
    }
    state.offline = false;
    document.querySelector(".offline-banner")?.remove();
  } catch {
    if (!state.offline) {
      state.offline = true;
      document.body.prepend(renderOfflineBanner());
    }
  }
}

export async function startApp(root: HTMLElement): Promise<void> {
  const config = readConfig();
  const state: AppState = {
    config,
    devices: [],
    deviceId: null,
    pages: {},
    offline: false,
  };
  try {
    [state.devices, state.pages] = await Promise.all([
      listDevices(config),
      loadChemicalPages(config),
    ]);
  } catch {
    document.body.prepend(renderOfflineBanner());
  }
  const params = new URLSearchParams(location.search);
  state.deviceId =
    params.get("device") ?? state.devices[0]?.deviceId ?? null;

  await route(root, state);
  window.addEventListener("hashchange", () => void route(root, state));
  setInterval(() => void route(root, state), POLL_INTERVAL_MS);
}
