/** DOM builders for the dashboard views. Every signal is shown as color
 * plus an icon and a text label, so color is never the only channel.
 */

import type { ReadingViewModel, InfoViewModel, Tile } from "./viewmodel.js";
import { NO_DATA } from "./viewmodel.js";
import type { Signal } from "./types.js";

export const SIGNAL_ICON: Record<Signal, string> = {
  green: "✓", // check
  yellow: "⚠", // warning triangle
  red: "✖", // cross
  gray: "◌", // dotted circle
};

const SIGNAL_LABEL: Record<Signal, string> = {
  green: "OK",
  yellow: "watch",
  red: "act",
  gray: NO_DATA,
};

function div(className: string, text?: string): HTMLDivElement {
  const node = document.createElement("div");
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function signalBadge(signal: Signal): HTMLSpanElement {
  const badge = document.createElement("span");
  badge.className = `signal-icon signal-${signal}`;
  badge.textContent = SIGNAL_ICON[signal];
  badge.setAttribute("role", "img");
  badge.setAttribute("aria-label", SIGNAL_LABEL[signal]);
  return badge;
}

export function renderTile(tile: Tile): HTMLElement {
  const node = div(`tile tile-${tile.signal}`);
  node.dataset["chemical"] = tile.chemical;
  node.dataset["signal"] = tile.signal;

  const header = div("tile-header");
  header.appendChild(signalBadge(tile.signal));
  header.appendChild(div("tile-name", tile.name));
  node.appendChild(header);
  node.appendChild(div("tile-value", tile.valueText));
  node.appendChild(div("tile-headline", tile.headline));

  const link = document.createElement("a");
  link.className = "tile-history-link";
  link.href = `#/history/${tile.chemical}`;
  link.textContent = "history";
  node.appendChild(link);
  return node;
}

export function renderDashboard(model: ReadingViewModel): HTMLElement {
  const root = div("dashboard");

  const banner = div(`banner banner-${model.banner.signal}`);
  banner.appendChild(signalBadge(model.banner.signal));
  banner.appendChild(div("banner-text", model.banner.text));
  root.appendChild(banner);

  const meta = div("capture-meta");
  meta.appendChild(
    div("capture-time", `${model.deviceLabel} · ${model.capturedAtText}`),
  );
  if (model.stale) {
    const badge = div("stale-badge", "stale: last reading over 24 h old");
    meta.appendChild(badge);
  }
  root.appendChild(meta);

  const grid = div("tile-grid");
  for (const tile of model.tiles) grid.appendChild(renderTile(tile));
  root.appendChild(grid);

  if (model.suggestions.length) {
    const list = div("suggestions");
    for (const card of model.suggestions) {
      const item = div(`suggestion-card suggestion-${card.signal}`);
      item.appendChild(signalBadge(card.signal));
      item.appendChild(div("suggestion-chemical", card.name));
      item.appendChild(div("suggestion-text", card.text));
      list.appendChild(item);
    }
    root.appendChild(list);
  }

  return root;
}

export function renderEmptyState(deviceLabel: string): HTMLElement {
  const root = div("empty-state");
  root.appendChild(div("empty-title", "No readings yet"));
  root.appendChild(
    div(
      "empty-hint",
      `Clip a chip onto the plant tonight and point the camera for ` +
        `"${deviceLabel}" at it; the first reading lands after the ` +
        `morning capture.`,
    ),
  );
  return root;
}

export function renderOfflineBanner(): HTMLElement {
  const node = div(
    "offline-banner",
    "Relay unreachable; showing the last data that loaded.",
  );
  node.setAttribute("role", "alert");
  return node;
}

export function renderNotFound(kind: string): HTMLElement {
  const root = div("not-found");
  root.appendChild(div("empty-title", "Unknown chemical"));
  root.appendChild(
    div("empty-hint", `"${kind}" is not one of the six chip chemicals.`),
  );
  return root;
}

export function renderInfoPage(model: InfoViewModel): HTMLElement {
  const root = div("info-page");
  root.appendChild(div("info-title", model.name));
  root.appendChild(div("info-summary", model.summary));
  root.appendChild(div("info-healthy", `Healthy range: ${model.healthyRange}`));

  const current = div("info-current");
  if (model.currentValueText !== null && model.currentSignal !== null) {
    current.appendChild(signalBadge(model.currentSignal));
    current.appendChild(
      div("info-current-value", `Latest reading: ${model.currentValueText}`),
    );
  } else {
    current.appendChild(div("info-current-value", `Latest reading: ${NO_DATA}`));
  }
  root.appendChild(current);
  return root;
}
