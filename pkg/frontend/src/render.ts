// DOM painting. Everything visible derives from the RenderModel; click
// handlers receive action ids that were validated against the server mask.

import { RenderModel } from "./state.js";
import { COLOR_CSS, COLOR_NAMES } from "./types.js";

export interface Handlers {
  onRow(row: number): void;
  onColor(color: number): void;
}

function chipSpan(color: number): string {
  return `<span class="chip" style="background:${COLOR_CSS[color]}" title="${COLOR_NAMES[color]}"></span>`;
}

export function paint(root: HTMLElement, model: RenderModel, handlers: Handlers): void {
  const rows = model.board
    .map((pile, row) => {
      const clickable = model.clickableRows.includes(row);
      const chips = pile.map(chipSpan).join("");
      return `<div class="pile ${clickable ? "clickable" : ""}" data-row="${row}">
        <span class="pile-label">pile ${row + 1}</span>
        <div class="pile-chips">${chips || '<span class="empty">empty</span>'}</div>
      </div>`;
    })
    .join("");

  const panels = model.panels
    .map((panel) => {
      const classes = [
        "panel",
        panel.isCurrent ? "current" : "",
        panel.eliminated ? "eliminated" : "",
        panel.isWinner ? "winner" : "",
      ].join(" ");
      const prisoners = panel.prisoners
        .map((entry) => `${chipSpan(entry.color)}×${entry.count}`)
        .join(" ");
      const colorClickable = model.clickableColors.includes(panel.player);
      return `<div class="${classes}" style="border-color:${COLOR_CSS[panel.player]}">
        <div class="panel-head ${colorClickable ? "clickable" : ""}" data-color="${panel.player}">
          ${chipSpan(panel.player)} ${panel.name}
          ${panel.eliminated ? '<span class="badge">eliminated</span>' : ""}
          ${panel.isWinner ? '<span class="badge win">winner</span>' : ""}
        </div>
        <div>reserve: ${panel.reserve}</div>
        <div>prisoners: ${prisoners || "none"}</div>
      </div>`;
    })
    .join("");

  const feed = model.feed
    .slice(-40)
    .map((entry) => `<li class="${entry.text.includes("deepest chip") ? "deepest" : ""}">
      <span class="v">#${entry.version}</span> ${entry.text}</li>`)
    .join("");

  root.innerHTML = `
    <div class="banner">
      ${
        model.done
          ? model.phaseLabel
          : `${COLOR_NAMES[model.currentPlayer]} to move: ${model.phaseLabel}`
      }
    </div>
    <div class="layout">
      <div class="board">${rows}</div>
      <div class="side">
        <div class="panels">${panels}</div>
        <ul class="feed">${feed}</ul>
      </div>
    </div>`;

  root.querySelectorAll<HTMLElement>(".pile.clickable").forEach((el) => {
    el.addEventListener("click", () => handlers.onRow(Number(el.dataset.row)));
  });
  root.querySelectorAll<HTMLElement>(".panel-head.clickable").forEach((el) => {
    el.addEventListener("click", () => handlers.onColor(Number(el.dataset.color)));
  });
}
