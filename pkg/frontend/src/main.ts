/** DOM wiring for the editor page. All logic lives in the imported modules;
 * this file only moves values between the session object and the page. */

import { ApiClient, joinedDocument, Objective, Scheme } from "./api.js";
import { heatmapSegments } from "./heatmap.js";
import { DraftSession, displayedScore } from "./state.js";
import {
  curveMarkerX,
  deltaText,
  escapeHtml,
  formatValue,
  heatmapHtml,
  pdfCurvePath,
  scoreLine,
} from "./view.js";

const CURVE_WIDTH = 560;
const CURVE_HEIGHT = 120;

declare global {
  interface Window {
    TOXPROP_SERVICE?: string;
  }
}

function element<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing #${id}`);
  }
  return node as T;
}

function main(): void {
  const api = new ApiClient(window.TOXPROP_SERVICE ?? "http://127.0.0.1:8000");
  const session = new DraftSession(api);

  const titleInput = element<HTMLInputElement>("title");
  const bodyInput = element<HTMLTextAreaElement>("body");
  const rescoreButton = element<HTMLButtonElement>("rescore");
  const objectiveSelect = element<HTMLSelectElement>("objective");
  const schemeSelect = element<HTMLSelectElement>("scheme");
  const statusBadge = element<HTMLSpanElement>("status");
  const banner = element<HTMLDivElement>("banner");
  const scoreOut = element<HTMLDivElement>("score");
  const curveSvg = element<HTMLElement>("curve");
  const heatmapOut = element<HTMLDivElement>("heatmap");
  const historyList = element<HTMLUListElement>("history");
  const compareLeft = element<HTMLSelectElement>("compare-left");
  const compareRight = element<HTMLSelectElement>("compare-right");
  const compareButton = element<HTMLButtonElement>("compare");
  const compareOut = element<HTMLDivElement>("compare-out");
  const modelLine = element<HTMLDivElement>("model-line");

  function renderCurve(): void {
    const curve = session.score?.curve ?? null;
    const path = pdfCurvePath(curve, CURVE_WIDTH, CURVE_HEIGHT);
    if (path === "") {
      curveSvg.innerHTML = "";
      return;
    }
    const display = session.currentDisplay();
    const marker =
      display === null
        ? ""
        : `<line x1="${curveMarkerX(display.value, CURVE_WIDTH)}" y1="0" ` +
          `x2="${curveMarkerX(display.value, CURVE_WIDTH)}" y2="${CURVE_HEIGHT}" ` +
          `stroke="#555" stroke-dasharray="4 3"/>`;
    curveSvg.innerHTML = `<path d="${path}" fill="none" stroke="#b91c1c" stroke-width="1.5"/>${marker}`;
  }

  function renderHeatmap(): void {
    const explanation = session.explanation;
    const entry = session.history[session.history.length - 1];
    if (explanation === null || entry === undefined) {
      heatmapOut.innerHTML = "";
      return;
    }
    const documentText = joinedDocument(entry.title, entry.body);
    const segments = heatmapSegments(documentText, explanation.tokens, explanation.attributions);
    heatmapOut.innerHTML = heatmapHtml(segments);
  }

  function renderHistory(): void {
    historyList.innerHTML = session.history
      .map((entry) => {
        const value = formatValue(displayedScore(entry.score, session.objective).value);
        return `<li>#${entry.index} ${value} — ${escapeHtml(entry.title || "(untitled)")}</li>`;
      })
      .join("");
    const options = session.history
      .map((entry) => `<option value="${entry.index}">#${entry.index}</option>`)
      .join("");
    for (const select of [compareLeft, compareRight]) {
      const previous = select.value;
      select.innerHTML = options;
      if (previous !== "" && Number(previous) < session.history.length) {
        select.value = previous;
      }
    }
    const disabled = !session.canCompare();
    compareButton.disabled = disabled;
    compareLeft.disabled = disabled;
    compareRight.disabled = disabled;
  }

  function render(): void {
    statusBadge.textContent =
      session.status === "loading" ? "scoring…" : session.stale ? "stale" : "up to date";
    statusBadge.className = session.status === "loading" ? "loading" : session.stale ? "stale" : "fresh";
    banner.hidden = session.status !== "error";
    banner.textContent = session.errorMessage ?? "";
    const display = session.currentDisplay();
    scoreOut.textContent = display === null ? "no score yet" : scoreLine(display);
    renderCurve();
    renderHeatmap();
    renderHistory();
  }

  async function run(): Promise<void> {
    render();
    await session.rescore();
    render();
  }

  titleInput.addEventListener("input", () => {
    session.setTitle(titleInput.value);
    render();
  });
  bodyInput.addEventListener("input", () => {
    session.setBody(bodyInput.value);
    render();
  });
  rescoreButton.addEventListener("click", () => {
    void run();
  });
  document.addEventListener("keydown", (event) => {
    if ((event.ctrlKey || event.metaKey) && event.key === "Enter") {
      event.preventDefault();
      void run();
    }
  });
  objectiveSelect.addEventListener("change", () => {
    session.setObjective(objectiveSelect.value as Objective);
    render(); // display-only: no request leaves the page
  });
  schemeSelect.addEventListener("change", () => {
    session.setScheme(schemeSelect.value as Scheme);
  });
  compareButton.addEventListener("click", () => {
    if (!session.canCompare()) {
      return;
    }
    const result = session.compare(Number(compareLeft.value), Number(compareRight.value));
    const leftValue = displayedScore(result.left.score, session.objective).value;
    const rightValue = displayedScore(result.right.score, session.objective).value;
    compareOut.innerHTML =
      `<div class="pane"><h4>#${result.left.index} (${formatValue(leftValue)})</h4>` +
      `<p>${escapeHtml(joinedDocument(result.left.title, result.left.body))}</p></div>` +
      `<div class="pane"><h4>#${result.right.index} (${formatValue(rightValue)})</h4>` +
      `<p>${escapeHtml(joinedDocument(result.right.title, result.right.body))}</p></div>` +
      `<div class="delta">delta ${deltaText(result.delta)}</div>`;
  });

  api
    .health()
    .then((health) => {
      modelLine.textContent = `model ${health.kind} · service v${health.version}`;
    })
    .catch(() => {
      modelLine.textContent = "service unreachable — start it with: toxprop serve --model <artifact>";
    });

  render();
}

main();
