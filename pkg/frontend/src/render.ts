// SVG rendering of the reference network plus the node detail panel.

import { DEFAULT_LAYOUT, layeredLayout } from "./layout.js";
import type { GraphViewModel, VmNode } from "./viewmodel.js";
import type { SelectedPatch, TraceReport } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

const KIND_CLASS: Record<string, string> = {
  root: "node-root",
  "advisory-source": "node-source",
  patch: "node-patch",
  issue: "node-issue",
  hybrid: "node-hybrid",
};

export interface RenderCallbacks {
  onNodeClick(node: VmNode): void;
}

function svgElement<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string>,
): SVGElementTagNameMap[K] {
  const element = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    element.setAttribute(key, value);
  }
  return element;
}

/** Render the layered graph into the container; returns rendered counts. */
export function renderNetwork(
  container: HTMLElement,
  vm: GraphViewModel,
  callbacks: RenderCallbacks,
): { nodeCount: number; edgeCount: number } {
  container.textContent = "";
  const { positions, width, height } = layeredLayout(vm, DEFAULT_LAYOUT);
  const svg = svgElement("svg", {
    viewBox: `0 0 ${width} ${height}`,
    width: "100%",
    height: "100%",
    class: "network-canvas",
  });

  let edgeCount = 0;
  for (const edge of vm.edges) {
    const from = positions.get(edge.from);
    const to = positions.get(edge.to);
    if (!from || !to) continue;
    const line = svgElement("line", {
      x1: String(from.x),
      y1: String(from.y + 16),
      x2: String(to.x),
      y2: String(to.y - 16),
      class: edge.dashed ? "edge edge-dashed" : "edge",
    });
    svg.appendChild(line);
    edgeCount += 1;
  }

  let nodeCount = 0;
  for (const node of vm.nodes) {
    const position = positions.get(node.id);
    if (!position) continue;
    const group = svgElement("g", {
      class: "node-group",
      transform: `translate(${position.x}, ${position.y})`,
    });
    const classes = [KIND_CLASS[node.kind] ?? "node-hybrid"];
    if (node.removed) classes.push("node-removed");
    if (node.selected) classes.push("node-selected");
    if (node.expanded) classes.push("node-expanded");
    const shape =
      node.kind === "advisory-source" || node.kind === "root"
        ? svgElement("rect", {
            x: "-60",
            y: "-16",
            width: "120",
            height: "32",
            rx: "6",
            class: classes.join(" "),
          })
        : svgElement("ellipse", {
            cx: "0",
            cy: "0",
            rx: "62",
            ry: "18",
            class: classes.join(" "),
          });
    group.appendChild(shape);
    const text = svgElement("text", {
      y: "4",
      "text-anchor": "middle",
      class: "node-label",
    });
    text.textContent = node.label;
    group.appendChild(text);
    if (node.connectivity !== null && node.selected) {
      const score = svgElement("text", {
        y: "-24",
        "text-anchor": "middle",
        class: "node-score",
      });
      score.textContent = `connectivity ${node.connectivity}`;
      group.appendChild(score);
    }
    if (node.verdict) {
      const badge = svgElement("text", {
        y: "32",
        "text-anchor": "middle",
        class: `verdict verdict-${node.verdict}`,
      });
      badge.textContent = node.verdict;
      group.appendChild(badge);
    }
    group.addEventListener("click", () => callbacks.onNodeClick(node));
    svg.appendChild(group);
    nodeCount += 1;
  }

  attachPanZoom(svg, width, height);
  container.appendChild(svg);
  return { nodeCount, edgeCount };
}

function attachPanZoom(svg: SVGSVGElement, width: number, height: number): void {
  let view = { x: 0, y: 0, w: width, h: height };
  let dragging: { startX: number; startY: number; origin: typeof view } | null = null;

  const apply = () =>
    svg.setAttribute("viewBox", `${view.x} ${view.y} ${view.w} ${view.h}`);

  svg.addEventListener("wheel", (event) => {
    event.preventDefault();
    const factor = event.deltaY > 0 ? 1.15 : 1 / 1.15;
    const newW = Math.min(width * 4, Math.max(width / 8, view.w * factor));
    const newH = newW * (height / width);
    view = {
      x: view.x + (view.w - newW) / 2,
      y: view.y + (view.h - newH) / 2,
      w: newW,
      h: newH,
    };
    apply();
  });
  svg.addEventListener("mousedown", (event) => {
    dragging = { startX: event.clientX, startY: event.clientY, origin: { ...view } };
  });
  svg.addEventListener("mousemove", (event) => {
    if (!dragging) return;
    const scale = view.w / svg.clientWidth;
    view.x = dragging.origin.x - (event.clientX - dragging.startX) * scale;
    view.y = dragging.origin.y - (event.clientY - dragging.startY) * scale;
    apply();
  });
  for (const name of ["mouseup", "mouseleave"]) {
    svg.addEventListener(name, () => {
      dragging = null;
    });
  }
}

/** Fill the detail panel for a clicked node. */
export function renderDetailPanel(
  panel: HTMLElement,
  node: VmNode,
  report: TraceReport,
): void {
  panel.textContent = "";
  const title = document.createElement("h3");
  title.textContent = node.label;
  panel.appendChild(title);

  const meta = document.createElement("dl");
  const addRow = (term: string, value: string) => {
    const dt = document.createElement("dt");
    dt.textContent = term;
    const dd = document.createElement("dd");
    dd.textContent = value;
    meta.append(dt, dd);
  };
  addRow("kind", node.kind + (node.removed ? " (removed: test/non-source only)" : ""));
  if (node.kind !== "root" && node.kind !== "advisory-source") {
    const link = document.createElement("a");
    link.href = node.id;
    link.textContent = node.id;
    link.target = "_blank";
    const dd = document.createElement("dd");
    const dt = document.createElement("dt");
    dt.textContent = "url";
    dd.appendChild(link);
    meta.append(dt, dd);
  }
  if (node.connectivity !== null) addRow("connectivity", String(node.connectivity));
  if (node.verdict) addRow("review", node.verdict);
  panel.appendChild(meta);

  if (node.detail) {
    const message = document.createElement("pre");
    message.className = "commit-message";
    message.textContent = node.detail.message;
    panel.appendChild(message);
    if (node.detail.changed_paths.length > 0) {
      const caption = document.createElement("h4");
      caption.textContent = `changed paths (${node.detail.changed_paths.length})`;
      panel.appendChild(caption);
      const list = document.createElement("ul");
      for (const path of node.detail.changed_paths) {
        const item = document.createElement("li");
        item.textContent = path;
        list.appendChild(item);
      }
      panel.appendChild(list);
    }
  }

  const selected: SelectedPatch | undefined = report.selected.find(
    (p) => p.node_id === node.id,
  );
  if (selected) {
    const caption = document.createElement("h4");
    caption.textContent = `evidence paths (${selected.paths.length})`;
    panel.appendChild(caption);
    const list = document.createElement("ol");
    for (const path of selected.paths) {
      const item = document.createElement("li");
      item.textContent = `${path.nodes.join(" → ")} (length ${path.raw_length}`
        + `, effective ${path.effective_length}, +${path.contribution})`;
      list.appendChild(item);
    }
    panel.appendChild(list);
  }
}
