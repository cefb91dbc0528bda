// Layered layout: root on top, advisory sources on the second rank, each
// deeper reference layer below, mirroring the network's depth semantics.

import type { GraphViewModel } from "./viewmodel.js";

export interface Point {
  x: number;
  y: number;
}

export interface LayoutResult {
  positions: Map<string, Point>;
  width: number;
  height: number;
}

export interface LayoutOptions {
  nodeGap: number;
  layerGap: number;
  margin: number;
}

export const DEFAULT_LAYOUT: LayoutOptions = {
  nodeGap: 170,
  layerGap: 110,
  margin: 60,
};

/** Evenly space each layer's nodes on its own horizontal rank. */
export function layeredLayout(
  vm: GraphViewModel,
  options: LayoutOptions = DEFAULT_LAYOUT,
): LayoutResult {
  const widest = Math.max(1, ...vm.layers.map((layer) => layer.length));
  const width = options.margin * 2 + (widest - 1) * options.nodeGap;
  const height = options.margin * 2 + (vm.layers.length - 1) * options.layerGap;
  const positions = new Map<string, Point>();
  vm.layers.forEach((layer, depth) => {
    const y = options.margin + depth * options.layerGap;
    const step = layer.length > 1 ? (width - options.margin * 2) / (layer.length - 1) : 0;
    const start =
      layer.length > 1 ? options.margin : width / 2;
    layer.forEach((nodeId, index) => {
      positions.set(nodeId, { x: start + index * step, y });
    });
  });
  return { positions, width, height };
}
