import test from "node:test";
import assert from "node:assert/strict";

import { layeredLayout } from "../src/layout.js";
import type { GraphViewModel, VmNode } from "../src/viewmodel.js";

function syntheticVm(layerSizes: number[]): GraphViewModel {
  const layers: string[][] = [];
  const nodes: VmNode[] = [];
  layerSizes.forEach((size, depth) => {
    const layer: string[] = [];
    for (let i = 0; i < size; i += 1) {
      const id = `n${depth}-${i}`;
      layer.push(id);
      nodes.push({
        id,
        kind: depth === 0 ? "root" : "issue",
        label: id,
        layer: depth,
        removed: false,
        selected: false,
        expanded: false,
        confidence: false,
        connectivity: null,
        verdict: null,
        detail: null,
      });
    }
    layers.push(layer);
  });
  return {
    cveId: "CVE-2021-1111",
    status: "patches-found",
    nodes,
    edges: [],
    layers,
    reviewable: new Set(),
  };
}

test("every node gets a position and layers keep distinct y", () => {
  const vm = syntheticVm([1, 3, 5]);
  const { positions } = layeredLayout(vm);
  assert.equal(positions.size, 9);
  const ys = new Set([...positions.values()].map((p) => p.y));
  assert.equal(ys.size, 3);
});

test("no two nodes of one layer overlap, even at 200 nodes", () => {
  const vm = syntheticVm([1, 4, 60, 75, 60]);
  assert.equal(vm.nodes.length, 200);
  const { positions, width, height } = layeredLayout(vm);
  assert.ok(width > 0 && height > 0);
  for (const layer of vm.layers) {
    const xs = layer.map((id) => positions.get(id)!.x);
    const sorted = [...xs].sort((a, b) => a - b);
    for (let i = 1; i < sorted.length; i += 1) {
      assert.ok(
        sorted[i] - sorted[i - 1] > 1,
        `overlap within layer: ${sorted[i - 1]} vs ${sorted[i]}`,
      );
    }
  }
});

test("deeper layers sit strictly lower", () => {
  const vm = syntheticVm([1, 2, 2, 1]);
  const { positions } = layeredLayout(vm);
  const yOf = (id: string) => positions.get(id)!.y;
  assert.ok(yOf("n0-0") < yOf("n1-0"));
  assert.ok(yOf("n1-1") < yOf("n2-0"));
  assert.ok(yOf("n2-1") < yOf("n3-0"));
});
