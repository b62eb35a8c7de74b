import { describe, expect, it } from "vitest";
import { slideAt } from "../src/slideIndicator.js";
import type { Manifest } from "../src/types.js";

// Three manifest shapes: multi-slide, single-slide, and non-uniform segments.
const even: Manifest = {
  entries: [
    { slide_index: 1, start_ms: 0, end_ms: 3000 },
    { slide_index: 2, start_ms: 3000, end_ms: 8000 },
    { slide_index: 3, start_ms: 8000, end_ms: 12000 },
  ],
  total_duration_ms: 12000,
};

const single: Manifest = {
  entries: [{ slide_index: 1, start_ms: 0, end_ms: 5000 }],
  total_duration_ms: 5000,
};

const ragged: Manifest = {
  entries: [
    { slide_index: 1, start_ms: 0, end_ms: 400 },
    { slide_index: 2, start_ms: 400, end_ms: 30000 },
    { slide_index: 3, start_ms: 30000, end_ms: 30401 },
    { slide_index: 4, start_ms: 30401, end_ms: 61000 },
  ],
  total_duration_ms: 61000,
};

describe("slideAt", () => {
  it("starts on the first slide at t=0", () => {
    expect(slideAt(even, 0)).toBe(1);
    expect(slideAt(single, 0)).toBe(1);
    expect(slideAt(ragged, 0)).toBe(1);
  });

  it("assigns a boundary timestamp to the later entry", () => {
    for (const manifest of [even, single, ragged]) {
      for (const entry of manifest.entries.slice(1)) {
        expect(slideAt(manifest, entry.start_ms)).toBe(entry.slide_index);
      }
    }
    expect(slideAt(even, 3000)).toBe(2);
    expect(slideAt(even, 8000)).toBe(3);
    expect(slideAt(ragged, 400)).toBe(2);
    expect(slideAt(ragged, 30000)).toBe(3);
    expect(slideAt(ragged, 30401)).toBe(4);
  });

  it("stays on the last slide at t=total-1", () => {
    expect(slideAt(even, even.total_duration_ms - 1)).toBe(3);
    expect(slideAt(single, single.total_duration_ms - 1)).toBe(1);
    expect(slideAt(ragged, ragged.total_duration_ms - 1)).toBe(4);
  });

  it("covers interior timestamps", () => {
    expect(slideAt(even, 2999)).toBe(1);
    expect(slideAt(even, 7999)).toBe(2);
    expect(slideAt(ragged, 399)).toBe(1);
    expect(slideAt(ragged, 30400)).toBe(3);
  });

  it("parks on the last slide past the end of the manifest", () => {
    expect(slideAt(even, even.total_duration_ms)).toBe(3);
    expect(slideAt(even, even.total_duration_ms + 500)).toBe(3);
  });
});
