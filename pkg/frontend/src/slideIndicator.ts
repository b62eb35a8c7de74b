import type { Manifest } from "./types.js";

/**
 * Pure manifest lookup: which slide is on screen at playhead t (ms).
 *
 * Each entry covers [start_ms, end_ms); a timestamp exactly on a boundary
 * therefore belongs to the later entry. Past the end of the manifest the
 * last slide stays up (the player parks on the final frame).
 */
export function slideAt(manifest: Manifest, tMs: number): number {
  const entries = manifest.entries;
  if (entries.length === 0) return 0;
  if (tMs < entries[0].start_ms) return entries[0].slide_index;
  for (const entry of entries) {
    if (tMs >= entry.start_ms && tMs < entry.end_ms) return entry.slide_index;
  }
  return entries[entries.length - 1].slide_index;
}
