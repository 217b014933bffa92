// Fixed categorical palette indexed by control-state id. The letter is the
// colorblind-safe fallback and is always rendered alongside the color.

export const PALETTE: readonly string[] = [
  "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
  "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5",
  "#c49c94", "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5",
];

export function letterFor(state: number): string {
  if (!Number.isInteger(state) || state < 0 || state >= 26) {
    throw new RangeError(`no letter for state ${state}`);
  }
  return String.fromCharCode(65 + state);
}

export function stateFor(letter: string): number {
  const idx = letter.charCodeAt(0) - 65;
  if (letter.length !== 1 || idx < 0 || idx >= 26) {
    throw new RangeError(`invalid state letter ${JSON.stringify(letter)}`);
  }
  return idx;
}

// Past the palette the letter alone carries the identity.
export function colorFor(state: number): string | null {
  return state >= 0 && state < PALETTE.length ? PALETTE[state] : null;
}
