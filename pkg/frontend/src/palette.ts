// Color palettes keyed by the server-assigned color_index values. The server
// owns identity (which index a hypothesis or agent has); the client only maps
// indices to pixels, so every view shares one global legend.

export const HYPOTHESIS_PALETTE = [
  "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1",
  "#76b7b2", "#edc948", "#ff9da7", "#9c755f", "#bab0ac",
] as const;

export const AGENT_PALETTE = [
  "#2f4b7c", "#ff7c43", "#1b998b", "#d45087", "#665191",
  "#a05195", "#f95d6a", "#003f5c", "#7a5195", "#ffa600",
] as const;

export function hypothesisColor(colorIndex: number): string {
  return HYPOTHESIS_PALETTE[colorIndex % HYPOTHESIS_PALETTE.length]!;
}

export function agentColor(colorIndex: number): string {
  return AGENT_PALETTE[colorIndex % AGENT_PALETTE.length]!;
}
