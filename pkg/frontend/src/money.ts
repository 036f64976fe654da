/** Stablecoin amounts travel as integer micro-units (1 token = 1,000,000). */

export const MICRO = 1_000_000;

export function formatAmount(microUnits: number, token = ""): string {
  const tokens = microUnits / MICRO;
  const text = tokens.toLocaleString("en-US", {
    minimumFractionDigits: 2,
    maximumFractionDigits: 6,
  });
  return token ? `${text} ${token}` : text;
}

export function parseAmount(input: string): number {
  const value = Number(input.replace(/[,\s]/g, ""));
  if (!Number.isFinite(value) || value <= 0) {
    throw new Error(`not a positive amount: ${input}`);
  }
  return Math.round(value * MICRO);
}
