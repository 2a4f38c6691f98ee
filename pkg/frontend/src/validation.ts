/** Client-side copy of the server's span location and paraphrase rule.
 *
 * The server verdict is authoritative; this port exists so the UI can gate
 * the submit control on every keystroke without a network round trip.  The
 * shared fixture in ../../tests/fixtures/validation_cases.json holds both
 * implementations to exact agreement, case by case.
 */

export type ExpectedValue = readonly [slot: string, value: string];

export interface Span {
  slot: string;
  start: number;
  end: number; // exclusive
  value: string;
}

export interface LocalVerdict {
  accepted: boolean;
  spans: Span[];
  missing: [string, string][];
}

/** Per-character lowercase that never changes string length. */
export function fold(text: string): string {
  let out = "";
  for (const ch of text) {
    const low = ch.toLowerCase();
    out += low.length === ch.length ? low : ch;
  }
  return out;
}

function codePoints(text: string): number {
  let n = 0;
  for (const _ of text) n += 1;
  return n;
}

/** Locate each expected value in the utterance by string search.
 *
 * Case-insensitive, offsets index the original text, each value claims its
 * leftmost occurrence that overlaps no earlier claim.  Longer values claim
 * first so a short value never sits inside a longer one's match; returned
 * spans follow the order of `expected`.  Unlocated values come back in the
 * missing list.
 */
export function findSlotSpans(
  utterance: string,
  expected: ExpectedValue[],
): { spans: Span[]; missing: [string, string][] } {
  const hay = fold(utterance);
  const order = expected
    .map((_, i) => i)
    .sort((a, b) => codePoints(expected[b]![1]) - codePoints(expected[a]![1]));
  const claims: [number, number][] = [];
  const found = new Map<number, Span>();
  for (const i of order) {
    const [slot, value] = expected[i]!;
    const needle = fold(value);
    if (!needle) continue;
    let pos = 0;
    for (;;) {
      const idx = hay.indexOf(needle, pos);
      if (idx < 0) break;
      const end = idx + needle.length;
      if (claims.some(([cs, ce]) => idx < ce && cs < end)) {
        pos = idx + 1;
        continue;
      }
      claims.push([idx, end]);
      found.set(i, { slot, start: idx, end, value: utterance.slice(idx, end) });
      break;
    }
  }
  const spans = [...found.keys()].sort((a, b) => a - b).map((i) => found.get(i)!);
  const missing: [string, string][] = [];
  expected.forEach(([slot, value], i) => {
    if (!found.has(i)) missing.push([slot, value]);
  });
  return { spans, missing };
}

/** One turn's verdict: accepted iff every expected value was located. */
export function validateTurnText(
  values: ExpectedValue[],
  text: string,
): LocalVerdict {
  const { spans, missing } = findSlotSpans(text, values);
  return { accepted: missing.length === 0, spans, missing };
}
