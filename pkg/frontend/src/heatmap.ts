/** Heatmap segmentation over the service's own tokenization.
 *
 * The document is sliced purely by the token offsets the service returned;
 * the client never re-tokenizes, so highlighting can't drift from what the
 * model actually scored. Unattributed stretches (whitespace, punctuation,
 * anything outside a token) come through as plain segments.
 */

import { Attribution, TokenSpan } from "./api.js";

export interface HeatSegment {
  text: string;
  attributed: boolean;
  /** magnitude / document-max magnitude, in [0, 1]; 0 for plain segments */
  intensity: number;
  /** the raw signed attribution value; 0 for plain segments */
  signed: number;
}

export function heatmapSegments(
  document: string,
  tokens: TokenSpan[],
  attributions: Attribution[],
): HeatSegment[] {
  const byPosition = new Map<number, Attribution>();
  let max = 0;
  for (const a of attributions) {
    byPosition.set(a.position, a);
    max = Math.max(max, a.magnitude);
  }

  const plain = (text: string): HeatSegment => ({
    text,
    attributed: false,
    intensity: 0,
    signed: 0,
  });

  const segments: HeatSegment[] = [];
  let cursor = 0;
  tokens.forEach((token, position) => {
    if (token.start > cursor) {
      segments.push(plain(document.slice(cursor, token.start)));
    }
    const text = document.slice(token.start, token.end);
    const attribution = byPosition.get(position);
    if (attribution === undefined || max <= 0) {
      segments.push(plain(text));
    } else {
      segments.push({
        text,
        attributed: true,
        intensity: attribution.magnitude / max,
        signed: attribution.value,
      });
    }
    cursor = token.end;
  });
  if (cursor < document.length) {
    segments.push(plain(document.slice(cursor)));
  }
  return segments;
}
