/**
 * Two offset families address the same text: the server counts Unicode
 * scalar values (one per character, astral or not), JavaScript strings
 * count UTF-16 code units (astral characters take two).  Everything sent
 * to the server uses scalar offsets; everything taken from the DOM
 * arrives in UTF-16 units.  These converters are the only place the two
 * families meet.
 */

export interface NormalizedConcept {
  value: string;
  gramLength: number;
}

export interface ScalarSpan {
  start: number;
  end: number;
}

function isHighSurrogate(unit: number): boolean {
  return unit >= 0xd800 && unit <= 0xdbff;
}

/** Number of Unicode scalar values in the string. */
export function scalarLength(text: string): number {
  let scalars = 0;
  for (let i = 0; i < text.length; i++) {
    if (isHighSurrogate(text.charCodeAt(i))) i++;
    scalars++;
  }
  return scalars;
}

/** UTF-16 index of the given scalar offset. */
export function scalarToUtf16(text: string, scalar: number): number {
  if (scalar < 0) throw new RangeError(`scalar offset ${scalar} is negative`);
  let remaining = scalar;
  let i = 0;
  while (remaining > 0) {
    if (i >= text.length) {
      throw new RangeError(`scalar offset ${scalar} exceeds text length ${scalarLength(text)}`);
    }
    if (isHighSurrogate(text.charCodeAt(i))) i++;
    i++;
    remaining--;
  }
  return i;
}

/**
 * Scalar offset of the given UTF-16 index.  The index must sit on a
 * character boundary; an index between the two halves of a surrogate
 * pair has no scalar equivalent and throws.
 */
export function utf16ToScalar(text: string, utf16: number): number {
  if (utf16 < 0 || utf16 > text.length) {
    throw new RangeError(`UTF-16 offset ${utf16} outside [0, ${text.length}]`);
  }
  let scalars = 0;
  let i = 0;
  while (i < utf16) {
    if (isHighSurrogate(text.charCodeAt(i))) {
      i += 2;
      if (i > utf16) {
        throw new RangeError(`UTF-16 offset ${utf16} splits a surrogate pair`);
      }
    } else {
      i += 1;
    }
    scalars++;
  }
  return scalars;
}

/**
 * Snap a UTF-16 selection edge to a character boundary.  An edge inside
 * a surrogate pair moves outward so the partially covered character
 * stays selected: starts move left, ends move right.  Never expands to
 * word boundaries; character boundaries only.
 */
export function snapToCharBoundary(text: string, utf16: number, edge: "start" | "end"): number {
  if (utf16 <= 0) return 0;
  if (utf16 >= text.length) return text.length;
  // inside a pair iff the unit at the index is a low surrogate preceded
  // by a high surrogate
  const unit = text.charCodeAt(utf16);
  if (unit >= 0xdc00 && unit <= 0xdfff && isHighSurrogate(text.charCodeAt(utf16 - 1))) {
    return edge === "start" ? utf16 - 1 : utf16 + 1;
  }
  return utf16;
}

/** Convert a DOM selection (UTF-16 edges) into a server span (scalar offsets). */
export function toScalarSpan(text: string, utf16Start: number, utf16End: number): ScalarSpan {
  const lo = snapToCharBoundary(text, Math.min(utf16Start, utf16End), "start");
  const hi = snapToCharBoundary(text, Math.max(utf16Start, utf16End), "end");
  return { start: utf16ToScalar(text, lo), end: utf16ToScalar(text, hi) };
}

/** The exact substring at scalar offsets [start, end), as the server reads it. */
export function extractSurface(text: string, scalarStart: number, scalarEnd: number): string {
  if (scalarStart < 0 || scalarEnd < scalarStart) {
    throw new RangeError(`bad scalar span [${scalarStart}, ${scalarEnd})`);
  }
  return text.slice(scalarToUtf16(text, scalarStart), scalarToUtf16(text, scalarEnd));
}

/**
 * Canonical concept form, mirroring the server: NFC, lowercase, runs of
 * whitespace collapsed to single spaces, ends trimmed, NFC again.  The
 * gram length is the space-token count of the result.
 */
export function normalizeConcept(surface: string): NormalizedConcept {
  const tokens = surface
    .normalize("NFC")
    .toLowerCase()
    .split(/\s+/u)
    .filter((t) => t.length > 0);
  if (tokens.length === 0) {
    throw new RangeError("surface contains no non-whitespace characters");
  }
  const value = tokens.join(" ").normalize("NFC");
  return { value, gramLength: value.split(" ").length };
}
